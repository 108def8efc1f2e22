#pragma once

// Hyperedge-centric message propagation.
//
// Every layer runs three phases over the whole graph:
//
//   gather    h_e = act(W_PN . mean_{u in P(e)} h_u) + act(W_QN . mean_{u in Q(e)} h_u)
//   relations h_r = act(W_R  . mean_{e : type(e) = r} h_e)
//   scatter   h_v = act(W_PE . mean_{e in P(v)} h_e) + act(W_QE . mean_{e in Q(v)} h_e)
//
// where P/Q are primary / qualifier memberships. A term whose set is empty is
// dropped; a relation without instances and an entity without any membership
// keep their previous embedding. Relation and entity updates read the edge
// embeddings of the current layer only.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hehr/graph_store.hpp"
#include "hehr/linalg.hpp"

namespace hehr {

enum class Activation { relu, tanh, identity };
enum class EncoderMode { inductive, transductive };

// How relation embeddings are refreshed each layer.
enum class RelationUpdate {
  edge_instances,    // mean of the instance edges' embeddings (default)
  direct_transform,  // act(W_R . h_r) of the previous layer; ablation
};

struct EncoderConfig {
  std::size_t embedding_dim = 128;
  std::size_t num_layers = 2;
  Activation activation = Activation::relu;
  EncoderMode mode = EncoderMode::transductive;
  double inductive_init_value = 0.5;
  bool batch_norm = false;
  // Adds the previous layer's embedding to each updated edge, relation and
  // entity embedding.
  bool self_residual = false;
  // When false every qualifier membership is ignored.
  bool use_qualifiers = true;
  RelationUpdate relation_update = RelationUpdate::edge_instances;

  void validate() const;
};

struct LayerWeights {
  Matrix pn;  // primary nodes -> edge
  Matrix qn;  // qualifier nodes -> edge
  Matrix r;   // edges -> relation
  Matrix pe;  // primary edges -> entity
  Matrix qe;  // qualifier edges -> entity

  static LayerWeights zeros(std::size_t dim);
  static LayerWeights identity(std::size_t dim);

  std::size_t dim() const { return static_cast<std::size_t>(pn.rows()); }
  // Throws DimensionMismatch / NonFiniteValue.
  void validate(std::size_t dim) const;
};

struct EmbeddingState {
  Matrix entities;   // |V| x d
  Matrix relations;  // |R| x d
  Matrix edges;      // |E| x d
};

double activate(Activation act, double x);
// Derivative expressed through the pre-activation value.
double activate_derivative(Activation act, double x);

// Inductive: constant rows, `learned_*` must be absent. Transductive: rows
// copied from `learned_*`, which must be present. Edge rows start at zero.
EmbeddingState init_embeddings(const GraphStore& graph, const EncoderConfig& cfg,
                               const Matrix* learned_entities = nullptr,
                               const Matrix* learned_relations = nullptr);

// Single-item views of the propagation, mainly for inspection and tests.
Vector gather_primary(const GraphStore& graph, EdgeIndex e, const EmbeddingState& state);
std::optional<Vector> gather_qualifier(const GraphStore& graph, EdgeIndex e,
                                       const EmbeddingState& state);
// `previous_edge` is only read when cfg.self_residual is set.
Vector apply_hyperedge(const Vector& gathered_primary, const std::optional<Vector>& gathered_qual,
                       const LayerWeights& weights, const EncoderConfig& cfg,
                       const Vector* previous_edge = nullptr);
// `state.edges` must already hold the current layer's edge embeddings and
// `state.relations` the previous layer's relation embeddings.
Vector apply_relation(const GraphStore& graph, RelationId r, const EmbeddingState& state,
                      const LayerWeights& weights, const EncoderConfig& cfg);
// `state.edges` current layer, `state.entities` previous layer.
Vector apply_entity(const GraphStore& graph, EntityId v, const EmbeddingState& state,
                    const LayerWeights& weights, const EncoderConfig& cfg);

// Everything one layer needs to be differentiated.
struct LayerCache {
  EmbeddingState input;
  Matrix edge_primary_mean, edge_qual_mean;      // |E| x d
  Matrix edge_primary_pre, edge_qual_pre;        // |E| x d, pre-activation
  std::vector<char> edge_has_qual;
  Matrix edges;                                  // |E| x d output
  Matrix relation_mean, relation_pre;            // |R| x d
  std::vector<char> relation_updated;
  Matrix entity_primary_mean, entity_qual_mean;  // |V| x d
  Matrix entity_primary_pre, entity_qual_pre;
  std::vector<char> entity_has_primary, entity_has_qual;
  // Batch-norm: normalized output and 1/sqrt(var + eps) per column.
  Matrix entity_norm, relation_norm;
  Vector entity_inv_std, relation_inv_std;
};

struct ForwardTrace {
  std::vector<LayerCache> layers;
};

// One propagation layer. When `cache` is given it is filled for backward.
EmbeddingState propagate_layer(const GraphStore& graph, const LayerWeights& weights,
                               const EmbeddingState& input, const EncoderConfig& cfg,
                               LayerCache* cache = nullptr);

struct EncoderOutput {
  Matrix entities;
  Matrix relations;
};

// Runs cfg.num_layers layers. Throws DimensionMismatch when
// params.size() != cfg.num_layers and NonFiniteValue (naming layer and phase)
// when a non-finite value appears.
EncoderOutput forward(const GraphStore& graph, const std::vector<LayerWeights>& params,
                      const EmbeddingState& init, const EncoderConfig& cfg,
                      ForwardTrace* trace = nullptr);

struct LayerGradients {
  LayerWeights weights;
  EmbeddingState input;  // gradient w.r.t. the layer's input state
};

// Reverse of propagate_layer, given the gradient of the loss w.r.t. the
// layer's output entity, relation and edge embeddings.
LayerGradients backward_layer(const GraphStore& graph, const LayerWeights& weights,
                              const LayerCache& cache, const EncoderConfig& cfg,
                              const Matrix& d_entities, const Matrix& d_relations,
                              const Matrix& d_edges);

std::string to_string(Activation act);
Activation parse_activation(const std::string& s);

}  // namespace hehr
