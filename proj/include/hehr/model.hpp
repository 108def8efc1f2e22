#pragma once

// Encoder + decoder parameter set, the forward pass that turns it into final
// embeddings, and the batch loss with its exact gradient.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hehr/decoders.hpp"
#include "hehr/encoder.hpp"
#include "hehr/graph_store.hpp"
#include "hehr/linalg.hpp"

namespace hehr {

enum class ModelMode {
  inductive,     // constant initial features; only layer and decoder weights learned
  transductive,  // initial features are learned tables
  shallow,       // no encoder; tables feed the decoder directly
};

std::string to_string(ModelMode mode);
ModelMode parse_mode(const std::string& s);

struct ModelConfig {
  EncoderConfig encoder;
  ModelMode mode = ModelMode::transductive;
  DecoderKind decoder = DecoderKind::hype;
  // dim is taken from encoder.embedding_dim; max_arity from the data when 0.
  HypeGeometry hype;

  std::size_t dim() const { return encoder.embedding_dim; }
  bool uses_tables() const { return mode != ModelMode::inductive; }
  bool uses_encoder() const { return mode != ModelMode::shallow; }
  // Encoder config with its mode aligned to `mode`.
  EncoderConfig encoder_config() const;
  void validate() const;
};

struct ModelParams {
  Matrix entity_table;    // |V| x d, transductive and shallow only
  Matrix relation_table;  // |R| x d, transductive and shallow only
  std::vector<LayerWeights> layers;
  HypeDecoderParams hype;  // empty unless the decoder is HypE

  // Every learned array with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;

  // Same shapes, all zeros.
  ModelParams zeros_like() const;
  std::size_t parameter_count() const;
};

// Glorot-uniform weights and filters; tables uniform in [-0.1, 0.1].
ModelParams init_params(const ModelConfig& cfg, std::size_t num_entities, std::size_t num_relations,
                        std::mt19937_64& rng);

// Throws DimensionMismatch when the parameters do not fit cfg / the graph.
void check_params(const ModelConfig& cfg, const ModelParams& params, const GraphStore& graph);

struct Embeddings {
  Matrix entities;
  Matrix relations;
};

Embeddings embed(const ModelConfig& cfg, const ModelParams& params, const GraphStore& graph,
                 ForwardTrace* trace = nullptr);

// Primary tuple to score; qualifiers act only through the encoder.
struct TupleRef {
  RelationId relation;
  std::span<const EntityId> entities;
};

struct LabeledTuple {
  RelationId relation;
  std::vector<EntityId> entities;
  double label;  // 1 positive, 0 negative
};

// Mean sigmoid-BCE over `batch` after one full-graph forward. When `grad` is
// non-null it receives the exact gradient (same shapes as `params`).
double batch_loss(const ModelConfig& cfg, const ModelParams& params, const GraphStore& graph,
                  const std::vector<LabeledTuple>& batch, ModelParams* grad);

// Scores tuples against fixed final embeddings.
class TupleScorer {
 public:
  TupleScorer(const ModelConfig& cfg, const ModelParams& params, Embeddings embeddings);

  std::size_t num_entities() const { return static_cast<std::size_t>(emb_.entities.rows()); }
  std::size_t num_relations() const { return static_cast<std::size_t>(emb_.relations.rows()); }
  const Embeddings& embeddings() const { return emb_; }

  double raw(const TupleRef& tuple) const;
  // out[c] = raw score of `tuple` with entity c placed at `position`.
  void candidate_scores(const TupleRef& tuple, std::size_t position, std::vector<double>& out) const;

 private:
  // Entity table as seen by the decoder at `position`.
  const Matrix& positioned(std::size_t position) const;

  DecoderKind decoder_;
  Embeddings emb_;
  std::vector<Matrix> transformed_;  // HypE: per position, |V| x d
};

}  // namespace hehr
