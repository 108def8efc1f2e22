#pragma once

// In-memory knowledge graph in coordinate-list (COO) form.
//
// Hyperedge i is fact i. Three flat tables describe the graph:
//   edge_relation        relation type of each hyperedge
//   primary incidence    (edge, entity, position) rows in any order; the
//                        positions of one edge are exactly 0..arity-1
//   qualifier incidence  (edge, qualifier relation, qualifier entity) rows
//
// Offset-indexed (CSR) views are derived from the tables once, at
// construction, and answer the neighbourhood queries of the propagation:
// edge -> primary nodes, edge -> qualifier nodes, entity -> primary edges,
// entity -> qualifier edges and relation -> instance edges.
//
// An entity appearing twice in one tuple contributes two incidence rows, and
// every accessor keeps that multiplicity.

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hehr/fact_format.hpp"

namespace hehr {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using EdgeIndex = std::uint32_t;

class VocabMaps {
 public:
  // Returns the id of `token`, assigning the next dense id when unseen.
  EntityId add_entity(const std::string& token);
  RelationId add_relation(const std::string& token);

  bool has_entity(const std::string& token) const { return entity_to_id_.contains(token); }
  bool has_relation(const std::string& token) const { return relation_to_id_.contains(token); }

  // Throw UnknownToken.
  EntityId entity_id(const std::string& token) const;
  RelationId relation_id(const std::string& token) const;

  const std::string& entity_name(EntityId id) const;
  const std::string& relation_name(RelationId id) const;

  std::size_t num_entities() const { return id_to_entity_.size(); }
  std::size_t num_relations() const { return id_to_relation_.size(); }

  const std::vector<std::string>& entities() const { return id_to_entity_; }
  const std::vector<std::string>& relations() const { return id_to_relation_; }

  // FNV-1a over both id->token lists; identifies a vocabulary in checkpoints.
  std::uint64_t hash() const;

  friend bool operator==(const VocabMaps& a, const VocabMaps& b) {
    return a.id_to_entity_ == b.id_to_entity_ && a.id_to_relation_ == b.id_to_relation_;
  }

 private:
  std::unordered_map<std::string, EntityId> entity_to_id_;
  std::vector<std::string> id_to_entity_;
  std::unordered_map<std::string, RelationId> relation_to_id_;
  std::vector<std::string> id_to_relation_;
};

// First-occurrence id assignment in two passes over the records: primary
// relations and entities of every fact first, then every qualifier's
// relation and entity. Tokens already in `seed` keep their ids.
VocabMaps build_vocab(const std::vector<FactRecord>& records, VocabMaps seed = {});

// Fact with every token replaced by its id.
struct IdFact {
  RelationId relation = 0;
  std::vector<EntityId> primary;
  std::vector<std::pair<RelationId, EntityId>> qualifiers;

  std::size_t arity() const { return primary.size(); }
  friend bool operator==(const IdFact&, const IdFact&) = default;
};

// Throws UnknownToken for tokens absent from `vocab`.
IdFact resolve_fact(const FactRecord& record, const VocabMaps& vocab);

// Offset-indexed adjacency: items of row i are values[offsets[i] .. offsets[i+1]).
struct Csr {
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> values;

  std::span<const std::uint32_t> row(std::size_t i) const {
    return {values.data() + offsets[i], values.data() + offsets[i + 1]};
  }
  std::size_t rows() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

class GraphStore {
 public:
  struct PrimaryIncidence {
    std::vector<EdgeIndex> edge;
    std::vector<EntityId> entity;
    std::vector<std::uint32_t> position;
  };
  struct QualifierIncidence {
    std::vector<EdgeIndex> edge;
    std::vector<RelationId> relation;
    std::vector<EntityId> entity;
  };

  GraphStore() = default;

  // Validates the tables (ranges, contiguous positions) and derives the CSR
  // views. Throws FormatError on a violated invariant.
  GraphStore(std::size_t num_entities, std::size_t num_relations,
             std::vector<RelationId> edge_relation, PrimaryIncidence primary,
             QualifierIncidence qualifier);

  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }
  std::size_t num_edges() const { return edge_relation_.size(); }

  const std::vector<RelationId>& edge_relation() const { return edge_relation_; }
  const PrimaryIncidence& primary_incidence() const { return primary_; }
  const QualifierIncidence& qualifier_incidence() const { return qualifier_; }

  // Throw IndexOutOfRange.
  std::span<const EntityId> primary_nodes(EdgeIndex e) const;
  std::span<const EntityId> qualifier_nodes(EdgeIndex e) const;
  std::span<const RelationId> qualifier_relations(EdgeIndex e) const;
  std::span<const EdgeIndex> primary_edges(EntityId v) const;
  std::span<const EdgeIndex> qualifier_edges(EntityId v) const;
  std::span<const EdgeIndex> relation_instances(RelationId r) const;
  std::size_t arity(EdgeIndex e) const { return primary_nodes(e).size(); }

  const Csr& edge_to_primary() const { return edge_to_primary_; }
  const Csr& edge_to_qualifier() const { return edge_to_qual_; }
  const Csr& entity_to_primary_edges() const { return entity_to_primary_; }
  const Csr& entity_to_qualifier_edges() const { return entity_to_qual_; }
  const Csr& relation_to_edges() const { return relation_to_edges_; }

  std::size_t max_arity() const;

  // Binary snapshot: "HEHR", u16 version, u32 |V|, u32 |R|, then
  // edge_relation, primary (edge, entity, position) and qualifier
  // (edge, relation, entity) lists, each a u32 length followed by u32 ids.
  // All little-endian.
  void save(std::ostream& out) const;
  static GraphStore load(std::istream& in);

  friend bool operator==(const GraphStore& a, const GraphStore& b);

 private:
  void derive_views();

  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::vector<RelationId> edge_relation_;
  PrimaryIncidence primary_;
  QualifierIncidence qualifier_;

  Csr edge_to_primary_;
  Csr edge_to_qual_;
  std::vector<RelationId> edge_to_qual_relation_;
  Csr entity_to_primary_;
  Csr entity_to_qual_;
  Csr relation_to_edges_;
};

// Hyperedge i is records[i]. Throws UnknownToken.
GraphStore build_graph(const std::vector<FactRecord>& records, const VocabMaps& vocab);
GraphStore build_graph(const std::vector<IdFact>& facts, std::size_t num_entities,
                       std::size_t num_relations);

}  // namespace hehr
