#include "hehr/graph_store.hpp"

#include <algorithm>
#include <limits>

#include "binary_io.hpp"
#include "hehr/errors.hpp"

namespace hehr {

namespace {

constexpr std::uint16_t kSnapshotVersion = 1;

// Counting-sort construction of a CSR from (row, value) pairs; values inside
// a row are sorted ascending.
Csr csr_from_pairs(std::size_t rows, const std::vector<std::uint32_t>& row_of,
                   const std::vector<std::uint32_t>& value_of) {
  Csr csr;
  csr.offsets.assign(rows + 1, 0);
  for (auto r : row_of) ++csr.offsets[r + 1];
  for (std::size_t i = 0; i < rows; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.values.resize(row_of.size());
  std::vector<std::uint32_t> fill(csr.offsets.begin(), csr.offsets.end() - 1);
  for (std::size_t i = 0; i < row_of.size(); ++i) csr.values[fill[row_of[i]]++] = value_of[i];
  for (std::size_t r = 0; r < rows; ++r) {
    std::sort(csr.values.begin() + csr.offsets[r], csr.values.begin() + csr.offsets[r + 1]);
  }
  return csr;
}

template <typename T>
std::span<const T> checked_row(const Csr& csr, std::size_t i, const char* what) {
  if (i >= csr.rows()) {
    throw IndexOutOfRange(std::string(what) + " index " + std::to_string(i) + " out of range");
  }
  return csr.row(i);
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  // Separator so that ["ab","c"] and ["a","bc"] differ.
  h ^= 0xFF;
  h *= 1099511628211ull;
  return h;
}

}  // namespace

EntityId VocabMaps::add_entity(const std::string& token) {
  auto [it, inserted] = entity_to_id_.try_emplace(token, static_cast<EntityId>(id_to_entity_.size()));
  if (inserted) id_to_entity_.push_back(token);
  return it->second;
}

RelationId VocabMaps::add_relation(const std::string& token) {
  auto [it, inserted] =
      relation_to_id_.try_emplace(token, static_cast<RelationId>(id_to_relation_.size()));
  if (inserted) id_to_relation_.push_back(token);
  return it->second;
}

EntityId VocabMaps::entity_id(const std::string& token) const {
  auto it = entity_to_id_.find(token);
  if (it == entity_to_id_.end()) throw UnknownToken("unknown entity '" + token + "'");
  return it->second;
}

RelationId VocabMaps::relation_id(const std::string& token) const {
  auto it = relation_to_id_.find(token);
  if (it == relation_to_id_.end()) throw UnknownToken("unknown relation '" + token + "'");
  return it->second;
}

const std::string& VocabMaps::entity_name(EntityId id) const {
  if (id >= id_to_entity_.size()) throw IndexOutOfRange("entity id out of range");
  return id_to_entity_[id];
}

const std::string& VocabMaps::relation_name(RelationId id) const {
  if (id >= id_to_relation_.size()) throw IndexOutOfRange("relation id out of range");
  return id_to_relation_[id];
}

std::uint64_t VocabMaps::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& s : id_to_entity_) h = fnv1a(h, s);
  h = fnv1a(h, "\x01relations");
  for (const auto& s : id_to_relation_) h = fnv1a(h, s);
  return h;
}

VocabMaps build_vocab(const std::vector<FactRecord>& records, VocabMaps seed) {
  VocabMaps vocab = std::move(seed);
  for (const auto& f : records) {
    vocab.add_relation(f.relation);
    for (const auto& e : f.primary) vocab.add_entity(e);
  }
  for (const auto& f : records) {
    for (const auto& q : f.qualifiers) {
      vocab.add_relation(q.relation);
      vocab.add_entity(q.entity);
    }
  }
  return vocab;
}

IdFact resolve_fact(const FactRecord& record, const VocabMaps& vocab) {
  IdFact f;
  f.relation = vocab.relation_id(record.relation);
  f.primary.reserve(record.primary.size());
  for (const auto& e : record.primary) f.primary.push_back(vocab.entity_id(e));
  for (const auto& q : record.qualifiers) {
    f.qualifiers.emplace_back(vocab.relation_id(q.relation), vocab.entity_id(q.entity));
  }
  return f;
}

GraphStore::GraphStore(std::size_t num_entities, std::size_t num_relations,
                       std::vector<RelationId> edge_relation, PrimaryIncidence primary,
                       QualifierIncidence qualifier)
    : num_entities_(num_entities),
      num_relations_(num_relations),
      edge_relation_(std::move(edge_relation)),
      primary_(std::move(primary)),
      qualifier_(std::move(qualifier)) {
  const auto num_edges = edge_relation_.size();
  for (auto r : edge_relation_) {
    if (r >= num_relations_) throw FormatError("edge relation id out of range");
  }
  if (primary_.entity.size() != primary_.edge.size() ||
      primary_.position.size() != primary_.edge.size()) {
    throw FormatError("primary incidence lists differ in length");
  }
  if (qualifier_.relation.size() != qualifier_.edge.size() ||
      qualifier_.entity.size() != qualifier_.edge.size()) {
    throw FormatError("qualifier incidence lists differ in length");
  }
  for (std::size_t i = 0; i < primary_.edge.size(); ++i) {
    if (primary_.edge[i] >= num_edges) throw FormatError("primary edge index out of range");
    if (primary_.entity[i] >= num_entities_) throw FormatError("primary entity id out of range");
  }
  for (std::size_t i = 0; i < qualifier_.edge.size(); ++i) {
    if (qualifier_.edge[i] >= num_edges) throw FormatError("qualifier edge index out of range");
    if (qualifier_.relation[i] >= num_relations_) throw FormatError("qualifier relation id out of range");
    if (qualifier_.entity[i] >= num_entities_) throw FormatError("qualifier entity id out of range");
  }
  derive_views();
}

void GraphStore::derive_views() {
  const auto num_edges = edge_relation_.size();

  // edge -> primary nodes, placed by tuple position.
  edge_to_primary_.offsets.assign(num_edges + 1, 0);
  for (auto e : primary_.edge) ++edge_to_primary_.offsets[e + 1];
  for (std::size_t e = 0; e < num_edges; ++e) {
    if (edge_to_primary_.offsets[e + 1] == 0) {
      throw FormatError("hyperedge " + std::to_string(e) + " has no primary entities");
    }
    edge_to_primary_.offsets[e + 1] += edge_to_primary_.offsets[e];
  }
  constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
  edge_to_primary_.values.assign(primary_.edge.size(), kUnset);
  for (std::size_t i = 0; i < primary_.edge.size(); ++i) {
    const auto e = primary_.edge[i];
    const auto arity = edge_to_primary_.offsets[e + 1] - edge_to_primary_.offsets[e];
    if (primary_.position[i] >= arity) {
      throw FormatError("position " + std::to_string(primary_.position[i]) +
                        " outside arity of hyperedge " + std::to_string(e));
    }
    auto& slot = edge_to_primary_.values[edge_to_primary_.offsets[e] + primary_.position[i]];
    if (slot != kUnset) {
      throw FormatError("duplicate position in hyperedge " + std::to_string(e));
    }
    slot = primary_.entity[i];
  }

  // edge -> qualifier nodes, in incidence order (stable counting sort).
  edge_to_qual_.offsets.assign(num_edges + 1, 0);
  for (auto e : qualifier_.edge) ++edge_to_qual_.offsets[e + 1];
  for (std::size_t e = 0; e < num_edges; ++e) edge_to_qual_.offsets[e + 1] += edge_to_qual_.offsets[e];
  edge_to_qual_.values.resize(qualifier_.edge.size());
  edge_to_qual_relation_.resize(qualifier_.edge.size());
  {
    std::vector<std::uint32_t> fill(edge_to_qual_.offsets.begin(), edge_to_qual_.offsets.end() - 1);
    for (std::size_t i = 0; i < qualifier_.edge.size(); ++i) {
      const auto at = fill[qualifier_.edge[i]]++;
      edge_to_qual_.values[at] = qualifier_.entity[i];
      edge_to_qual_relation_[at] = qualifier_.relation[i];
    }
  }

  entity_to_primary_ = csr_from_pairs(num_entities_, primary_.entity, primary_.edge);
  entity_to_qual_ = csr_from_pairs(num_entities_, qualifier_.entity, qualifier_.edge);

  std::vector<std::uint32_t> edge_ids(num_edges);
  for (std::size_t e = 0; e < num_edges; ++e) edge_ids[e] = static_cast<std::uint32_t>(e);
  relation_to_edges_ = csr_from_pairs(num_relations_, edge_relation_, edge_ids);
}

std::span<const EntityId> GraphStore::primary_nodes(EdgeIndex e) const {
  return checked_row<EntityId>(edge_to_primary_, e, "hyperedge");
}

std::span<const EntityId> GraphStore::qualifier_nodes(EdgeIndex e) const {
  return checked_row<EntityId>(edge_to_qual_, e, "hyperedge");
}

std::span<const RelationId> GraphStore::qualifier_relations(EdgeIndex e) const {
  if (e >= num_edges()) throw IndexOutOfRange("hyperedge index out of range");
  return {edge_to_qual_relation_.data() + edge_to_qual_.offsets[e],
          edge_to_qual_relation_.data() + edge_to_qual_.offsets[e + 1]};
}

std::span<const EdgeIndex> GraphStore::primary_edges(EntityId v) const {
  return checked_row<EdgeIndex>(entity_to_primary_, v, "entity");
}

std::span<const EdgeIndex> GraphStore::qualifier_edges(EntityId v) const {
  return checked_row<EdgeIndex>(entity_to_qual_, v, "entity");
}

std::span<const EdgeIndex> GraphStore::relation_instances(RelationId r) const {
  return checked_row<EdgeIndex>(relation_to_edges_, r, "relation");
}

std::size_t GraphStore::max_arity() const {
  std::size_t m = 0;
  for (std::size_t e = 0; e < num_edges(); ++e) {
    m = std::max<std::size_t>(m, edge_to_primary_.offsets[e + 1] - edge_to_primary_.offsets[e]);
  }
  return m;
}

void GraphStore::save(std::ostream& out) const {
  out.write("HEHR", 4);
  binio::put_uint<std::uint16_t>(out, kSnapshotVersion);
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(num_entities_));
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(num_relations_));
  binio::put_u32_list(out, edge_relation_);
  binio::put_u32_list(out, primary_.edge);
  binio::put_u32_list(out, primary_.entity);
  binio::put_u32_list(out, primary_.position);
  binio::put_u32_list(out, qualifier_.edge);
  binio::put_u32_list(out, qualifier_.relation);
  binio::put_u32_list(out, qualifier_.entity);
  if (!out) throw IoFailure("graph snapshot write failed");
}

GraphStore GraphStore::load(std::istream& in) {
  binio::expect_magic(in, "HEHR");
  const auto version = binio::get_uint<std::uint16_t>(in);
  if (version != kSnapshotVersion) {
    throw FormatError("unsupported graph snapshot version " + std::to_string(version));
  }
  const auto nv = binio::get_uint<std::uint32_t>(in);
  const auto nr = binio::get_uint<std::uint32_t>(in);
  auto edge_relation = binio::get_u32_list(in);
  PrimaryIncidence p;
  p.edge = binio::get_u32_list(in);
  p.entity = binio::get_u32_list(in);
  p.position = binio::get_u32_list(in);
  QualifierIncidence q;
  q.edge = binio::get_u32_list(in);
  q.relation = binio::get_u32_list(in);
  q.entity = binio::get_u32_list(in);
  return GraphStore(nv, nr, std::move(edge_relation), std::move(p), std::move(q));
}

bool operator==(const GraphStore& a, const GraphStore& b) {
  return a.num_entities_ == b.num_entities_ && a.num_relations_ == b.num_relations_ &&
         a.edge_relation_ == b.edge_relation_ && a.primary_.edge == b.primary_.edge &&
         a.primary_.entity == b.primary_.entity && a.primary_.position == b.primary_.position &&
         a.qualifier_.edge == b.qualifier_.edge && a.qualifier_.relation == b.qualifier_.relation &&
         a.qualifier_.entity == b.qualifier_.entity;
}

GraphStore build_graph(const std::vector<IdFact>& facts, std::size_t num_entities,
                       std::size_t num_relations) {
  std::vector<RelationId> edge_relation;
  GraphStore::PrimaryIncidence p;
  GraphStore::QualifierIncidence q;
  edge_relation.reserve(facts.size());
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const auto e = static_cast<EdgeIndex>(i);
    edge_relation.push_back(facts[i].relation);
    for (std::size_t pos = 0; pos < facts[i].primary.size(); ++pos) {
      p.edge.push_back(e);
      p.entity.push_back(facts[i].primary[pos]);
      p.position.push_back(static_cast<std::uint32_t>(pos));
    }
    for (const auto& [qr, qv] : facts[i].qualifiers) {
      q.edge.push_back(e);
      q.relation.push_back(qr);
      q.entity.push_back(qv);
    }
  }
  return GraphStore(num_entities, num_relations, std::move(edge_relation), std::move(p), std::move(q));
}

GraphStore build_graph(const std::vector<FactRecord>& records, const VocabMaps& vocab) {
  std::vector<IdFact> facts;
  facts.reserve(records.size());
  for (const auto& r : records) facts.push_back(resolve_fact(r, vocab));
  return build_graph(facts, vocab.num_entities(), vocab.num_relations());
}

}  // namespace hehr
