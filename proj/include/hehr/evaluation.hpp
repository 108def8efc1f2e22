#pragma once

// Rank-based link prediction evaluation.
//
// For a test fact and one primary position, every entity is substituted into
// that position and scored. The rank of the true fact is
//
//   1 + #{candidates scoring strictly higher} [+ #{tied candidates}]
//
// with ties counted against the true fact in the pessimistic convention and
// ignored in the optimistic one. In the filtered setting candidates that form
// another known true fact are dropped first.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hehr/graph_store.hpp"
#include "hehr/model.hpp"

namespace hehr {

// Known true primary tuples (relation + entities).
class FilterIndex {
 public:
  FilterIndex() = default;
  explicit FilterIndex(const std::vector<IdFact>& facts);

  void insert(const IdFact& fact);
  bool contains(RelationId relation, std::span<const EntityId> entities) const;
  // Entities e such that the tuple with e at `position` is known.
  const std::vector<EntityId>* completions(RelationId relation, std::span<const EntityId> entities,
                                           std::size_t position) const;
  std::size_t size() const { return tuples_.size(); }

 private:
  using Key = std::vector<std::uint32_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };
  static Key tuple_key(RelationId relation, std::span<const EntityId> entities);
  static Key masked_key(RelationId relation, std::span<const EntityId> entities, std::size_t position);

  std::unordered_set<Key, KeyHash> tuples_;
  std::unordered_map<Key, std::vector<EntityId>, KeyHash> completions_;
};

enum class TieBreak { pessimistic, optimistic };

struct RankOptions {
  bool filtered = true;
  TieBreak ties = TieBreak::pessimistic;
};

// `scores[c]` is the score of the fact with entity c at `position`; the true
// entity's own entry is the reference score. `filter` may be null (raw).
std::size_t rank_from_scores(const IdFact& fact, std::size_t position, std::span<const double> scores,
                             const FilterIndex* filter, TieBreak ties);

// Throws PositionOutOfRange.
std::size_t rank_of(const IdFact& fact, std::size_t position, const TupleScorer& scorer,
                    const FilterIndex* filter, TieBreak ties = TieBreak::pessimistic);

// Throw EmptyInput.
double mrr(std::span<const std::size_t> ranks);
double hits_at_k(std::span<const std::size_t> ranks, std::size_t k);

struct RankReport {
  std::vector<std::size_t> ranks;
  double mrr = 0.0;
  std::map<std::size_t, double> hits;
  double wall_seconds = 0.0;
};

inline const std::vector<std::size_t> kDefaultHitsK = {1, 3, 5, 10};

// One rank per (fact, primary position), in fact order then position order.
RankReport evaluate(const std::vector<IdFact>& test_facts, const TupleScorer& scorer,
                    const FilterIndex& filter, const RankOptions& options = {},
                    const std::vector<std::size_t>& ks = kDefaultHitsK);

// Forward pass then evaluate.
RankReport evaluate(const std::vector<IdFact>& test_facts, const ModelConfig& cfg,
                    const ModelParams& params, const GraphStore& graph, const FilterIndex& filter,
                    const RankOptions& options = {}, const std::vector<std::size_t>& ks = kDefaultHitsK);

std::string format_rank_report_text(const RankReport& report);
// `config_echo` is embedded verbatim under "config".
std::string format_rank_report_json(const RankReport& report,
                                    const std::map<std::string, std::string>& config_echo = {});

}  // namespace hehr
