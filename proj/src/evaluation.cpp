#include "hehr/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "hehr/errors.hpp"
#include "json.hpp"

namespace hehr {

namespace {
constexpr std::uint32_t kMask = 0xFFFFFFFFu;
}  // namespace

std::size_t FilterIndex::KeyHash::operator()(const Key& k) const {
  std::uint64_t h = 1469598103934665603ull;
  for (auto x : k) {
    h ^= x;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

FilterIndex::Key FilterIndex::tuple_key(RelationId relation, std::span<const EntityId> entities) {
  Key k;
  k.reserve(entities.size() + 1);
  k.push_back(relation);
  k.insert(k.end(), entities.begin(), entities.end());
  return k;
}

FilterIndex::Key FilterIndex::masked_key(RelationId relation, std::span<const EntityId> entities,
                                         std::size_t position) {
  Key k = tuple_key(relation, entities);
  k[position + 1] = kMask;
  k.push_back(static_cast<std::uint32_t>(position));
  return k;
}

FilterIndex::FilterIndex(const std::vector<IdFact>& facts) {
  for (const auto& f : facts) insert(f);
}

void FilterIndex::insert(const IdFact& fact) {
  if (!tuples_.insert(tuple_key(fact.relation, fact.primary)).second) return;
  for (std::size_t p = 0; p < fact.arity(); ++p) {
    completions_[masked_key(fact.relation, fact.primary, p)].push_back(fact.primary[p]);
  }
}

bool FilterIndex::contains(RelationId relation, std::span<const EntityId> entities) const {
  return tuples_.contains(tuple_key(relation, entities));
}

const std::vector<EntityId>* FilterIndex::completions(RelationId relation,
                                                      std::span<const EntityId> entities,
                                                      std::size_t position) const {
  auto it = completions_.find(masked_key(relation, entities, position));
  return it == completions_.end() ? nullptr : &it->second;
}

std::size_t rank_from_scores(const IdFact& fact, std::size_t position, std::span<const double> scores,
                             const FilterIndex* filter, TieBreak ties) {
  if (position >= fact.arity()) throw PositionOutOfRange("position outside fact arity");
  const auto truth = fact.primary[position];
  if (truth >= scores.size()) throw UnknownEntity("true entity has no score");
  const double reference = scores[truth];
  std::size_t greater = 0, tied = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (c == truth) continue;
    if (scores[c] > reference) {
      ++greater;
    } else if (scores[c] == reference) {
      ++tied;
    }
  }
  // Remove the known completions that were counted.
  if (filter) {
    if (const auto* known = filter->completions(fact.relation, fact.primary, position)) {
      for (auto c : *known) {
        if (c == truth || c >= scores.size()) continue;
        if (scores[c] > reference) {
          --greater;
        } else if (scores[c] == reference) {
          --tied;
        }
      }
    }
  }
  return 1 + greater + (ties == TieBreak::pessimistic ? tied : 0);
}

std::size_t rank_of(const IdFact& fact, std::size_t position, const TupleScorer& scorer,
                    const FilterIndex* filter, TieBreak ties) {
  if (position >= fact.arity()) throw PositionOutOfRange("position outside fact arity");
  for (auto e : fact.primary) {
    if (e >= scorer.num_entities()) throw UnknownEntity("entity id " + std::to_string(e) + " has no embedding");
  }
  if (fact.relation >= scorer.num_relations()) throw UnknownEntity("relation has no embedding");
  std::vector<double> scores;
  scorer.candidate_scores({fact.relation, fact.primary}, position, scores);
  return rank_from_scores(fact, position, scores, filter, ties);
}

double mrr(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw EmptyInput("no ranks");
  double sum = 0.0;
  for (auto r : ranks) sum += 1.0 / static_cast<double>(r);
  return sum / static_cast<double>(ranks.size());
}

double hits_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw EmptyInput("no ranks");
  if (k < 1) throw ConfigError("k must be >= 1");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

RankReport evaluate(const std::vector<IdFact>& test_facts, const TupleScorer& scorer,
                    const FilterIndex& filter, const RankOptions& options,
                    const std::vector<std::size_t>& ks) {
  const auto t0 = std::chrono::steady_clock::now();
  RankReport report;
  const FilterIndex* f = options.filtered ? &filter : nullptr;
  for (const auto& fact : test_facts) {
    for (std::size_t p = 0; p < fact.arity(); ++p) {
      report.ranks.push_back(rank_of(fact, p, scorer, f, options.ties));
    }
  }
  if (!report.ranks.empty()) {
    report.mrr = mrr(report.ranks);
    for (auto k : ks) report.hits[k] = hits_at_k(report.ranks, k);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

RankReport evaluate(const std::vector<IdFact>& test_facts, const ModelConfig& cfg,
                    const ModelParams& params, const GraphStore& graph, const FilterIndex& filter,
                    const RankOptions& options, const std::vector<std::size_t>& ks) {
  const auto t0 = std::chrono::steady_clock::now();
  TupleScorer scorer(cfg, params, embed(cfg, params, graph));
  auto report = evaluate(test_facts, scorer, filter, options, ks);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string format_rank_report_text(const RankReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "queries: " << r.ranks.size() << '\n' << "mrr: " << r.mrr << '\n';
  for (const auto& [k, v] : r.hits) os << "hits@" << k << ": " << v << '\n';
  os << "wall_seconds: " << r.wall_seconds << '\n';
  return os.str();
}

std::string format_rank_report_json(const RankReport& r,
                                    const std::map<std::string, std::string>& config_echo) {
  nlohmann::json j;
  j["queries"] = r.ranks.size();
  j["mrr"] = r.mrr;
  nlohmann::json hits = nlohmann::json::object();
  for (const auto& [k, v] : r.hits) hits[std::to_string(k)] = v;
  j["hits"] = hits;
  j["wall_seconds"] = r.wall_seconds;
  j["config"] = config_echo;
  return j.dump(2);
}

}  // namespace hehr
