#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "json.hpp"

#include "hehr/errors.hpp"
#include "hehr/evaluation.hpp"
#include "hehr/model.hpp"
#include "test_support.hpp"

using namespace hehr;
using namespace hehr::testing;

namespace {

ModelConfig shallow_config(std::size_t d, DecoderKind decoder = DecoderKind::mdistmult) {
  ModelConfig cfg;
  cfg.mode = ModelMode::shallow;
  cfg.decoder = decoder;
  cfg.encoder.embedding_dim = d;
  cfg.hype = HypeGeometry{d, 3, 2, 2, 1};
  return cfg;
}

}  // namespace

TEST_CASE("rank from explicit scores") {
  const IdFact fact{0, {0, 2}, {}};
  const std::vector<double> scores = {0.0, 0.95, 0.9, 0.5, 0.9};
  // Position 1: truth is entity 2 with 0.9; one higher, one tie.
  CHECK(rank_from_scores(fact, 1, scores, nullptr, TieBreak::pessimistic) == 3);
  CHECK(rank_from_scores(fact, 1, scores, nullptr, TieBreak::optimistic) == 2);
  // Entity 1 completes another known fact and is filtered out.
  const FilterIndex filter({{0, {0, 1}, {}}, {0, {0, 2}, {}}});
  CHECK(rank_from_scores(fact, 1, scores, &filter, TieBreak::pessimistic) == 2);
  CHECK(rank_from_scores(fact, 1, scores, &filter, TieBreak::optimistic) == 1);
  // All scores equal.
  const std::vector<double> flat(5, 1.0);
  CHECK(rank_from_scores(fact, 1, flat, nullptr, TieBreak::pessimistic) == 5);
  CHECK(rank_from_scores(fact, 1, flat, nullptr, TieBreak::optimistic) == 1);
  CHECK_THROWS_AS(rank_from_scores(fact, 2, scores, nullptr, TieBreak::pessimistic), PositionOutOfRange);
  const IdFact unknown{0, {0, 9}, {}};
  CHECK_THROWS_AS(rank_from_scores(unknown, 1, scores, nullptr, TieBreak::pessimistic), UnknownEntity);
}

TEST_CASE("mrr and hits") {
  const std::vector<std::size_t> a = {1, 2, 4};
  CHECK(mrr(a) == doctest::Approx(0.583333).epsilon(1e-6));
  const std::vector<std::size_t> b = {1, 5, 11, 30};
  CHECK(hits_at_k(b, 10) == doctest::Approx(0.5));
  CHECK(hits_at_k(b, 1) == doctest::Approx(0.25));
  CHECK_THROWS_AS(mrr(std::span<const std::size_t>{}), EmptyInput);
  CHECK_THROWS_AS(hits_at_k(std::span<const std::size_t>{}, 1), EmptyInput);
}

TEST_CASE("filter index") {
  FilterIndex f({{0, {1, 2, 3}, {}}, {0, {1, 4, 3}, {}}, {1, {1, 2, 3}, {}}});
  CHECK(f.size() == 3);
  const std::vector<EntityId> t = {1, 7, 3};
  CHECK(f.contains(0, std::vector<EntityId>{1, 4, 3}));
  CHECK_FALSE(f.contains(0, t));
  const auto* c = f.completions(0, t, 1);
  REQUIRE(c != nullptr);
  CHECK(std::set<EntityId>(c->begin(), c->end()) == std::set<EntityId>{2, 4});
  CHECK(f.completions(2, t, 1) == nullptr);
  f.insert({0, {1, 2, 3}, {{0, 5}}});
  CHECK(f.size() == 3);
}

TEST_CASE("ranks are invariant under monotone score transforms") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(30);
    for (auto& x : s) x = std::round(u(rng) * 4) / 4;
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) + 1.0;
    const IdFact fact{0, {static_cast<EntityId>(trial % 30), 3}, {}};
    const FilterIndex filter({{0, {4, 3}, {}}, {0, {5, 3}, {}}});
    for (auto ties : {TieBreak::pessimistic, TieBreak::optimistic}) {
      const auto filtered = rank_from_scores(fact, 0, s, &filter, ties);
      const auto raw = rank_from_scores(fact, 0, s, nullptr, ties);
      CHECK(filtered == rank_from_scores(fact, 0, t, &filter, ties));
      CHECK(raw == rank_from_scores(fact, 0, t, nullptr, ties));
      CHECK(filtered <= raw);
    }
  }
}

TEST_CASE("random scores give the harmonic baseline") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 50, queries = 20000;
  std::vector<std::size_t> ranks;
  std::vector<double> s(n);
  for (std::size_t q = 0; q < queries; ++q) {
    for (auto& x : s) x = u(rng);
    ranks.push_back(rank_from_scores({0, {static_cast<EntityId>(q % n)}, {}}, 0, s, nullptr, TieBreak::pessimistic));
  }
  double harmonic = 0.0;
  for (std::size_t k = 1; k <= n; ++k) harmonic += 1.0 / static_cast<double>(k);
  CHECK(mrr(ranks) == doctest::Approx(harmonic / n).epsilon(0.05));
  CHECK(hits_at_k(ranks, 10) == doctest::Approx(10.0 / n).epsilon(0.05));
}

TEST_CASE("evaluate over a shallow model") {
  std::mt19937_64 rng(3);
  const std::vector<IdFact> facts = {{0, {0, 1}, {}}, {1, {2, 3, 4}, {}}, {0, {1, 5}, {{1, 0}}}};
  const auto graph = build_graph(facts, 6, 2);
  for (auto decoder : {DecoderKind::mdistmult, DecoderKind::hype}) {
    const auto cfg = shallow_config(4, decoder);
    const auto params = init_params(cfg, 6, 2, rng);
    const FilterIndex filter(facts);
    const auto a = evaluate(facts, cfg, params, graph, filter);
    const auto b = evaluate(facts, cfg, params, graph, filter);
    CHECK(a.ranks.size() == 7);
    CHECK(a.ranks == b.ranks);
    CHECK(a.hits.size() == kDefaultHitsK.size());
    const auto raw = evaluate(facts, cfg, params, graph, filter, {false, TieBreak::pessimistic});
    for (std::size_t i = 0; i < a.ranks.size(); ++i) CHECK(a.ranks[i] <= raw.ranks[i]);

    TupleScorer scorer(cfg, params, embed(cfg, params, graph));
    CHECK_THROWS_AS(rank_of(facts[0], 2, scorer, nullptr), PositionOutOfRange);
    CHECK_THROWS_AS(rank_of({0, {0, 6}, {}}, 0, scorer, nullptr), UnknownEntity);
    CHECK(evaluate({}, scorer, filter).ranks.empty());
  }
}

TEST_CASE("report renderings") {
  RankReport r;
  r.ranks = {1, 2, 4};
  r.mrr = mrr(r.ranks);
  r.hits = {{1, 1.0 / 3}, {3, 2.0 / 3}};
  const auto text = format_rank_report_text(r);
  CHECK(text.find("queries: 3") != std::string::npos);
  CHECK(text.find("mrr: 0.583333") != std::string::npos);
  CHECK(text.find("hits@3: 0.666667") != std::string::npos);
  const auto j = nlohmann::json::parse(format_rank_report_json(r, {{"decoder", "hype"}}));
  CHECK(j["queries"] == 3);
  CHECK(j["mrr"].get<double>() == doctest::Approx(r.mrr));
  CHECK(j["hits"]["1"].get<double>() == doctest::Approx(1.0 / 3));
  CHECK(j["config"]["decoder"] == "hype");
}
