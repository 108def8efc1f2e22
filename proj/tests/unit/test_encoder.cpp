#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hehr/encoder.hpp"
#include "hehr/errors.hpp"
#include "hehr/graph_store.hpp"
#include "test_support.hpp"

using namespace hehr;
using namespace hehr::testing;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

EncoderConfig config(std::size_t d, Activation act, std::size_t layers = 1) {
  EncoderConfig cfg;
  cfg.embedding_dim = d;
  cfg.num_layers = layers;
  cfg.activation = act;
  return cfg;
}

EmbeddingState random_state(const GraphStore& g, std::size_t d, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(d);
  return {random_matrix(static_cast<Eigen::Index>(g.num_entities()), n, rng),
          random_matrix(static_cast<Eigen::Index>(g.num_relations()), n, rng),
          Matrix::Zero(static_cast<Eigen::Index>(g.num_edges()), n)};
}

// Relabels entities, relations and edges of `g` and its state.
struct Relabeled {
  GraphStore graph;
  EmbeddingState state;
  std::vector<EntityId> vperm;
  std::vector<RelationId> rperm;
  std::vector<EdgeIndex> eperm;
};

Relabeled relabel(const GraphStore& g, const EmbeddingState& s, std::mt19937_64& rng) {
  Relabeled out{g, s, {}, {}, {}};
  out.vperm.resize(g.num_entities());
  out.rperm.resize(g.num_relations());
  out.eperm.resize(g.num_edges());
  std::iota(out.vperm.begin(), out.vperm.end(), 0);
  std::iota(out.rperm.begin(), out.rperm.end(), 0);
  std::iota(out.eperm.begin(), out.eperm.end(), 0);
  std::shuffle(out.vperm.begin(), out.vperm.end(), rng);
  std::shuffle(out.rperm.begin(), out.rperm.end(), rng);
  std::shuffle(out.eperm.begin(), out.eperm.end(), rng);

  std::vector<IdFact> facts(g.num_edges());
  for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
    IdFact f;
    f.relation = out.rperm[g.edge_relation()[e]];
    for (auto v : g.primary_nodes(e)) f.primary.push_back(out.vperm[v]);
    const auto qn = g.qualifier_nodes(e);
    const auto qr = g.qualifier_relations(e);
    for (std::size_t i = 0; i < qn.size(); ++i) f.qualifiers.emplace_back(out.rperm[qr[i]], out.vperm[qn[i]]);
    facts[out.eperm[e]] = std::move(f);
  }
  out.graph = build_graph(facts, g.num_entities(), g.num_relations());
  for (std::size_t v = 0; v < out.vperm.size(); ++v) out.state.entities.row(out.vperm[v]) = s.entities.row(v);
  for (std::size_t r = 0; r < out.rperm.size(); ++r) out.state.relations.row(out.rperm[r]) = s.relations.row(r);
  return out;
}

}  // namespace

TEST_CASE("hyperedge update with identity weights") {
  const auto w = LayerWeights::identity(2);
  const auto cfg = config(2, Activation::relu);
  const Vector h = apply_hyperedge(vec({2, 1}), vec({4, 2}), w, cfg);
  CHECK(h(0) == doctest::Approx(6.0));
  CHECK(h(1) == doctest::Approx(3.0));
  const Vector no_qual = apply_hyperedge(vec({2, 1}), std::nullopt, w, cfg);
  CHECK(no_qual(0) == doctest::Approx(2.0));
  const Vector clamped = apply_hyperedge(vec({-1, 3}), std::nullopt, w, cfg);
  CHECK(clamped(0) == 0.0);
  CHECK(clamped(1) == doctest::Approx(3.0));
}

TEST_CASE("relation and entity updates on a small graph") {
  // Two edges of relation 0, entity 0 in both as a primary node, entity 3 a
  // qualifier of edge 0, entity 4 isolated.
  const std::vector<IdFact> facts = {{0, {0, 1}, {{1, 3}}}, {0, {0, 2}, {}}};
  const auto g = build_graph(facts, 5, 2);
  const auto w = LayerWeights::identity(2);
  const auto cfg = config(2, Activation::relu);
  EmbeddingState s{Matrix::Zero(5, 2), Matrix::Zero(2, 2), Matrix(2, 2)};
  s.edges << 2, 0, 4, 2;
  s.entities.row(4) << -7, 9;
  s.relations.row(1) << 5, 5;

  const Vector r0 = apply_relation(g, 0, s, w, cfg);
  CHECK(r0(0) == doctest::Approx(3.0));
  CHECK(r0(1) == doctest::Approx(1.0));
  // No instances: unchanged.
  CHECK(apply_relation(g, 1, s, w, cfg) == s.relations.row(1).transpose());

  // Entity 0: primary mean (3, 1). Entity 3: qualifier mean (2, 0).
  const Vector v0 = apply_entity(g, 0, s, w, cfg);
  CHECK(v0(0) == doctest::Approx(3.0));
  CHECK(v0(1) == doctest::Approx(1.0));
  const Vector v3 = apply_entity(g, 3, s, w, cfg);
  CHECK(v3(0) == doctest::Approx(2.0));
  CHECK(v3(1) == doctest::Approx(0.0));
  CHECK(apply_entity(g, 4, s, w, cfg) == s.entities.row(4).transpose());
}

TEST_CASE("entity in both a primary and a qualifier role sums both terms") {
  const std::vector<IdFact> facts = {{0, {0, 1}, {}}, {0, {2, 1}, {{0, 0}}}};
  const auto g = build_graph(facts, 3, 1);
  const auto w = LayerWeights::identity(2);
  EmbeddingState s{Matrix::Zero(3, 2), Matrix::Zero(1, 2), Matrix(2, 2)};
  s.edges << 2, 0, 4, 2;
  // Entity 0: primary of edge 0 -> (2, 0); qualifier of edge 1 -> (4, 2).
  const Vector v0 = apply_entity(g, 0, s, w, config(2, Activation::identity));
  CHECK(v0(0) == doctest::Approx(6.0));
  CHECK(v0(1) == doctest::Approx(2.0));
}

TEST_CASE("inductive and transductive initialization") {
  const std::vector<IdFact> facts = {{0, {0, 1}, {}}};
  const auto g = build_graph(facts, 3, 2);
  auto cfg = config(4, Activation::relu);
  cfg.mode = EncoderMode::inductive;
  const auto s = init_embeddings(g, cfg);
  CHECK(s.entities.rows() == 3);
  CHECK(s.relations.rows() == 2);
  CHECK((s.entities.array() == 0.5).all());
  CHECK((s.relations.array() == 0.5).all());
  CHECK(s.edges.isZero());
  const Matrix table = Matrix::Ones(3, 4);
  CHECK_THROWS(init_embeddings(g, cfg, &table, nullptr));

  cfg.mode = EncoderMode::transductive;
  CHECK_THROWS(init_embeddings(g, cfg));
  const Matrix rel = Matrix::Constant(2, 4, 2.0);
  const auto t = init_embeddings(g, cfg, &table, &rel);
  CHECK(t.entities == table);
  CHECK(t.relations == rel);
}

TEST_CASE("zero weights with relu give zero for every connected item") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(rng);
    const auto s = random_state(g, 3, rng);
    const auto cfg = config(3, Activation::relu);
    const auto out = propagate_layer(g, LayerWeights::zeros(3), s, cfg);
    CHECK(out.edges.isZero());
    for (EntityId v = 0; v < g.num_entities(); ++v) {
      const bool connected = !g.primary_edges(v).empty() || !g.qualifier_edges(v).empty();
      if (connected) {
        CHECK(out.entities.row(v).isZero());
      } else {
        CHECK(out.entities.row(v) == s.entities.row(v));
      }
    }
    for (RelationId r = 0; r < g.num_relations(); ++r) {
      if (!g.relation_instances(r).empty()) CHECK(out.relations.row(r).isZero());
    }
  }
}

TEST_CASE("per-item views agree with the whole-graph layer") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = random_graph(rng);
    auto s = random_state(g, 4, rng);
    const auto w = random_layer(4, rng);
    const auto cfg = config(4, trial % 2 ? Activation::tanh : Activation::relu);
    const auto out = propagate_layer(g, w, s, cfg);
    for (EdgeIndex e = 0; e < g.num_edges(); ++e) {
      const Vector h = apply_hyperedge(gather_primary(g, e, s), gather_qualifier(g, e, s), w, cfg);
      CHECK(max_relative_error(h.transpose(), out.edges.row(e)) < 1e-12);
    }
    s.edges = out.edges;
    for (RelationId r = 0; r < g.num_relations(); ++r) {
      CHECK(max_relative_error(apply_relation(g, r, s, w, cfg).transpose(), out.relations.row(r)) < 1e-12);
    }
    for (EntityId v = 0; v < g.num_entities(); ++v) {
      CHECK(max_relative_error(apply_entity(g, v, s, w, cfg).transpose(), out.entities.row(v)) < 1e-12);
    }
  }
}

TEST_CASE("two layers equal two single-layer passes") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(rng);
    const auto s = random_state(g, 3, rng);
    const std::vector<LayerWeights> w = {random_layer(3, rng), random_layer(3, rng)};
    const auto cfg2 = config(3, Activation::tanh, 2);
    const auto cfg1 = config(3, Activation::tanh, 1);
    const auto both = forward(g, w, s, cfg2);
    const auto mid = propagate_layer(g, w[0], s, cfg1);
    const auto last = propagate_layer(g, w[1], mid, cfg1);
    CHECK(max_relative_error(both.entities, last.entities) < 1e-12);
    CHECK(max_relative_error(both.relations, last.relations) < 1e-12);
  }
}

TEST_CASE("forward matches the dense oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = random_graph(rng);
    const auto s = random_state(g, 3, rng);
    const auto w = random_layer(3, rng);
    auto cfg = config(3, trial % 2 ? Activation::tanh : Activation::relu);
    cfg.self_residual = trial % 3 == 0;
    cfg.use_qualifiers = trial % 4 != 1;
    const auto out = propagate_layer(g, w, s, cfg);
    const auto ref = DenseOracle(g).layer(w, s, cfg);
    CHECK(max_relative_error(out.entities, ref.entities, 1e-9) < 1e-9);
    CHECK(max_relative_error(out.relations, ref.relations, 1e-9) < 1e-9);
    CHECK(max_relative_error(out.edges, ref.edges, 1e-9) < 1e-9);
  }
}

TEST_CASE("relabeling commutes with propagation") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = random_graph(rng);
    const auto s = random_state(g, 3, rng);
    const std::vector<LayerWeights> w = {random_layer(3, rng), random_layer(3, rng)};
    const auto cfg = config(3, Activation::tanh, 2);
    const auto out = forward(g, w, s, cfg);
    const auto p = relabel(g, s, rng);
    const auto pout = forward(p.graph, w, p.state, cfg);
    for (std::size_t v = 0; v < p.vperm.size(); ++v) {
      CHECK(max_relative_error(out.entities.row(v), pout.entities.row(p.vperm[v]), 1e-9) < 1e-9);
    }
    for (std::size_t r = 0; r < p.rperm.size(); ++r) {
      CHECK(max_relative_error(out.relations.row(r), pout.relations.row(p.rperm[r]), 1e-9) < 1e-9);
    }
  }
}

TEST_CASE("primary node order inside an edge does not change embeddings") {
  const std::vector<IdFact> a = {{0, {0, 1, 2}, {{1, 3}}}, {1, {2, 3}, {}}};
  const std::vector<IdFact> b = {{0, {2, 0, 1}, {{1, 3}}}, {1, {3, 2}, {}}};
  std::mt19937_64 rng(7);
  const auto ga = build_graph(a, 4, 2);
  const auto gb = build_graph(b, 4, 2);
  const auto s = random_state(ga, 3, rng);
  const std::vector<LayerWeights> w = {random_layer(3, rng), random_layer(3, rng)};
  const auto cfg = config(3, Activation::tanh, 2);
  const auto oa = forward(ga, w, s, cfg);
  const auto ob = forward(gb, w, s, cfg);
  CHECK(max_relative_error(oa.entities, ob.entities) < 1e-12);
  CHECK(max_relative_error(oa.relations, ob.relations) < 1e-12);
}

TEST_CASE("forward rejects bad inputs") {
  const std::vector<IdFact> facts = {{0, {0, 1}, {}}};
  const auto g = build_graph(facts, 2, 1);
  auto s = EmbeddingState{Matrix::Ones(2, 2), Matrix::Ones(1, 2), Matrix::Zero(1, 2)};
  const auto cfg = config(2, Activation::relu, 2);
  CHECK_THROWS_AS(forward(g, {LayerWeights::identity(2)}, s, cfg), DimensionMismatch);
  auto w = LayerWeights::identity(2);
  w.pn(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward(g, {w, w}, s, cfg), NonFiniteValue);
  s.entities(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(forward(g, {LayerWeights::identity(2), LayerWeights::identity(2)}, s, cfg), NonFiniteValue);
}

TEST_CASE("activation helpers") {
  CHECK(activate(Activation::relu, -2.0) == 0.0);
  CHECK(activate(Activation::relu, 2.0) == 2.0);
  CHECK(activate(Activation::tanh, 0.3) == doctest::Approx(std::tanh(0.3)));
  CHECK(activate(Activation::identity, -4.0) == -4.0);
  CHECK(activate_derivative(Activation::tanh, 0.3) == doctest::Approx(1.0 - std::tanh(0.3) * std::tanh(0.3)));
  CHECK(activate_derivative(Activation::relu, -1.0) == 0.0);
  CHECK(parse_activation(to_string(Activation::tanh)) == Activation::tanh);
  CHECK_THROWS_AS(parse_activation("sigmoid"), ConfigError);
}
