#include "hehr/encoder.hpp"

#include <cmath>

#include "hehr/errors.hpp"

namespace hehr {

namespace {

constexpr double kBatchNormEps = 1e-5;

Matrix activate_all(Activation act, const Matrix& x) {
  switch (act) {
    case Activation::relu: return x.cwiseMax(0.0);
    case Activation::tanh: return x.array().tanh().matrix();
    case Activation::identity: return x;
  }
  return x;
}

// d_out (.) act'(pre)
Matrix activation_backward(Activation act, const Matrix& pre, const Matrix& d_out) {
  switch (act) {
    case Activation::relu: return (pre.array() > 0.0).cast<double>().cwiseProduct(d_out.array()).matrix();
    case Activation::tanh: {
      const auto t = pre.array().tanh();
      return ((1.0 - t * t) * d_out.array()).matrix();
    }
    case Activation::identity: return d_out;
  }
  return d_out;
}

// out.row(i) = mean of src rows listed in csr row i; rows with no items are
// left at zero and flagged 0 in `has`.
void segment_mean(const Csr& csr, const Matrix& src, Matrix& out, std::vector<char>& has) {
  const auto rows = csr.rows();
  out.setZero(static_cast<Eigen::Index>(rows), src.cols());
  has.assign(rows, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto items = csr.row(i);
    if (items.empty()) continue;
    has[i] = 1;
    auto acc = out.row(static_cast<Eigen::Index>(i));
    for (auto j : items) acc += src.row(j);
    acc /= static_cast<double>(items.size());
  }
}

// Transpose of segment_mean: dsrc.row(j) += dout.row(i) / |row i| for every
// item j of row i.
void segment_mean_backward(const Csr& csr, const Matrix& d_out, Matrix& d_src) {
  for (std::size_t i = 0; i < csr.rows(); ++i) {
    const auto items = csr.row(i);
    if (items.empty()) continue;
    const Eigen::RowVectorXd share = d_out.row(static_cast<Eigen::Index>(i)) / static_cast<double>(items.size());
    for (auto j : items) d_src.row(j) += share;
  }
}

void check_finite(const Matrix& m, std::size_t layer, const char* phase) {
  if (!m.allFinite()) {
    throw NonFiniteValue("non-finite value in layer " + std::to_string(layer) + ", phase " + phase);
  }
}

void batch_norm(const Matrix& x, Matrix& y, Vector& inv_std) {
  const auto n = static_cast<double>(x.rows());
  inv_std.resize(x.cols());
  y.resize(x.rows(), x.cols());
  if (x.rows() == 0) {
    inv_std.setOnes();
    return;
  }
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).sum() / n;
    const double var = (x.col(c).array() - mean).square().sum() / n;
    inv_std(c) = 1.0 / std::sqrt(var + kBatchNormEps);
    y.col(c) = (x.col(c).array() - mean) * inv_std(c);
  }
}

Matrix batch_norm_backward(const Matrix& y, const Vector& inv_std, const Matrix& dy) {
  const auto n = static_cast<double>(y.rows());
  Matrix dx(dy.rows(), dy.cols());
  if (dy.rows() == 0) return dx;
  for (Eigen::Index c = 0; c < dy.cols(); ++c) {
    const double sum_dy = dy.col(c).sum();
    const double sum_dy_y = dy.col(c).dot(y.col(c));
    dx.col(c) = (inv_std(c) / n) * (n * dy.col(c).array() - sum_dy - y.col(c).array() * sum_dy_y);
  }
  return dx;
}

Matrix check_square(const Matrix& m, std::size_t dim, const char* name) {
  if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim) {
    throw DimensionMismatch(std::string("weight ") + name + " is not " + std::to_string(dim) + "x" +
                            std::to_string(dim));
  }
  if (!m.allFinite()) throw NonFiniteValue(std::string("weight ") + name + " has non-finite entries");
  return m;
}

}  // namespace

void EncoderConfig::validate() const {
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
  if (!std::isfinite(inductive_init_value)) throw ConfigError("inductive_init_value must be finite");
}

LayerWeights LayerWeights::zeros(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d),
          Matrix::Zero(d, d)};
}

LayerWeights LayerWeights::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Matrix::Identity(d, d), Matrix::Identity(d, d), Matrix::Identity(d, d),
          Matrix::Identity(d, d), Matrix::Identity(d, d)};
}

void LayerWeights::validate(std::size_t dim) const {
  check_square(pn, dim, "W_PN");
  check_square(qn, dim, "W_QN");
  check_square(r, dim, "W_R");
  check_square(pe, dim, "W_PE");
  check_square(qe, dim, "W_QE");
}

double activate(Activation act, double x) {
  switch (act) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::identity: return x;
  }
  return x;
}

double activate_derivative(Activation act, double x) {
  switch (act) {
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

EmbeddingState init_embeddings(const GraphStore& graph, const EncoderConfig& cfg,
                               const Matrix* learned_entities, const Matrix* learned_relations) {
  const auto d = static_cast<Eigen::Index>(cfg.embedding_dim);
  const auto nv = static_cast<Eigen::Index>(graph.num_entities());
  const auto nr = static_cast<Eigen::Index>(graph.num_relations());
  EmbeddingState s;
  if (cfg.mode == EncoderMode::inductive) {
    if (learned_entities || learned_relations) {
      throw DimensionMismatch("inductive mode takes no learned initial embeddings");
    }
    s.entities = Matrix::Constant(nv, d, cfg.inductive_init_value);
    s.relations = Matrix::Constant(nr, d, cfg.inductive_init_value);
  } else {
    if (!learned_entities || !learned_relations) {
      throw DimensionMismatch("transductive mode needs learned initial embeddings");
    }
    if (learned_entities->rows() != nv || learned_entities->cols() != d) {
      throw DimensionMismatch("entity table is " + std::to_string(learned_entities->rows()) + "x" +
                              std::to_string(learned_entities->cols()) + ", expected " +
                              std::to_string(nv) + "x" + std::to_string(d));
    }
    if (learned_relations->rows() != nr || learned_relations->cols() != d) {
      throw DimensionMismatch("relation table has wrong shape");
    }
    s.entities = *learned_entities;
    s.relations = *learned_relations;
  }
  s.edges = Matrix::Zero(static_cast<Eigen::Index>(graph.num_edges()), d);
  return s;
}

Vector gather_primary(const GraphStore& graph, EdgeIndex e, const EmbeddingState& state) {
  const auto nodes = graph.primary_nodes(e);
  Vector acc = Vector::Zero(state.entities.cols());
  for (auto u : nodes) acc += state.entities.row(u).transpose();
  return acc / static_cast<double>(nodes.size());
}

std::optional<Vector> gather_qualifier(const GraphStore& graph, EdgeIndex e,
                                       const EmbeddingState& state) {
  const auto nodes = graph.qualifier_nodes(e);
  if (nodes.empty()) return std::nullopt;
  Vector acc = Vector::Zero(state.entities.cols());
  for (auto u : nodes) acc += state.entities.row(u).transpose();
  return Vector(acc / static_cast<double>(nodes.size()));
}

Vector apply_hyperedge(const Vector& gathered_primary, const std::optional<Vector>& gathered_qual,
                       const LayerWeights& weights, const EncoderConfig& cfg,
                       const Vector* previous_edge) {
  const auto d = weights.pn.cols();
  if (gathered_primary.size() != d || (gathered_qual && gathered_qual->size() != d)) {
    throw DimensionMismatch("gathered vector does not match weight dimension");
  }
  Vector out = (weights.pn * gathered_primary).unaryExpr([&](double x) { return activate(cfg.activation, x); });
  if (gathered_qual && cfg.use_qualifiers) {
    out += (weights.qn * *gathered_qual).unaryExpr([&](double x) { return activate(cfg.activation, x); });
  }
  if (cfg.self_residual && previous_edge) out += *previous_edge;
  if (!out.allFinite()) throw NonFiniteValue("non-finite hyperedge embedding");
  return out;
}

Vector apply_relation(const GraphStore& graph, RelationId r, const EmbeddingState& state,
                      const LayerWeights& weights, const EncoderConfig& cfg) {
  const Vector previous = state.relations.row(r).transpose();
  Vector input;
  if (cfg.relation_update == RelationUpdate::direct_transform) {
    input = previous;
  } else {
    const auto edges = graph.relation_instances(r);
    if (edges.empty()) return previous;
    input = Vector::Zero(state.edges.cols());
    for (auto e : edges) input += state.edges.row(e).transpose();
    input /= static_cast<double>(edges.size());
  }
  Vector out = (weights.r * input).unaryExpr([&](double x) { return activate(cfg.activation, x); });
  if (cfg.self_residual) out += previous;
  if (!out.allFinite()) throw NonFiniteValue("non-finite relation embedding");
  return out;
}

Vector apply_entity(const GraphStore& graph, EntityId v, const EmbeddingState& state,
                    const LayerWeights& weights, const EncoderConfig& cfg) {
  const auto p_edges = graph.primary_edges(v);
  const auto q_edges = cfg.use_qualifiers ? graph.qualifier_edges(v) : std::span<const EdgeIndex>{};
  const Vector previous = state.entities.row(v).transpose();
  if (p_edges.empty() && q_edges.empty()) return previous;
  const auto act = [&](double x) { return activate(cfg.activation, x); };
  Vector out = Vector::Zero(state.edges.cols());
  if (!p_edges.empty()) {
    Vector mean = Vector::Zero(state.edges.cols());
    for (auto e : p_edges) mean += state.edges.row(e).transpose();
    mean /= static_cast<double>(p_edges.size());
    out += (weights.pe * mean).unaryExpr(act);
  }
  if (!q_edges.empty()) {
    Vector mean = Vector::Zero(state.edges.cols());
    for (auto e : q_edges) mean += state.edges.row(e).transpose();
    mean /= static_cast<double>(q_edges.size());
    out += (weights.qe * mean).unaryExpr(act);
  }
  if (cfg.self_residual) out += previous;
  if (!out.allFinite()) throw NonFiniteValue("non-finite entity embedding");
  return out;
}

EmbeddingState propagate_layer(const GraphStore& graph, const LayerWeights& w,
                               const EmbeddingState& input, const EncoderConfig& cfg,
                               LayerCache* cache) {
  LayerCache local;
  LayerCache& c = cache ? *cache : local;
  c.input = input;
  const auto act = cfg.activation;
  const auto d = input.entities.cols();
  const auto ne = static_cast<Eigen::Index>(graph.num_edges());
  const auto nr = static_cast<Eigen::Index>(graph.num_relations());
  const auto nv = static_cast<Eigen::Index>(graph.num_entities());

  // Gather: nodes -> hyperedges.
  std::vector<char> unused;
  segment_mean(graph.edge_to_primary(), input.entities, c.edge_primary_mean, unused);
  c.edge_primary_pre = c.edge_primary_mean * w.pn.transpose();
  c.edges = activate_all(act, c.edge_primary_pre);
  if (cfg.use_qualifiers) {
    segment_mean(graph.edge_to_qualifier(), input.entities, c.edge_qual_mean, c.edge_has_qual);
    c.edge_qual_pre = c.edge_qual_mean * w.qn.transpose();
    const Matrix q = activate_all(act, c.edge_qual_pre);
    for (Eigen::Index e = 0; e < ne; ++e) {
      if (c.edge_has_qual[e]) c.edges.row(e) += q.row(e);
    }
  } else {
    c.edge_qual_mean.setZero(ne, d);
    c.edge_qual_pre.setZero(ne, d);
    c.edge_has_qual.assign(ne, 0);
  }
  if (cfg.self_residual) c.edges += input.edges;

  EmbeddingState out;
  out.edges = c.edges;

  // Apply on relation types.
  if (cfg.relation_update == RelationUpdate::direct_transform) {
    c.relation_mean = input.relations;
    c.relation_updated.assign(nr, 1);
  } else {
    segment_mean(graph.relation_to_edges(), c.edges, c.relation_mean, c.relation_updated);
  }
  c.relation_pre = c.relation_mean * w.r.transpose();
  {
    const Matrix updated = activate_all(act, c.relation_pre);
    out.relations = input.relations;
    for (Eigen::Index r = 0; r < nr; ++r) {
      if (!c.relation_updated[r]) continue;
      if (cfg.self_residual) {
        out.relations.row(r) += updated.row(r);
      } else {
        out.relations.row(r) = updated.row(r);
      }
    }
  }

  // Scatter: hyperedges -> entities.
  segment_mean(graph.entity_to_primary_edges(), c.edges, c.entity_primary_mean, c.entity_has_primary);
  c.entity_primary_pre = c.entity_primary_mean * w.pe.transpose();
  const Matrix p_term = activate_all(act, c.entity_primary_pre);
  Matrix q_term;
  if (cfg.use_qualifiers) {
    segment_mean(graph.entity_to_qualifier_edges(), c.edges, c.entity_qual_mean, c.entity_has_qual);
    c.entity_qual_pre = c.entity_qual_mean * w.qe.transpose();
    q_term = activate_all(act, c.entity_qual_pre);
  } else {
    c.entity_qual_mean.setZero(nv, d);
    c.entity_qual_pre.setZero(nv, d);
    c.entity_has_qual.assign(nv, 0);
  }
  out.entities = input.entities;
  for (Eigen::Index v = 0; v < nv; ++v) {
    const bool hp = c.entity_has_primary[v], hq = c.entity_has_qual[v];
    if (!hp && !hq) continue;
    auto row = out.entities.row(v);
    if (!cfg.self_residual) row.setZero();
    if (hp) row += p_term.row(v);
    if (hq) row += q_term.row(v);
  }

  if (cfg.batch_norm) {
    batch_norm(out.entities, c.entity_norm, c.entity_inv_std);
    batch_norm(out.relations, c.relation_norm, c.relation_inv_std);
    out.entities = c.entity_norm;
    out.relations = c.relation_norm;
  }
  return out;
}

EncoderOutput forward(const GraphStore& graph, const std::vector<LayerWeights>& params,
                      const EmbeddingState& init, const EncoderConfig& cfg, ForwardTrace* trace) {
  cfg.validate();
  if (params.size() != cfg.num_layers) {
    throw DimensionMismatch("expected " + std::to_string(cfg.num_layers) + " layers of weights, got " +
                            std::to_string(params.size()));
  }
  for (const auto& w : params) w.validate(cfg.embedding_dim);
  if (static_cast<std::size_t>(init.entities.rows()) != graph.num_entities() ||
      static_cast<std::size_t>(init.relations.rows()) != graph.num_relations() ||
      static_cast<std::size_t>(init.edges.rows()) != graph.num_edges()) {
    throw DimensionMismatch("initial state does not match graph cardinalities");
  }
  if (trace) trace->layers.assign(cfg.num_layers, {});
  EmbeddingState state = init;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    LayerCache* cache = trace ? &trace->layers[l] : nullptr;
    state = propagate_layer(graph, params[l], state, cfg, cache);
    check_finite(state.edges, l + 1, "gather");
    check_finite(state.relations, l + 1, "apply-relation");
    check_finite(state.entities, l + 1, "scatter");
  }
  return {std::move(state.entities), std::move(state.relations)};
}

LayerGradients backward_layer(const GraphStore& graph, const LayerWeights& w, const LayerCache& c,
                              const EncoderConfig& cfg, const Matrix& d_entities_out,
                              const Matrix& d_relations_out, const Matrix& d_edges_out) {
  const auto act = cfg.activation;
  const auto d = static_cast<Eigen::Index>(w.dim());
  const auto nv = c.input.entities.rows();
  const auto nr = c.input.relations.rows();

  LayerGradients g;
  g.weights = LayerWeights::zeros(w.dim());
  g.input.entities = Matrix::Zero(nv, d);
  g.input.relations = Matrix::Zero(nr, d);
  g.input.edges = Matrix::Zero(c.input.edges.rows(), d);

  Matrix d_ent = d_entities_out;
  Matrix d_rel = d_relations_out;
  if (cfg.batch_norm) {
    d_ent = batch_norm_backward(c.entity_norm, c.entity_inv_std, d_ent);
    d_rel = batch_norm_backward(c.relation_norm, c.relation_inv_std, d_rel);
  }

  Matrix d_edges = d_edges_out;

  // Scatter phase.
  {
    Matrix d_p_act = Matrix::Zero(nv, d), d_q_act = Matrix::Zero(nv, d);
    for (Eigen::Index v = 0; v < nv; ++v) {
      const bool hp = c.entity_has_primary[v], hq = c.entity_has_qual[v];
      if (!hp && !hq) {
        g.input.entities.row(v) += d_ent.row(v);
        continue;
      }
      if (cfg.self_residual) g.input.entities.row(v) += d_ent.row(v);
      if (hp) d_p_act.row(v) = d_ent.row(v);
      if (hq) d_q_act.row(v) = d_ent.row(v);
    }
    const Matrix d_p_pre = activation_backward(act, c.entity_primary_pre, d_p_act);
    g.weights.pe += d_p_pre.transpose() * c.entity_primary_mean;
    segment_mean_backward(graph.entity_to_primary_edges(), d_p_pre * w.pe, d_edges);
    if (cfg.use_qualifiers) {
      const Matrix d_q_pre = activation_backward(act, c.entity_qual_pre, d_q_act);
      g.weights.qe += d_q_pre.transpose() * c.entity_qual_mean;
      segment_mean_backward(graph.entity_to_qualifier_edges(), d_q_pre * w.qe, d_edges);
    }
  }

  // Relation phase.
  {
    Matrix d_act = Matrix::Zero(nr, d);
    for (Eigen::Index r = 0; r < nr; ++r) {
      if (!c.relation_updated[r]) {
        g.input.relations.row(r) += d_rel.row(r);
        continue;
      }
      if (cfg.self_residual) g.input.relations.row(r) += d_rel.row(r);
      d_act.row(r) = d_rel.row(r);
    }
    const Matrix d_pre = activation_backward(act, c.relation_pre, d_act);
    g.weights.r += d_pre.transpose() * c.relation_mean;
    const Matrix d_mean = d_pre * w.r;
    if (cfg.relation_update == RelationUpdate::direct_transform) {
      g.input.relations += d_mean;
    } else {
      segment_mean_backward(graph.relation_to_edges(), d_mean, d_edges);
    }
  }

  // Gather phase.
  {
    if (cfg.self_residual) g.input.edges += d_edges;
    const Matrix d_p_pre = activation_backward(act, c.edge_primary_pre, d_edges);
    g.weights.pn += d_p_pre.transpose() * c.edge_primary_mean;
    segment_mean_backward(graph.edge_to_primary(), d_p_pre * w.pn, g.input.entities);
    if (cfg.use_qualifiers) {
      Matrix d_q_act = d_edges;
      for (Eigen::Index e = 0; e < d_q_act.rows(); ++e) {
        if (!c.edge_has_qual[e]) d_q_act.row(e).setZero();
      }
      const Matrix d_q_pre = activation_backward(act, c.edge_qual_pre, d_q_act);
      g.weights.qn += d_q_pre.transpose() * c.edge_qual_mean;
      segment_mean_backward(graph.edge_to_qualifier(), d_q_pre * w.qn, g.input.entities);
    }
  }
  return g;
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace hehr
