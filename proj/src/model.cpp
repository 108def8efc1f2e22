#include "hehr/model.hpp"

#include <cmath>

#include "hehr/errors.hpp"

namespace hehr {

namespace {

Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::size_t fan_in, std::size_t fan_out,
              std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

template <typename Params, typename Out>
void collect(Params& p, Out& out) {
  if (p.entity_table.size() > 0 || p.relation_table.size() > 0) {
    out.emplace_back("entity_table", &p.entity_table);
    out.emplace_back("relation_table", &p.relation_table);
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto prefix = "layer" + std::to_string(l) + ".";
    auto& w = p.layers[l];
    out.emplace_back(prefix + "W_PN", &w.pn);
    out.emplace_back(prefix + "W_QN", &w.qn);
    out.emplace_back(prefix + "W_R", &w.r);
    out.emplace_back(prefix + "W_PE", &w.pe);
    out.emplace_back(prefix + "W_QE", &w.qe);
  }
  for (std::size_t i = 0; i < p.hype.filters.size(); ++i) {
    out.emplace_back("hype.filters" + std::to_string(i), &p.hype.filters[i]);
  }
  if (!p.hype.filters.empty()) out.emplace_back("hype.projection", &p.hype.projection);
}

// Numerically stable -[y log s(x) + (1-y) log(1-s(x))].
double bce_term(double raw, double label) {
  return std::max(raw, 0.0) - raw * label + std::log1p(std::exp(-std::abs(raw)));
}

}  // namespace

std::string to_string(ModelMode mode) {
  switch (mode) {
    case ModelMode::inductive: return "inductive";
    case ModelMode::transductive: return "transductive";
    case ModelMode::shallow: return "shallow";
  }
  return "?";
}

ModelMode parse_mode(const std::string& s) {
  if (s == "inductive") return ModelMode::inductive;
  if (s == "transductive") return ModelMode::transductive;
  if (s == "shallow") return ModelMode::shallow;
  throw ConfigError("unknown mode '" + s + "'");
}

EncoderConfig ModelConfig::encoder_config() const {
  EncoderConfig e = encoder;
  e.mode = mode == ModelMode::inductive ? EncoderMode::inductive : EncoderMode::transductive;
  return e;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (decoder == DecoderKind::hype) {
    HypeGeometry g = hype;
    g.dim = dim();
    if (g.max_arity == 0) g.max_arity = 1;
    g.validate();
  }
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  collect(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  collect(*this, out);
  return out;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (auto& [name, m] : z.tensors()) m->setZero();
  return z;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

ModelParams init_params(const ModelConfig& cfg, std::size_t num_entities, std::size_t num_relations,
                        std::mt19937_64& rng) {
  cfg.validate();
  const auto d = static_cast<Eigen::Index>(cfg.dim());
  const auto dim = cfg.dim();
  ModelParams p;
  if (cfg.uses_tables()) {
    p.entity_table = uniform(static_cast<Eigen::Index>(num_entities), d, 0.1, rng);
    p.relation_table = uniform(static_cast<Eigen::Index>(num_relations), d, 0.1, rng);
  }
  if (cfg.uses_encoder()) {
    for (std::size_t l = 0; l < cfg.encoder.num_layers; ++l) {
      LayerWeights w;
      w.pn = glorot(d, d, dim, dim, rng);
      w.qn = glorot(d, d, dim, dim, rng);
      w.r = glorot(d, d, dim, dim, rng);
      w.pe = glorot(d, d, dim, dim, rng);
      w.qe = glorot(d, d, dim, dim, rng);
      p.layers.push_back(std::move(w));
    }
  }
  if (cfg.decoder == DecoderKind::hype) {
    HypeGeometry g = cfg.hype;
    g.dim = dim;
    p.hype = HypeDecoderParams::zeros(g);
    for (auto& bank : p.hype.filters) {
      bank = glorot(bank.rows(), bank.cols(), g.width, g.num_filters, rng);
    }
    p.hype.projection = glorot(p.hype.projection.rows(), p.hype.projection.cols(),
                               g.feature_size(), dim, rng);
  }
  return p;
}

void check_params(const ModelConfig& cfg, const ModelParams& params, const GraphStore& graph) {
  const auto d = static_cast<Eigen::Index>(cfg.dim());
  if (cfg.uses_tables()) {
    if (params.entity_table.rows() != static_cast<Eigen::Index>(graph.num_entities()) ||
        params.entity_table.cols() != d) {
      throw DimensionMismatch("entity table shape does not match graph (" +
                              std::to_string(params.entity_table.rows()) + " rows, graph has " +
                              std::to_string(graph.num_entities()) + " entities)");
    }
    if (params.relation_table.rows() != static_cast<Eigen::Index>(graph.num_relations()) ||
        params.relation_table.cols() != d) {
      throw DimensionMismatch("relation table shape does not match graph");
    }
  }
  if (cfg.uses_encoder()) {
    if (params.layers.size() != cfg.encoder.num_layers) throw DimensionMismatch("wrong number of layers");
    for (const auto& w : params.layers) w.validate(cfg.dim());
  }
  if (cfg.decoder == DecoderKind::hype) {
    params.hype.validate();
    if (params.hype.geometry.dim != cfg.dim()) throw DimensionMismatch("hype dim differs from embedding dim");
  }
}

Embeddings embed(const ModelConfig& cfg, const ModelParams& params, const GraphStore& graph,
                 ForwardTrace* trace) {
  check_params(cfg, params, graph);
  if (!cfg.uses_encoder()) return {params.entity_table, params.relation_table};
  const auto enc = cfg.encoder_config();
  const auto init = cfg.uses_tables()
                        ? init_embeddings(graph, enc, &params.entity_table, &params.relation_table)
                        : init_embeddings(graph, enc);
  auto out = forward(graph, params.layers, init, enc, trace);
  return {std::move(out.entities), std::move(out.relations)};
}

double batch_loss(const ModelConfig& cfg, const ModelParams& params, const GraphStore& graph,
                  const std::vector<LabeledTuple>& batch, ModelParams* grad) {
  if (batch.empty()) throw EmptyInput("empty batch");
  ForwardTrace trace;
  const Embeddings emb = embed(cfg, params, graph, grad ? &trace : nullptr);
  const auto d = emb.entities.cols();
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  Matrix d_ent, d_rel;
  if (grad) {
    *grad = params.zeros_like();
    d_ent = Matrix::Zero(emb.entities.rows(), d);
    d_rel = Matrix::Zero(emb.relations.rows(), d);
  }

  double total = 0.0;
  std::vector<EmbeddingView> views;
  std::vector<std::span<double>> d_views;
  for (const auto& s : batch) {
    if (s.relation >= emb.relations.rows()) throw IndexOutOfRange("relation id out of range");
    views.clear();
    for (auto e : s.entities) {
      if (e >= emb.entities.rows()) throw IndexOutOfRange("entity id out of range");
      views.push_back(row_view(emb.entities, e));
    }
    const auto rel = row_view(emb.relations, s.relation);
    const Score score = cfg.decoder == DecoderKind::hype ? score_hype(rel, views, params.hype)
                                                         : score_mdistmult(rel, views);
    total += bce_term(score.raw, s.label);
    if (!grad) continue;
    const double upstream = (score.probability - s.label) * inv_n;
    // Slots may repeat an entity, so accumulate per slot into scratch rows.
    Matrix scratch = Matrix::Zero(static_cast<Eigen::Index>(s.entities.size()), d);
    d_views.clear();
    for (Eigen::Index i = 0; i < scratch.rows(); ++i) d_views.push_back(row_span(scratch, i));
    auto d_rel_row = row_span(d_rel, s.relation);
    if (cfg.decoder == DecoderKind::hype) {
      hype_backward(rel, views, params.hype, upstream, d_rel_row, d_views, grad->hype);
    } else {
      mdistmult_backward(rel, views, upstream, d_rel_row, d_views);
    }
    for (std::size_t i = 0; i < s.entities.size(); ++i) {
      d_ent.row(s.entities[i]) += scratch.row(static_cast<Eigen::Index>(i));
    }
  }
  const double loss = total * inv_n;
  if (!std::isfinite(loss)) throw NonFiniteValue("non-finite loss");
  if (!grad) return loss;

  if (cfg.uses_encoder()) {
    const auto enc = cfg.encoder_config();
    Matrix d_edges = Matrix::Zero(static_cast<Eigen::Index>(graph.num_edges()), d);
    for (std::size_t l = cfg.encoder.num_layers; l-- > 0;) {
      auto g = backward_layer(graph, params.layers[l], trace.layers[l], enc, d_ent, d_rel, d_edges);
      grad->layers[l] = std::move(g.weights);
      d_ent = std::move(g.input.entities);
      d_rel = std::move(g.input.relations);
      d_edges = std::move(g.input.edges);
    }
  }
  if (cfg.uses_tables()) {
    grad->entity_table = std::move(d_ent);
    grad->relation_table = std::move(d_rel);
  }
  for (const auto& [name, m] : grad->tensors()) {
    if (!m->allFinite()) throw NonFiniteGradient("non-finite gradient in " + name);
  }
  return loss;
}

TupleScorer::TupleScorer(const ModelConfig& cfg, const ModelParams& params, Embeddings embeddings)
    : decoder_(cfg.decoder), emb_(std::move(embeddings)) {
  if (decoder_ != DecoderKind::hype) return;
  const auto& hp = params.hype;
  const auto nv = emb_.entities.rows();
  transformed_.reserve(hp.geometry.max_arity);
  for (std::size_t p = 0; p < hp.geometry.max_arity; ++p) {
    Matrix t(nv, emb_.entities.cols());
    for (Eigen::Index v = 0; v < nv; ++v) {
      t.row(v) = positional_convolve(row_view(emb_.entities, v), p, hp).transpose();
    }
    transformed_.push_back(std::move(t));
  }
}

const Matrix& TupleScorer::positioned(std::size_t position) const {
  if (decoder_ != DecoderKind::hype) return emb_.entities;
  if (position >= transformed_.size()) {
    throw PositionOutOfRange("position " + std::to_string(position) + " outside decoder max arity");
  }
  return transformed_[position];
}

double TupleScorer::raw(const TupleRef& tuple) const {
  if (tuple.entities.empty()) throw DimensionMismatch("tuple has no entities");
  Eigen::RowVectorXd prod = emb_.relations.row(tuple.relation);
  for (std::size_t i = 0; i < tuple.entities.size(); ++i) {
    prod.array() *= positioned(i).row(tuple.entities[i]).array();
  }
  return prod.sum();
}

void TupleScorer::candidate_scores(const TupleRef& tuple, std::size_t position,
                                   std::vector<double>& out) const {
  if (position >= tuple.entities.size()) throw PositionOutOfRange("position outside tuple arity");
  Eigen::RowVectorXd partial = emb_.relations.row(tuple.relation);
  for (std::size_t i = 0; i < tuple.entities.size(); ++i) {
    if (i == position) continue;
    partial.array() *= positioned(i).row(tuple.entities[i]).array();
  }
  const Matrix& table = positioned(position);
  out.resize(static_cast<std::size_t>(table.rows()));
  Eigen::Map<Vector>(out.data(), table.rows()) = table * partial.transpose();
}

}  // namespace hehr
