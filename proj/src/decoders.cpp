#include "hehr/decoders.hpp"

#include <cmath>

#include "hehr/errors.hpp"

namespace hehr {

namespace {

void check_dims(EmbeddingView relation, std::span<const EmbeddingView> entities) {
  if (entities.empty()) throw DimensionMismatch("tuple has no entities");
  for (const auto& e : entities) {
    if (e.size() != relation.size()) {
      throw DimensionMismatch("entity embedding size " + std::to_string(e.size()) +
                              " differs from relation size " + std::to_string(relation.size()));
    }
  }
}

void check_position(std::size_t position, const HypeDecoderParams& params) {
  if (position >= params.geometry.max_arity) {
    throw PositionOutOfRange("position " + std::to_string(position) + " outside max arity " +
                             std::to_string(params.geometry.max_arity));
  }
}

}  // namespace

std::string to_string(DecoderKind kind) {
  return kind == DecoderKind::hype ? "hype" : "mdistmult";
}

DecoderKind parse_decoder(const std::string& s) {
  if (s == "mdistmult") return DecoderKind::mdistmult;
  if (s == "hype") return DecoderKind::hype;
  throw ConfigError("unknown decoder '" + s + "'");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

Score Score::from_raw(double raw) { return {raw, sigmoid(raw)}; }

std::size_t HypeGeometry::feature_length() const {
  if (width == 0 || stride == 0 || width > dim) return 0;
  return (dim - width) / stride + 1;
}

void HypeGeometry::validate() const {
  if (dim == 0) throw ConfigError("hype: dim must be >= 1");
  if (max_arity == 0) throw ConfigError("hype: max_arity must be >= 1");
  if (num_filters == 0) throw ConfigError("hype: num_filters must be >= 1");
  if (stride == 0) throw ConfigError("hype: stride must be >= 1");
  if (width == 0 || width > dim) throw ConfigError("hype: filter width must be in [1, dim]");
}

HypeDecoderParams HypeDecoderParams::zeros(const HypeGeometry& g) {
  g.validate();
  HypeDecoderParams p;
  p.geometry = g;
  p.filters.assign(g.max_arity, Matrix::Zero(static_cast<Eigen::Index>(g.num_filters),
                                             static_cast<Eigen::Index>(g.width)));
  p.projection = Matrix::Zero(static_cast<Eigen::Index>(g.dim), static_cast<Eigen::Index>(g.feature_size()));
  return p;
}

void HypeDecoderParams::validate() const {
  geometry.validate();
  if (filters.size() != geometry.max_arity) throw DimensionMismatch("hype: one filter bank per position required");
  for (const auto& f : filters) {
    if (static_cast<std::size_t>(f.rows()) != geometry.num_filters ||
        static_cast<std::size_t>(f.cols()) != geometry.width) {
      throw DimensionMismatch("hype: filter bank has wrong shape");
    }
    if (!f.allFinite()) throw NonFiniteValue("hype: non-finite filter");
  }
  if (static_cast<std::size_t>(projection.rows()) != geometry.dim ||
      static_cast<std::size_t>(projection.cols()) != geometry.feature_size()) {
    throw DimensionMismatch("hype: projection has wrong shape");
  }
  if (!projection.allFinite()) throw NonFiniteValue("hype: non-finite projection");
}

Score score_mdistmult(EmbeddingView relation, std::span<const EmbeddingView> entities) {
  check_dims(relation, entities);
  double raw = 0.0;
  for (std::size_t k = 0; k < relation.size(); ++k) {
    double prod = relation[k];
    for (const auto& e : entities) prod *= e[k];
    raw += prod;
  }
  return Score::from_raw(raw);
}

Vector positional_features(EmbeddingView entity, std::size_t position, const HypeDecoderParams& params) {
  check_position(position, params);
  const auto& g = params.geometry;
  if (entity.size() != g.dim) throw DimensionMismatch("hype: entity size differs from decoder dim");
  const auto len = g.feature_length();
  const Matrix& bank = params.filters[position];
  Vector features(static_cast<Eigen::Index>(g.num_filters * len));
  for (std::size_t f = 0; f < g.num_filters; ++f) {
    for (std::size_t j = 0; j < len; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < g.width; ++t) acc += bank(f, t) * entity[j * g.stride + t];
      features(static_cast<Eigen::Index>(f * len + j)) = acc;
    }
  }
  return features;
}

Vector positional_convolve(EmbeddingView entity, std::size_t position, const HypeDecoderParams& params) {
  return params.projection * positional_features(entity, position, params);
}

Score score_hype(EmbeddingView relation, std::span<const EmbeddingView> entities,
                 const HypeDecoderParams& params) {
  check_dims(relation, entities);
  if (relation.size() != params.geometry.dim) throw DimensionMismatch("hype: relation size differs from decoder dim");
  std::vector<Vector> transformed;
  transformed.reserve(entities.size());
  for (std::size_t i = 0; i < entities.size(); ++i) {
    transformed.push_back(positional_convolve(entities[i], i, params));
  }
  double raw = 0.0;
  for (std::size_t k = 0; k < relation.size(); ++k) {
    double prod = relation[k];
    for (const auto& t : transformed) prod *= t(static_cast<Eigen::Index>(k));
    raw += prod;
  }
  return Score::from_raw(raw);
}

void mdistmult_backward(EmbeddingView relation, std::span<const EmbeddingView> entities,
                        double upstream, std::span<double> d_relation,
                        std::span<const std::span<double>> d_entities) {
  const auto n = entities.size();
  for (std::size_t k = 0; k < relation.size(); ++k) {
    double all = 1.0;
    for (const auto& e : entities) all *= e[k];
    d_relation[k] += upstream * all;
    // Product over the other slots, computed directly so zeros are safe.
    for (std::size_t j = 0; j < n; ++j) {
      double others = relation[k];
      for (std::size_t i = 0; i < n; ++i) {
        if (i != j) others *= entities[i][k];
      }
      d_entities[j][k] += upstream * others;
    }
  }
}

void positional_convolve_backward(EmbeddingView entity, std::size_t position,
                                  const HypeDecoderParams& params, const Vector& d_output,
                                  std::span<double> d_entity, HypeDecoderParams& d_params) {
  const auto& g = params.geometry;
  const auto len = g.feature_length();
  const Vector features = positional_features(entity, position, params);
  d_params.projection += d_output * features.transpose();
  const Vector d_features = params.projection.transpose() * d_output;
  const Matrix& bank = params.filters[position];
  Matrix& d_bank = d_params.filters[position];
  for (std::size_t f = 0; f < g.num_filters; ++f) {
    for (std::size_t j = 0; j < len; ++j) {
      const double df = d_features(static_cast<Eigen::Index>(f * len + j));
      for (std::size_t t = 0; t < g.width; ++t) {
        d_bank(f, t) += df * entity[j * g.stride + t];
        d_entity[j * g.stride + t] += df * bank(f, t);
      }
    }
  }
}

void hype_backward(EmbeddingView relation, std::span<const EmbeddingView> entities,
                   const HypeDecoderParams& params, double upstream, std::span<double> d_relation,
                   std::span<const std::span<double>> d_entities, HypeDecoderParams& d_params) {
  const auto n = entities.size();
  std::vector<Vector> transformed;
  std::vector<EmbeddingView> views;
  transformed.reserve(n);
  for (std::size_t i = 0; i < n; ++i) transformed.push_back(positional_convolve(entities[i], i, params));
  for (const auto& t : transformed) views.push_back(vector_view(t));

  std::vector<Vector> d_transformed(n, Vector::Zero(static_cast<Eigen::Index>(relation.size())));
  std::vector<std::span<double>> d_views;
  for (auto& v : d_transformed) d_views.emplace_back(v.data(), static_cast<std::size_t>(v.size()));
  mdistmult_backward(relation, views, upstream, d_relation, d_views);
  for (std::size_t i = 0; i < n; ++i) {
    positional_convolve_backward(entities[i], i, params, d_transformed[i], d_entities[i], d_params);
  }
}

}  // namespace hehr
