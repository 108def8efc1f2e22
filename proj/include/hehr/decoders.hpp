#pragma once

// Tuple scoring functions.
//
// m-DistMult: raw = sum_k r_k * prod_i e_{i,k}
// HypE:       m-DistMult over position-transformed entities, where slot i's
//             entity is convolved with the filters of position i (valid
//             padding, fixed stride), the feature maps are concatenated and a
//             shared projection maps them back to d dimensions.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hehr/linalg.hpp"

namespace hehr {

enum class DecoderKind { mdistmult, hype };

std::string to_string(DecoderKind kind);
DecoderKind parse_decoder(const std::string& s);

struct Score {
  double raw = 0.0;
  double probability = 0.5;

  static Score from_raw(double raw);
};

double sigmoid(double x);

struct HypeGeometry {
  std::size_t dim = 0;
  std::size_t max_arity = 0;
  std::size_t num_filters = 4;
  std::size_t width = 3;
  std::size_t stride = 2;

  // floor((dim - width) / stride) + 1
  std::size_t feature_length() const;
  std::size_t feature_size() const { return num_filters * feature_length(); }
  // Throws ConfigError.
  void validate() const;
};

struct HypeDecoderParams {
  HypeGeometry geometry;
  std::vector<Matrix> filters;  // per position: num_filters x width
  Matrix projection;            // dim x (num_filters * feature_length)

  static HypeDecoderParams zeros(const HypeGeometry& geometry);
  // Throws DimensionMismatch / NonFiniteValue.
  void validate() const;
};

using EmbeddingView = std::span<const double>;

// Throws DimensionMismatch.
Score score_mdistmult(EmbeddingView relation, std::span<const EmbeddingView> entities);

// Throws PositionOutOfRange / DimensionMismatch.
Vector positional_convolve(EmbeddingView entity, std::size_t position, const HypeDecoderParams& params);
// Feature maps before projection, laid out filter-major.
Vector positional_features(EmbeddingView entity, std::size_t position, const HypeDecoderParams& params);

// Throws PositionOutOfRange / DimensionMismatch.
Score score_hype(EmbeddingView relation, std::span<const EmbeddingView> entities,
                 const HypeDecoderParams& params);

// Gradients of raw w.r.t. the inputs, scaled by `upstream` and accumulated
// into the given buffers (each sized like its input).
void mdistmult_backward(EmbeddingView relation, std::span<const EmbeddingView> entities,
                        double upstream, std::span<double> d_relation,
                        std::span<const std::span<double>> d_entities);

void hype_backward(EmbeddingView relation, std::span<const EmbeddingView> entities,
                   const HypeDecoderParams& params, double upstream, std::span<double> d_relation,
                   std::span<const std::span<double>> d_entities, HypeDecoderParams& d_params);

// Gradient pieces for a position-transformed entity: given d(output) of
// positional_convolve, accumulate into d_entity and d_params.
void positional_convolve_backward(EmbeddingView entity, std::size_t position,
                                  const HypeDecoderParams& params, const Vector& d_output,
                                  std::span<double> d_entity, HypeDecoderParams& d_params);

inline EmbeddingView row_view(const Matrix& m, Eigen::Index row) {
  return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::span<double> row_span(Matrix& m, Eigen::Index row) {
  return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline EmbeddingView vector_view(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace hehr
