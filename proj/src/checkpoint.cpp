#include "hehr/checkpoint.hpp"

#include <fstream>
#include <random>

#include "binary_io.hpp"
#include "hehr/errors.hpp"
#include "hehr/run_config.hpp"

namespace hehr {

namespace {

constexpr std::uint16_t kCheckpointVersion = 1;
constexpr char kMagic[] = "HEHRCKPT";

void put_matrix_values(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) binio::put_f64(out, m.data()[i]);
}

void get_matrix_values(std::istream& in, Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = binio::get_f64(in);
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelState& state,
                     const std::map<std::string, std::string>& config, const VocabMaps& vocab) {
  out.write(kMagic, 8);
  binio::put_uint<std::uint16_t>(out, kCheckpointVersion);
  auto echo = config;
  for (const auto& [k, v] : model_config_to_map(state.config)) echo[k] = v;
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(echo.size()));
  for (const auto& [k, v] : echo) {
    binio::put_string(out, k);
    binio::put_string(out, v);
  }
  binio::put_uint<std::uint64_t>(out, vocab.hash());
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(vocab.num_entities()));
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(vocab.num_relations()));
  binio::put_uint<std::uint64_t>(out, state.step);

  const auto params = state.params.tensors();
  const auto ms = state.adam_m.tensors();
  const auto vs = state.adam_v.tensors();
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& p = *params[i].second;
    binio::put_string(out, params[i].first);
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(p.rows()));
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(p.cols()));
    put_matrix_values(out, p);
    put_matrix_values(out, *ms[i].second);
    put_matrix_values(out, *vs[i].second);
  }
  if (!out) throw IoFailure("checkpoint write failed");
}

void save_checkpoint(const std::string& path, const ModelState& state,
                     const std::map<std::string, std::string>& config, const VocabMaps& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot create checkpoint '" + path + "'");
  save_checkpoint(out, state, config, vocab);
}

Checkpoint load_checkpoint(std::istream& in) {
  binio::expect_magic(in, kMagic);
  const auto version = binio::get_uint<std::uint16_t>(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto entries = binio::get_uint<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < entries; ++i) {
    auto k = binio::get_string(in);
    ck.config[k] = binio::get_string(in);
  }
  ck.vocab_hash = binio::get_uint<std::uint64_t>(in);
  ck.num_entities = binio::get_uint<std::uint32_t>(in);
  ck.num_relations = binio::get_uint<std::uint32_t>(in);
  const auto step = binio::get_uint<std::uint64_t>(in);

  ModelConfig cfg;
  try {
    cfg = model_config_from_map(ck.config);
    cfg.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint holds an invalid model config: ") + e.what());
  }
  // Expected layout; the seed is irrelevant, values are overwritten.
  std::mt19937_64 rng(0);
  ModelParams params = init_params(cfg, ck.num_entities, ck.num_relations, rng).zeros_like();
  ModelState state = make_state(cfg, std::move(params));
  state.step = step;

  auto ps = state.params.tensors();
  auto ms = state.adam_m.tensors();
  auto vs = state.adam_v.tensors();
  const auto count = binio::get_uint<std::uint32_t>(in);
  if (count != ps.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " tensors, model config implies " +
                      std::to_string(ps.size()));
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto name = binio::get_string(in);
    const auto rows = binio::get_uint<std::uint32_t>(in);
    const auto cols = binio::get_uint<std::uint32_t>(in);
    Matrix& p = *ps[i].second;
    if (name != ps[i].first || rows != p.rows() || cols != p.cols()) {
      throw FormatError("tensor '" + name + "' (" + std::to_string(rows) + "x" + std::to_string(cols) +
                        ") does not match expected '" + ps[i].first + "' (" + std::to_string(p.rows()) +
                        "x" + std::to_string(p.cols()) + ")");
    }
    get_matrix_values(in, p);
    get_matrix_values(in, *ms[i].second);
    get_matrix_values(in, *vs[i].second);
  }
  ck.state = std::move(state);
  return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

void verify_vocab(const Checkpoint& ckpt, const VocabMaps& vocab) {
  if (ckpt.state.config.mode == ModelMode::inductive) return;
  if (ckpt.vocab_hash != vocab.hash()) {
    throw FormatError("vocabulary does not match the checkpoint (hash mismatch)");
  }
}

}  // namespace hehr
