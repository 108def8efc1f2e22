#include <doctest.h>

#include <sstream>

#include "hehr/checkpoint.hpp"
#include "hehr/errors.hpp"
#include "hehr/run_config.hpp"
#include "test_support.hpp"

using namespace hehr;
using namespace hehr::testing;

namespace {

ModelConfig model(ModelMode mode) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.encoder.embedding_dim = 6;
  cfg.encoder.num_layers = 2;
  cfg.hype = HypeGeometry{6, 0, 2, 3, 2};
  return cfg;
}

TrainResult trained(ModelMode mode, const TrainingData& data) {
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 16;
  t.negative_ratio = 1;
  return train(data, model(mode), t);
}

std::string saved(const ModelState& s, const ConfigMap& echo, const VocabMaps& vocab) {
  std::ostringstream out;
  save_checkpoint(out, s, echo, vocab);
  return out.str();
}

}  // namespace

TEST_CASE("checkpoint round trip restores every tensor and the optimizer") {
  const auto data = prepare_training_data(memorization_dataset());
  for (auto mode : {ModelMode::transductive, ModelMode::inductive, ModelMode::shallow}) {
    const auto r = trained(mode, data);
    auto echo = model_config_to_map(r.state.config);
    echo["train"] = "facts.hehr";
    const auto bytes = saved(r.state, echo, data.vocab);
    CHECK(bytes.substr(0, 8) == "HEHRCKPT");
    std::istringstream in(bytes);
    const auto ck = load_checkpoint(in);
    CHECK(ck.config == echo);
    CHECK(ck.vocab_hash == data.vocab.hash());
    CHECK(ck.num_entities == data.vocab.num_entities());
    CHECK(ck.state.step == r.state.step);
    const auto a = r.state.params.tensors();
    const auto b = ck.state.params.tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].first == b[i].first);
      CHECK(*a[i].second == *b[i].second);
    }
    const auto m0 = r.state.adam_v.tensors();
    const auto m1 = ck.state.adam_v.tensors();
    for (std::size_t i = 0; i < m0.size(); ++i) CHECK(*m0[i].second == *m1[i].second);
    CHECK(saved(ck.state, ck.config, data.vocab) == bytes);
  }
}

TEST_CASE("checkpoint rejects damaged or inconsistent input") {
  const auto data = prepare_training_data(memorization_dataset());
  const auto r = trained(ModelMode::transductive, data);
  const auto echo = model_config_to_map(r.state.config);
  const auto bytes = saved(r.state, echo, data.vocab);

  std::istringstream bad_magic("HEHRCKPX" + bytes.substr(8));
  CHECK_THROWS_AS(load_checkpoint(bad_magic), FormatError);
  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(truncated), FormatError);

  // Stored config disagreeing with the stored tensors.
  auto wrong_dim = r.state;
  wrong_dim.config.encoder.embedding_dim = 7;
  wrong_dim.config.hype.dim = 7;
  std::istringstream shape(saved(wrong_dim, echo, data.vocab));
  CHECK_THROWS_AS(load_checkpoint(shape), FormatError);

  auto wrong_layers = r.state;
  wrong_layers.config.encoder.num_layers = 1;
  std::istringstream count(saved(wrong_layers, echo, data.vocab));
  CHECK_THROWS_AS(load_checkpoint(count), FormatError);

  CHECK_THROWS_AS(load_checkpoint(std::string("/nonexistent/model.ckpt")), IoFailure);
}

TEST_CASE("vocabulary verification") {
  const auto data = prepare_training_data(memorization_dataset());
  VocabMaps other = data.vocab;
  other.add_entity("newcomer");
  for (auto mode : {ModelMode::transductive, ModelMode::inductive}) {
    const auto r = trained(mode, data);
    std::istringstream in(saved(r.state, model_config_to_map(r.state.config), data.vocab));
    const auto ck = load_checkpoint(in);
    CHECK_NOTHROW(verify_vocab(ck, data.vocab));
    if (mode == ModelMode::inductive) {
      CHECK_NOTHROW(verify_vocab(ck, other));
    } else {
      CHECK_THROWS_AS(verify_vocab(ck, other), FormatError);
    }
  }
}

TEST_CASE("run config parsing") {
  const auto values = parse_config_text(
      "# comment\n"
      "train = data/train.hehr\n"
      "\n"
      "embedding_dim = 32\n"
      "decoder = mdistmult\n"
      "relation_update = direct_transform\n"
      "learning_rate = 0.005\n"
      "ties = optimistic\n");
  const auto rc = make_run_config(values);
  CHECK(rc.train_path == "data/train.hehr");
  CHECK(rc.model.dim() == 32);
  CHECK(rc.model.decoder == DecoderKind::mdistmult);
  CHECK(rc.model.encoder.relation_update == RelationUpdate::direct_transform);
  CHECK(rc.train.learning_rate == 0.005);
  CHECK(rc.rank.ties == TieBreak::optimistic);

  const auto round = make_run_config(rc.to_map());
  CHECK(round.to_map() == rc.to_map());
  CHECK(model_config_from_map(model_config_to_map(rc.model)).dim() == 32);

  CHECK_THROWS_AS(parse_config_text("a = 1\nnot a pair\n"), ConfigError);
  CHECK_THROWS_AS(make_run_config({{"embeding_dim", "3"}}), ConfigError);
  CHECK_THROWS_AS(make_run_config({{"epochs", "ten"}}), ConfigError);
  CHECK_THROWS_AS(make_run_config({{"batch_norm", "maybe"}}), ConfigError);
  CHECK_THROWS_AS(make_run_config({{"mode", "hybrid"}}), ConfigError);
  CHECK_THROWS_AS(read_config_file("/nonexistent/run.conf"), IoFailure);

  RunConfig missing;
  CHECK_THROWS_AS(missing.validate(), ConfigError);
  missing.train_path = "/nonexistent/train.hehr";
  CHECK_THROWS_AS(missing.validate(), ConfigError);
  // Unset paths are omitted; every other key is echoed.
  for (const auto& key : RunConfig::keys()) {
    const bool path = key == "valid" || key == "test" || key == "checkpoint" || key == "report" ||
                      key == "log" || key == "resume";
    CHECK(rc.to_map().count(key) == (path ? 0u : 1u));
  }
}
