#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hehr/decoders.hpp"
#include "hehr/fact_format.hpp"
#include "hehr/graph_store.hpp"
#include "hehr/model.hpp"

namespace hehr {

struct TrainConfig {
  std::size_t negative_ratio = 10;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 42;
  // Also corrupt qualifier entities, N per qualifier slot.
  bool corrupt_qualifiers = false;
  // Compute filtered MRR on the validation facts every this many epochs
  // (0 = never).
  std::size_t validate_every = 0;

  void validate() const;
};

struct ModelState {
  ModelConfig config;
  ModelParams params;
  ModelParams adam_m;
  ModelParams adam_v;
  std::uint64_t step = 0;
};

ModelState make_state(const ModelConfig& cfg, ModelParams params);

enum class SampleLabel { positive, negative };

struct TrainingSample {
  IdFact fact;
  SampleLabel label = SampleLabel::positive;
  // Primary slot that was replaced; for a corrupted qualifier this is
  // arity + qualifier index.
  std::optional<std::size_t> corrupted_position;
};

// N * arity negatives (plus N per qualifier when corrupt_qualifiers): for each
// slot, N copies with that slot replaced by a uniformly drawn entity id that
// differs from the original. Requires num_entities >= 2.
std::vector<TrainingSample> sample_negatives(const IdFact& fact, std::size_t negative_ratio,
                                             std::size_t num_entities, std::mt19937_64& rng,
                                             bool corrupt_qualifiers = false);

// Mean sigmoid binary cross-entropy, evaluated on raw scores in a form that
// cannot overflow. Labels are 1 (positive) or 0. Throws EmptyInput /
// DimensionMismatch.
double bce_loss(const std::vector<Score>& scores, const std::vector<double>& labels);

// One bias-corrected Adam update of every parameter; increments state.step.
void adam_step(ModelState& state, const ModelParams& grads, const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> val_mrr;
};

std::string format_epoch_line(const EpochLog& log);

struct TrainingData {
  VocabMaps vocab;
  std::vector<IdFact> train;
  GraphStore graph;
};

// Vocabulary from `seed`, then the training records, then `extra` (e.g.
// validation/test facts, whose tokens get ids but no hyperedges). The graph
// holds the training facts only.
TrainingData prepare_training_data(const std::vector<FactRecord>& train,
                                   const std::vector<FactRecord>& extra = {}, VocabMaps seed = {});

// Called after each epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochLog&, const ModelState&)>;
// Returns the validation MRR for the current state.
using Validator = std::function<double(const ModelState&)>;

struct TrainResult {
  ModelState state;
  std::vector<EpochLog> log;
};

// Fresh parameters from cfg.seed, then train.
TrainResult train(const TrainingData& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const Validator& validator = {}, const EpochCallback& on_epoch = {});

// Continues from `state` for cfg.epochs more epochs; epochs are numbered from
// `first_epoch`.
TrainResult train_from(const TrainingData& data, ModelState state, const TrainConfig& cfg,
                       std::size_t first_epoch = 1, const Validator& validator = {},
                       const EpochCallback& on_epoch = {});

// Convenience: build vocabulary and graph from records and train.
TrainResult train(const std::vector<FactRecord>& records, const ModelConfig& model_cfg,
                  const TrainConfig& cfg);

// Max arity over facts; used to size the HypE decoder.
std::size_t max_arity(const std::vector<IdFact>& facts);

}  // namespace hehr
