#include "hehr/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "hehr/errors.hpp"

namespace hehr {

namespace {

// Independent, reproducible stream per epoch so that resuming at epoch k
// draws exactly what an uninterrupted run would.
std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x48454852u};
  return std::mt19937_64(seq);
}

EntityId draw_other(EntityId original, std::size_t num_entities, std::mt19937_64& rng) {
  // Uniform over the num_entities - 1 ids different from `original`.
  std::uniform_int_distribution<std::uint64_t> dist(0, num_entities - 2);
  auto x = static_cast<EntityId>(dist(rng));
  return x >= original ? x + 1 : x;
}

}  // namespace

void TrainConfig::validate() const {
  if (negative_ratio < 1) throw ConfigError("negative_ratio must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must be in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must be in (0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be > 0");
}

ModelState make_state(const ModelConfig& cfg, ModelParams params) {
  ModelState s;
  s.config = cfg;
  s.adam_m = params.zeros_like();
  s.adam_v = params.zeros_like();
  s.params = std::move(params);
  return s;
}

std::vector<TrainingSample> sample_negatives(const IdFact& fact, std::size_t negative_ratio,
                                             std::size_t num_entities, std::mt19937_64& rng,
                                             bool corrupt_qualifiers) {
  if (num_entities < 2) throw ConfigError("negative sampling needs at least 2 entities");
  std::vector<TrainingSample> out;
  const auto slots = fact.arity() + (corrupt_qualifiers ? fact.qualifiers.size() : 0);
  out.reserve(negative_ratio * slots);
  for (std::size_t pos = 0; pos < fact.arity(); ++pos) {
    for (std::size_t k = 0; k < negative_ratio; ++k) {
      TrainingSample s{fact, SampleLabel::negative, pos};
      s.fact.primary[pos] = draw_other(fact.primary[pos], num_entities, rng);
      out.push_back(std::move(s));
    }
  }
  if (corrupt_qualifiers) {
    for (std::size_t q = 0; q < fact.qualifiers.size(); ++q) {
      for (std::size_t k = 0; k < negative_ratio; ++k) {
        TrainingSample s{fact, SampleLabel::negative, fact.arity() + q};
        s.fact.qualifiers[q].second = draw_other(fact.qualifiers[q].second, num_entities, rng);
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

double bce_loss(const std::vector<Score>& scores, const std::vector<double>& labels) {
  if (scores.empty()) throw EmptyInput("no scores");
  if (scores.size() != labels.size()) throw DimensionMismatch("scores and labels differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double x = scores[i].raw, y = labels[i];
    total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  return total / static_cast<double>(scores.size());
}

void adam_step(ModelState& state, const ModelParams& grads, const TrainConfig& cfg) {
  auto params = state.params.tensors();
  auto ms = state.adam_m.tensors();
  auto vs = state.adam_v.tensors();
  const auto gs = grads.tensors();
  if (params.size() != gs.size() || ms.size() != params.size() || vs.size() != params.size()) {
    throw DimensionMismatch("gradient set is not congruent with parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i].second;
    Matrix& m = *ms[i].second;
    Matrix& v = *vs[i].second;
    const Matrix& g = *gs[i].second;
    if (p.rows() != g.rows() || p.cols() != g.cols() || m.rows() != p.rows() || v.rows() != p.rows()) {
      throw DimensionMismatch("shape mismatch in " + params[i].first);
    }
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
    p.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_epsilon);
  }
}

std::string format_epoch_line(const EpochLog& log) {
  char buf[128];
  if (log.val_mrr) {
    std::snprintf(buf, sizeof buf, "epoch=%zu loss=%.9g val_mrr=%.6f", log.epoch, log.loss, *log.val_mrr);
  } else {
    std::snprintf(buf, sizeof buf, "epoch=%zu loss=%.9g", log.epoch, log.loss);
  }
  return buf;
}

std::size_t max_arity(const std::vector<IdFact>& facts) {
  std::size_t m = 0;
  for (const auto& f : facts) m = std::max(m, f.arity());
  return m;
}

TrainingData prepare_training_data(const std::vector<FactRecord>& train,
                                   const std::vector<FactRecord>& extra, VocabMaps seed) {
  TrainingData data;
  data.vocab = build_vocab(extra, build_vocab(train, std::move(seed)));
  data.train.reserve(train.size());
  for (const auto& r : train) data.train.push_back(resolve_fact(r, data.vocab));
  data.graph = build_graph(data.train, data.vocab.num_entities(), data.vocab.num_relations());
  return data;
}

TrainResult train_from(const TrainingData& data, ModelState state, const TrainConfig& cfg,
                       std::size_t first_epoch, const Validator& validator,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  TrainResult result;
  const auto& mcfg = state.config;
  check_params(mcfg, state.params, data.graph);
  const auto num_entities = data.graph.num_entities();
  const auto n = data.train.size();
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = first_epoch; epoch < first_epoch + cfg.epochs; ++epoch) {
    if (n == 0) break;
    auto rng = epoch_rng(cfg.seed, epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<LabeledTuple> batch;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const auto stop = std::min(n, start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) {
        const auto& fact = data.train[order[i]];
        batch.push_back({fact.relation, fact.primary, 1.0});
        for (auto& neg : sample_negatives(fact, cfg.negative_ratio, num_entities, rng, cfg.corrupt_qualifiers)) {
          batch.push_back({neg.fact.relation, std::move(neg.fact.primary), 0.0});
        }
      }
      ModelParams grads;
      loss_sum += batch_loss(mcfg, state.params, data.graph, batch, &grads);
      adam_step(state, grads, cfg);
      ++batches;
    }

    EpochLog log{epoch, loss_sum / static_cast<double>(batches), std::nullopt};
    if (validator && cfg.validate_every > 0 && (epoch - first_epoch + 1) % cfg.validate_every == 0) {
      log.val_mrr = validator(state);
    }
    result.log.push_back(log);
    if (on_epoch && !on_epoch(log, state)) break;
  }
  result.state = std::move(state);
  return result;
}

TrainResult train(const TrainingData& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const Validator& validator, const EpochCallback& on_epoch) {
  cfg.validate();
  ModelConfig mcfg = model_cfg;
  if (mcfg.decoder == DecoderKind::hype) {
    mcfg.hype.dim = mcfg.dim();
    if (mcfg.hype.max_arity == 0) mcfg.hype.max_arity = std::max<std::size_t>(1, max_arity(data.train));
  }
  std::mt19937_64 init_rng(cfg.seed);
  auto params = init_params(mcfg, data.graph.num_entities(), data.graph.num_relations(), init_rng);
  return train_from(data, make_state(mcfg, std::move(params)), cfg, 1, validator, on_epoch);
}

TrainResult train(const std::vector<FactRecord>& records, const ModelConfig& model_cfg,
                  const TrainConfig& cfg) {
  return train(prepare_training_data(records), model_cfg, cfg);
}

}  // namespace hehr
