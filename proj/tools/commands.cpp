#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hehr/checkpoint.hpp"
#include "hehr/errors.hpp"
#include "hehr/evaluation.hpp"
#include "hehr/fact_format.hpp"
#include "hehr/graph_store.hpp"
#include "hehr/run_config.hpp"
#include "hehr/training.hpp"

namespace hehr::cli {

namespace {

const char* severity_name(Severity s) { return s == Severity::error ? "error" : "warning"; }

// Parses an HEHR file, reporting diagnostics. Throws on malformed lines.
ParsedDataset load_facts(const std::string& path, std::ostream& err) {
  auto parsed = parse_dataset_file(path);
  for (const auto& d : parsed.diagnostics) {
    err << path << ":" << d.line_number << ": " << severity_name(d.severity) << ": " << d.message << '\n';
  }
  if (!parsed.diagnostics.empty()) {
    throw FormatError(path + ": " + std::to_string(parsed.diagnostics.size()) + " malformed line(s)");
  }
  return parsed;
}

VocabMaps declared_vocab(const ParsedDataset& d) {
  VocabMaps v;
  for (const auto& r : d.declared_relations) v.add_relation(r);
  for (const auto& e : d.declared_entities) v.add_entity(e);
  return v;
}

struct Corpus {
  ParsedDataset train, valid, test;
};

Corpus load_corpus(const RunConfig& rc, std::ostream& err) {
  Corpus c;
  c.train = load_facts(rc.train_path, err);
  if (!rc.valid_path.empty()) c.valid = load_facts(rc.valid_path, err);
  if (!rc.test_path.empty()) c.test = load_facts(rc.test_path, err);
  return c;
}

TrainingData assemble(const Corpus& c) {
  std::vector<FactRecord> extra = c.valid.records;
  extra.insert(extra.end(), c.test.records.begin(), c.test.records.end());
  return prepare_training_data(c.train.records, extra, declared_vocab(c.train));
}

std::vector<IdFact> resolve_all(const std::vector<FactRecord>& records, const VocabMaps& vocab) {
  std::vector<IdFact> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(resolve_fact(r, vocab));
  return out;
}

RunConfig run_config_from_echo(const std::map<std::string, std::string>& echo) {
  RunConfig rc;
  const auto& keys = RunConfig::keys();
  for (const auto& [k, v] : echo) {
    if (std::find(keys.begin(), keys.end(), k) != keys.end()) rc.set(k, v);
  }
  return rc;
}

std::size_t epochs_completed(const std::map<std::string, std::string>& echo) {
  auto it = echo.find("epochs_completed");
  return it == echo.end() ? 0 : std::stoul(it->second);
}

bool is_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char buf[8] = {};
  in.read(buf, 8);
  return in.gcount() == 8 && std::string(buf, 8) == "HEHRCKPT";
}

bool is_graph_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char buf[6] = {};
  in.read(buf, 6);
  // "HEHR" followed by a binary u16 version; a text file starting with
  // "HEHR" would need the next two bytes to be 0x01 0x00.
  return in.gcount() == 6 && std::string(buf, 4) == "HEHR" && buf[4] == 1 && buf[5] == 0;
}

}  // namespace

int cmd_convert(const ConvertArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto format = parse_format_id(args.format);
    std::ifstream in(args.input);
    if (!in) throw IoFailure("cannot open '" + args.input + "'");
    const auto result = convert_external(format, in, {args.lenient, args.dedup});
    for (const auto& d : result.diagnostics) {
      err << args.input << ":" << d.line_number << ": " << severity_name(d.severity) << ": " << d.message
          << '\n';
    }
    std::ofstream os(args.output);
    if (!os) throw IoFailure("cannot create '" + args.output + "'");
    write_dataset(os, result.records);
    out << "converted " << result.records.size() << " facts";
    if (!result.diagnostics.empty()) out << " (" << result.diagnostics.size() << " rows skipped)";
    out << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "convert: " << e.what() << '\n';
    return 1;
  }
}

int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto parsed = parse_dataset_file(args.input);
    for (const auto& d : parsed.diagnostics) {
      err << args.input << ":" << d.line_number << ": " << severity_name(d.severity) << ": " << d.message
          << '\n';
    }
    const auto report = validate_dataset(parsed.records);
    out << (args.json ? format_report_json(report) + "\n" : format_report_text(report));
    return parsed.diagnostics.empty() ? 0 : 1;
  } catch (const std::exception& e) {
    err << "validate: " << e.what() << '\n';
    return 1;
  }
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  try {
    ConfigMap values = args.config_path.empty() ? ConfigMap{} : read_config_file(args.config_path);
    if (args.env_seed) values["seed"] = *args.env_seed;
    for (const auto& [k, v] : args.overrides) values[k] = v;
    RunConfig rc = make_run_config(values);
    rc.validate();
    if (rc.checkpoint_path.empty()) throw ConfigError("no checkpoint output configured (key 'checkpoint')");

    const Corpus corpus = load_corpus(rc, err);
    const TrainingData data = assemble(corpus);

    std::vector<IdFact> known = data.train;
    const auto valid = resolve_all(corpus.valid.records, data.vocab);
    const auto test = resolve_all(corpus.test.records, data.vocab);
    known.insert(known.end(), valid.begin(), valid.end());
    known.insert(known.end(), test.begin(), test.end());
    const FilterIndex filter(known);

    Validator validator;
    if (!valid.empty()) {
      validator = [&](const ModelState& s) {
        return evaluate(valid, s.config, s.params, data.graph, filter).mrr;
      };
    }

    std::ofstream log_file;
    if (!rc.log_path.empty()) {
      log_file.open(rc.log_path);
      if (!log_file) throw IoFailure("cannot create log '" + rc.log_path + "'");
    }
    auto on_epoch = [&](const EpochLog& log, const ModelState&) {
      const auto line = format_epoch_line(log);
      out << line << '\n';
      if (log_file) log_file << line << '\n' << std::flush;
      return true;
    };

    std::size_t done = 0;
    TrainResult result;
    if (!rc.resume_path.empty()) {
      auto ck = load_checkpoint(rc.resume_path);
      verify_vocab(ck, data.vocab);
      done = epochs_completed(ck.config);
      result = train_from(data, std::move(ck.state), rc.train, done + 1, validator, on_epoch);
    } else {
      result = train(data, rc.model, rc.train, validator, on_epoch);
    }

    auto echo = rc.to_map();
    echo.erase("resume");
    echo["epochs_completed"] = std::to_string(done + result.log.size());
    save_checkpoint(rc.checkpoint_path, result.state, echo, data.vocab);
    err << "saved checkpoint " << rc.checkpoint_path << " (step " << result.state.step << ")\n";
    return 0;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return 1;
  }
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto ck = load_checkpoint(args.checkpoint);
    RunConfig rc = run_config_from_echo(ck.config);
    if (args.filtered) rc.rank.filtered = *args.filtered;
    if (args.ties) rc.set("ties", *args.ties);
    if (rc.train_path.empty()) throw ConfigError("checkpoint does not record its training file");

    const Corpus corpus = load_corpus(rc, err);
    TrainingData data = assemble(corpus);
    verify_vocab(ck, data.vocab);

    const std::string test_path = args.test.empty() ? rc.test_path : args.test;
    if (test_path.empty()) throw ConfigError("no test file given");
    const auto test_records = load_facts(test_path, err).records;

    const ModelConfig& mcfg = ck.state.config;
    VocabMaps vocab = data.vocab;
    GraphStore graph = data.graph;
    if (mcfg.mode == ModelMode::inductive) {
      // Unseen tokens get constant initial features as isolated nodes.
      vocab = build_vocab(test_records, vocab);
      if (vocab.num_entities() != data.vocab.num_entities() ||
          vocab.num_relations() != data.vocab.num_relations()) {
        graph = build_graph(data.train, vocab.num_entities(), vocab.num_relations());
      }
    } else {
      for (const auto& r : test_records) {
        for (const auto& e : r.primary) {
          if (!vocab.has_entity(e)) throw UnknownEntity("entity '" + e + "' was not seen in training");
        }
        if (!vocab.has_relation(r.relation)) {
          throw UnknownEntity("relation '" + r.relation + "' was not seen in training");
        }
      }
    }
    std::vector<FactRecord> eval_records;
    for (const auto& r : test_records) {
      FactRecord primary_only{r.relation, r.primary, {}};
      eval_records.push_back(std::move(primary_only));
    }
    const auto test = resolve_all(eval_records, vocab);

    std::vector<IdFact> known = data.train;
    for (const auto* part : {&corpus.valid.records, &corpus.test.records}) {
      const auto ids = resolve_all(*part, vocab);
      known.insert(known.end(), ids.begin(), ids.end());
    }
    known.insert(known.end(), test.begin(), test.end());
    const FilterIndex filter(known);

    const auto report = evaluate(test, mcfg, ck.state.params, graph, filter, rc.rank);
    auto echo = ck.config;
    echo["test"] = test_path;
    echo["filtered"] = rc.rank.filtered ? "true" : "false";
    echo["ties"] = rc.rank.ties == TieBreak::pessimistic ? "pessimistic" : "optimistic";
    const auto json = format_rank_report_json(report, echo);
    out << (args.json ? json + "\n" : format_rank_report_text(report));
    if (!args.report.empty()) {
      std::ofstream rf(args.report);
      if (!rf) throw IoFailure("cannot create report '" + args.report + "'");
      rf << json << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return 1;
  }
}

int cmd_inspect(const InspectArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (is_checkpoint(args.path)) {
      const auto ck = load_checkpoint(args.path);
      const auto& s = ck.state;
      out << "kind: checkpoint\n"
          << "mode: " << to_string(s.config.mode) << '\n'
          << "decoder: " << to_string(s.config.decoder) << '\n'
          << "embedding_dim: " << s.config.dim() << '\n'
          << "num_layers: " << (s.config.uses_encoder() ? s.config.encoder.num_layers : 0) << '\n'
          << "step: " << s.step << '\n'
          << "vocab_entities: " << ck.num_entities << '\n'
          << "vocab_relations: " << ck.num_relations << '\n'
          << "parameters: " << s.params.parameter_count() << '\n';
      for (const auto& [name, m] : s.params.tensors()) {
        out << "tensor " << name << ": " << m->rows() << "x" << m->cols() << '\n';
      }
      return 0;
    }
    if (is_graph_snapshot(args.path)) {
      std::ifstream in(args.path, std::ios::binary);
      const auto g = GraphStore::load(in);
      out << "kind: graph\n"
          << "entities: " << g.num_entities() << '\n'
          << "relations: " << g.num_relations() << '\n'
          << "hyperedges: " << g.num_edges() << '\n'
          << "primary_incidences: " << g.primary_incidence().edge.size() << '\n'
          << "qualifier_incidences: " << g.qualifier_incidence().edge.size() << '\n';
      return 0;
    }
    const auto parsed = load_facts(args.path, err);
    const auto vocab = build_vocab(parsed.records, declared_vocab(parsed));
    const auto report = validate_dataset(parsed.records);
    const auto graph = build_graph(parsed.records, vocab);
    out << "kind: dataset\n"
        << "entities: " << vocab.num_entities() << '\n'
        << "relations: " << vocab.num_relations() << " (" << report.relation_count << " used, "
        << vocab.num_relations() - report.relation_count << " declared only)\n"
        << "hyperedges: " << graph.num_edges() << '\n'
        << "primary_incidences: " << graph.primary_incidence().edge.size() << '\n'
        << "qualifier_incidences: " << graph.qualifier_incidence().edge.size() << '\n'
        << "max_arity: " << graph.max_arity() << '\n'
        << "qualifier_ratio: " << report.qualifier_ratio << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "inspect: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace hehr::cli
