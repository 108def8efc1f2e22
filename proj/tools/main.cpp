#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hehr/run_config.hpp"

int main(int argc, char** argv) {
  using namespace hehr::cli;

  CLI::App app{"Hyper-relational link prediction with hyperedge message passing"};
  app.require_subcommand(1);

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Convert an external dataset into HEHR fact lines");
  c->add_option("--format", convert.format, "triple_tsv | hyperedge_csv | hyper_relational_statements")
      ->required();
  c->add_option("input", convert.input, "Input file")->required();
  c->add_option("output", convert.output, "Output HEHR file")->required();
  c->add_flag("--dedup", convert.dedup, "Drop duplicate facts");
  c->add_flag("--lenient", convert.lenient, "Skip malformed rows with a warning");

  ValidateArgs validate;
  auto* v = app.add_subcommand("validate", "Check an HEHR file and print dataset statistics");
  v->add_option("input", validate.input, "HEHR file")->required();
  v->add_flag("--json", validate.json, "Print the report as JSON");

  TrainArgs train;
  std::map<std::string, std::string> raw_overrides;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", train.config_path, "key = value config file");
  for (const auto& key : hehr::RunConfig::keys()) {
    t->add_option_function<std::string>(
        "--" + key, [&raw_overrides, key](const std::string& value) { raw_overrides[key] = value; },
        "Override config key '" + key + "'");
  }

  EvalArgs eval;
  std::string eval_filtered, eval_ties;
  auto* e = app.add_subcommand("eval", "Rank test facts with a trained checkpoint");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--test", eval.test, "Test facts (defaults to the file recorded in the checkpoint)");
  e->add_option("--filtered", eval_filtered, "true | false");
  e->add_option("--ties", eval_ties, "pessimistic | optimistic");
  e->add_option("--report", eval.report, "Write the JSON report to this file");
  e->add_flag("--json", eval.json, "Print the report as JSON");

  InspectArgs inspect;
  auto* i = app.add_subcommand("inspect", "Summarize a dataset, graph snapshot or checkpoint");
  i->add_option("path", inspect.path, "File to inspect")->required();

  CLI11_PARSE(app, argc, argv);

  if (c->parsed()) return cmd_convert(convert, std::cout, std::cerr);
  if (v->parsed()) return cmd_validate(validate, std::cout, std::cerr);
  if (t->parsed()) {
    train.overrides = raw_overrides;
    if (const char* seed = std::getenv("HEHR_SEED")) train.env_seed = seed;
    return cmd_train(train, std::cout, std::cerr);
  }
  if (e->parsed()) {
    if (!eval_filtered.empty()) {
      if (eval_filtered == "true") eval.filtered = true;
      else if (eval_filtered == "false") eval.filtered = false;
      else {
        std::cerr << "eval: --filtered expects true or false\n";
        return 2;
      }
    }
    if (!eval_ties.empty()) eval.ties = eval_ties;
    return cmd_eval(eval, std::cout, std::cerr);
  }
  return cmd_inspect(inspect, std::cout, std::cerr);
}
