#pragma once

// Subcommand implementations behind the `hehr` executable. Each returns the
// process exit status; machine output goes to `out`, diagnostics to `err`.

#include <map>
#include <optional>
#include <ostream>
#include <string>

namespace hehr::cli {

struct ConvertArgs {
  std::string format;
  std::string input;
  std::string output;
  bool dedup = false;
  bool lenient = false;
};

struct ValidateArgs {
  std::string input;
  bool json = false;
};

struct TrainArgs {
  std::string config_path;
  // Command-line overrides, applied after the file and HEHR_SEED.
  std::map<std::string, std::string> overrides;
  // Value of HEHR_SEED, if set.
  std::optional<std::string> env_seed;
};

struct EvalArgs {
  std::string checkpoint;
  std::string test;
  std::optional<bool> filtered;
  std::optional<std::string> ties;
  std::string report;
  bool json = false;
};

struct InspectArgs {
  std::string path;
};

int cmd_convert(const ConvertArgs& args, std::ostream& out, std::ostream& err);
int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err);
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_inspect(const InspectArgs& args, std::ostream& out, std::ostream& err);

}  // namespace hehr::cli
