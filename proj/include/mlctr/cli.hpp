#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mlctr {

// Fully resolved run configuration shared by every subcommand.  Flag
// defaults live here; a --config file overrides them and explicit flags
// override the file.
struct RunConfig {
  std::string command;

  // data
  std::string x_path;
  std::string y_path;

  // model
  int rank = 8;
  int layers = 0;
  int hidden = 8;
  std::string activation = "elu";
  std::string readout = "dot";
  int mlp_hidden = 0;  // 0 picks 2 * rank
  double lambda = 1.0;
  bool freeze_base = false;

  // training
  double lr = 1e-3;
  int batch_size = 256;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  std::string split = "0.72,0.08,0.2";
  bool deterministic = false;

  // outputs / inputs
  std::string out_dir = "out";
  std::string checkpoint_path;
  std::string queries_path;

  // sweep
  std::string ranks = "2,4,8";
  std::string sparsities = "0.5,0.7,0.9";
  std::string variants = "cp,mlctr";
  double y_sparsity = 0.5;
  int jobs = 1;

  // synth
  std::string dims = "30,30,30";
  int true_rank = 2;
  double noise = 0.0;
  std::string nonlinearity = "none";
  bool coupled = false;
};

// Applies "key=value" lines from a config/manifest file onto cfg.  Unknown
// keys and malformed values raise ConfigError; 'command' is informational
// and skipped.  Blank lines and '#' comments are allowed.
void apply_config_file(RunConfig& cfg, const std::string& path);

// Serializes every field as "key=value", one per line, in a fixed order.
// The result is a valid --config input that reproduces the run.
std::string manifest_text(const RunConfig& cfg);

// Subcommand drivers.  Each validates its slice of the config, does the
// work, writes its artifacts under cfg.out_dir and returns 0; failures are
// reported by throwing (the CLI maps exception types to exit codes).
int run_train(const RunConfig& cfg);
int run_evaluate(const RunConfig& cfg);
int run_impute(const RunConfig& cfg);
int run_export(const RunConfig& cfg);
int run_sweep(const RunConfig& cfg);
int run_synth(const RunConfig& cfg);

int run_command(const RunConfig& cfg);

// Worker cap for sweep: the smaller of cfg.jobs and the MLCTR_THREADS
// environment variable (when set and positive).
int effective_jobs(int requested);

// Small parsing helpers shared by the drivers and the flag layer.
std::vector<double> parse_double_list(const std::string& csv, const char* what);
std::vector<int> parse_int_list(const std::string& csv, const char* what);
std::vector<std::int64_t> parse_dims_list(const std::string& csv, const char* what);
std::vector<std::string> split_csv(const std::string& csv);

}  // namespace mlctr
