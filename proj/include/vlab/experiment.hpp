#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlab/ccs.hpp"
#include "vlab/supervised.hpp"
#include "vlab/toy_lm.hpp"

namespace vlab {

struct DatasetSpec {
  std::string name;
  std::size_t size = 500;
  bool negate = false;
  /// Template table file; the builtin table of that name when absent.
  std::optional<std::filesystem::path> table;
};

struct ChanceSpec {
  std::size_t urns = 0;  // 0 disables the chance set
  double holdout_fraction = 0.25;
  std::size_t epochs = 50;
};

struct ProbeSpec {
  std::vector<std::size_t> hidden{64, 32, 16};
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double step_size = 1e-3;
  std::size_t best_of = 10;
  double selection_fraction = 0.1;
};

struct CcsSpec {
  std::vector<std::size_t> hidden{100};
  std::size_t restarts = 10;
  std::size_t steps = 1000;
  double step_size = 1e-3;
  /// Positive datasets; each is paired with "Neg" + name.
  std::vector<std::string> datasets;
};

struct ExperimentConfig {
  std::string id;
  std::uint64_t seed = 0;
  std::vector<DatasetSpec> datasets;
  ChanceSpec chance;
  LmConfig lm;
  LmTrainOptions lm_train;
  std::vector<int> layers{-1, -4};
  /// Must contain "{statement}" exactly once, e.g. "Think hard about this: {statement}".
  std::optional<std::string> prompt_wrapper;
  ProbeSpec probe;
  CcsSpec ccs;
  std::size_t calibration_bins = 10;

  std::vector<std::string> positive_names() const;
  std::vector<std::string> negated_names() const;
};

struct Diagnostic {
  std::string path;  // e.g. "lm.n_heads", "datasets[2].size"
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

std::string to_string(const Diagnostic& d);

struct ConfigParse {
  std::optional<ExperimentConfig> config;  // set iff diagnostics is empty
  std::vector<Diagnostic> diagnostics;
};

/// Strict: unknown fields are diagnostics. Relative table paths resolve against base_dir.
ConfigParse parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
/// Unreadable file raises ErrorKind::Io; a JSON syntax error is a diagnostic at the root.
/// Top-level keys of `overrides` replace those of the file before validation.
ConfigParse parse_config_file(const std::filesystem::path& path,
                              const nlohmann::json& overrides = nlohmann::json::object());
std::string apply_wrapper(const std::string& wrapper, const std::string& text);

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
/// 16 hex digits over the canonical JSON form.
std::string config_hash(const ExperimentConfig& cfg);

enum class Stage { Gen, TrainLm, Embed, TrainProbe, TrainCcs, Eval, Report };

std::string_view stage_name(Stage s);
std::optional<Stage> parse_stage(std::string_view name);
const std::vector<Stage>& all_stages();

struct RunOptions {
  bool force = false;
  std::size_t jobs = 1;
  std::ostream* log = nullptr;
};

/// One experiment directory, <root>/<id>:
///   manifest.json          id, config hash, effective config
///   stages/<stage>.done    outputs of a completed stage; <stage>.failed on error
///   datasets/ lm/ stores/ probes/ reports/
/// The directory is held under .lock for the lifetime of the object.
class Experiment {
 public:
  Experiment(ExperimentConfig cfg, const std::filesystem::path& root, RunOptions opts = {});
  ~Experiment();
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  const ExperimentConfig& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }

  bool done(Stage s) const;
  /// Skips a completed stage unless force is set. Running a stage invalidates later ones.
  /// Returns false when skipped.
  bool run(Stage s);
  void run_all();

  std::filesystem::path store_dir(int layer) const;
  std::filesystem::path report_path() const { return dir_ / "reports" / "report.jsonl"; }

 private:
  std::vector<std::string> gen();
  std::vector<std::string> train_lm_stage();
  std::vector<std::string> embed();
  std::vector<std::string> train_probe();
  std::vector<std::string> train_ccs_stage();
  std::vector<std::string> eval();
  std::vector<std::string> report();

  std::vector<Statement> load_statements() const;
  std::map<int, EmbeddingStore> load_stores() const;
  std::uint64_t derived_seed(std::string_view purpose) const;
  void log(const std::string& line) const;

  ExperimentConfig cfg_;
  RunOptions opts_;
  std::filesystem::path dir_;
  std::string hash_;
  bool locked_ = false;
};

/// Command-line entry point. Exit codes: 0 ok, 1 stage failure, 2 config error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vlab
