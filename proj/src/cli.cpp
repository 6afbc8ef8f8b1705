#include <cstdlib>
#include <ostream>

#include <CLI11.hpp>

#include "vlab/experiment.hpp"

namespace vlab {

namespace {

struct CliArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<int> layers;
  bool force = false;
  std::size_t jobs = 1;
};

void add_config_options(CLI::App* sub, CliArgs& a) {
  sub->add_option("--config", a.config, "experiment config (JSON)")->required();
  sub->add_option("--seed", a.seed, "override the master seed");
  sub->add_option("--layer", a.layers, "layer selector such as -1; repeatable, replaces the config's layers")
      ->allow_extra_args(false);
}

void add_run_options(CLI::App* sub, CliArgs& a) {
  add_config_options(sub, a);
  sub->add_option("--out", a.out, "output root (default: $VLAB_OUT, else ./runs)");
  sub->add_flag("--force", a.force, "rerun stages that already completed");
  sub->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probing experiments on a toy transformer: generate, train, embed, probe, evaluate."};
  app.name("vlab");
  app.require_subcommand(1);
  CliArgs a;

  std::vector<std::pair<CLI::App*, std::optional<Stage>>> runs;
  runs.emplace_back(app.add_subcommand("all", "run every stage in order"), std::nullopt);
  static const char* help[] = {"generate the statement datasets", "train the toy language model",
                               "extract embedding stores for each layer", "train the leave-one-out grid probes",
                               "train CCS probes on contrast pairs",      "evaluate probes into reports/report.jsonl",
                               "render tables and calibration CSVs"};
  for (std::size_t i = 0; i < all_stages().size(); ++i) {
    const Stage s = all_stages()[i];
    runs.emplace_back(app.add_subcommand(std::string(stage_name(s)), help[i]), s);
  }
  for (auto& [sub, _] : runs) add_run_options(sub, a);
  CLI::App* validate = app.add_subcommand("validate", "list every problem in a config; exit 0 iff none");
  add_config_options(validate, a);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  nlohmann::json overrides = nlohmann::json::object();
  if (a.seed) overrides["seed"] = *a.seed;
  if (!a.layers.empty()) overrides["layers"] = a.layers;

  ConfigParse parsed;
  try {
    parsed = parse_config_file(a.config, overrides);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 2;
  }
  if (validate->parsed()) {
    for (const auto& d : parsed.diagnostics) out << to_string(d) << "\n";
    if (parsed.diagnostics.empty()) out << a.config << ": ok\n";
    return parsed.diagnostics.empty() ? 0 : 2;
  }
  if (!parsed.config) {
    err << "invalid config " << a.config << ":\n";
    for (const auto& d : parsed.diagnostics) err << "  " << to_string(d) << "\n";
    return 2;
  }

  std::string root = a.out;
  if (root.empty()) {
    const char* env = std::getenv("VLAB_OUT");
    root = env && *env ? env : "runs";
  }

  std::optional<Experiment> ex;
  try {
    ex.emplace(*parsed.config, root, RunOptions{a.force, a.jobs, &out});
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.kind() == ErrorKind::Configuration ? 2 : 1;
  }
  for (auto& [sub, stage] : runs) {
    if (!sub->parsed()) continue;
    const std::vector<Stage> todo = stage ? std::vector<Stage>{*stage} : all_stages();
    for (Stage s : todo) {
      try {
        ex->run(s);
      } catch (const std::exception& e) {
        err << "stage " << stage_name(s) << " failed: " << e.what() << "\n";
        return 1;
      }
    }
  }
  return 0;
}

}  // namespace vlab
