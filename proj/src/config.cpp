#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "vlab/dataset_gen.hpp"
#include "vlab/experiment.hpp"

namespace vlab {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Reads the fields of one JSON object, recording a diagnostic for every
// type error and, on finish(), for every key nobody asked about.
class Fields {
 public:
  Fields(const json& j, std::string path, std::vector<Diagnostic>& diags)
      : j_(j), path_(std::move(path)), diags_(diags), ok_(j.is_object()) {
    if (!ok_) diags_.push_back({path_.empty() ? "<root>" : path_, "expected an object"});
  }

  std::string at(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json* find(const char* key) {
    seen_.insert(key);
    if (!ok_) return nullptr;
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  void required(const char* key) {
    if (ok_ && (!j_.contains(key) || j_.at(key).is_null())) diags_.push_back({at(key), "required field is missing"});
  }

  std::uint64_t u64(const char* key, std::uint64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!non_negative_integer(*v)) return bad(key, "expected a non-negative integer"), fallback;
    return v->get<std::uint64_t>();
  }

  std::size_t size(const char* key, std::size_t fallback) { return static_cast<std::size_t>(u64(key, fallback)); }

  double number(const char* key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) return bad(key, "expected a number"), fallback;
    return v->get<double>();
  }

  bool boolean(const char* key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) return bad(key, "expected true or false"), fallback;
    return v->get<bool>();
  }

  std::optional<std::string> str(const char* key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) return bad(key, "expected a string"), std::nullopt;
    return v->get<std::string>();
  }

  std::vector<std::size_t> sizes(const char* key, std::vector<std::size_t> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_array()) return bad(key, "expected an array of positive integers"), fallback;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto& e = (*v)[i];
      if (!non_negative_integer(e) || e.get<std::uint64_t>() == 0)
        diags_.push_back({at(key) + "[" + std::to_string(i) + "]", "expected a positive integer"});
      else
        out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  void finish() {
    if (!ok_) return;
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) diags_.push_back({at(k), "unknown field"});
  }

 private:
  void bad(const char* key, const std::string& msg) { diags_.push_back({at(key), msg}); }

  const json& j_;
  std::string path_;
  std::vector<Diagnostic>& diags_;
  bool ok_;
  std::set<std::string> seen_;
};

bool valid_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  return true;
}

std::size_t count_occurrences(const std::string& s, const std::string& what) {
  std::size_t n = 0;
  for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos + what.size())) ++n;
  return n;
}

bool can_balance(std::size_t n, std::size_t trues, std::size_t falses) {
  const auto lo = static_cast<std::size_t>(std::ceil(0.45 * static_cast<double>(n)));
  const auto hi = static_cast<std::size_t>(std::floor(0.55 * static_cast<double>(n)));
  for (std::size_t k = lo; k <= hi; ++k)
    if (k <= trues && n - k <= falses) return true;
  return false;
}

void check_dataset(const DatasetSpec& spec, const std::string& path, std::vector<Diagnostic>& d) {
  if (spec.size < 2) d.push_back({path + ".size", "must be at least 2"});
  if (spec.name == "Chance" || spec.name.starts_with("Neg"))
    d.push_back({path + ".name", "'" + spec.name + "' is reserved for derived datasets"});
  std::optional<TemplateTable> table;
  if (spec.table) {
    if (!fs::exists(*spec.table)) {
      d.push_back({path + ".table", "file not found: " + spec.table->string()});
      return;
    }
    try {
      table = read_template_table(*spec.table);
      validate(*table);
    } catch (const Error& e) {
      d.push_back({path + ".table", e.detail()});
      return;
    }
    if (table->dataset != spec.name)
      d.push_back({path + ".name", "'" + spec.name + "' does not match the table's dataset '" + table->dataset + "'"});
  } else {
    try {
      table = builtin_table(spec.name);
    } catch (const Error&) {
      std::string names;
      for (const auto& t : builtin_tables()) names += (names.empty() ? "" : ", ") + t.dataset;
      d.push_back({path + ".name", "no builtin table '" + spec.name + "' (builtin: " + names + "); give a table file"});
      return;
    }
  }
  const auto t = table->true_combinations(), f = table->false_combinations();
  if (spec.size >= 2 && !can_balance(spec.size, t, f))
    d.push_back({path + ".size", "table '" + table->dataset + "' cannot supply " + std::to_string(spec.size) +
                                     " balanced statements (" + std::to_string(t) + " true, " + std::to_string(f) +
                                     " false combinations)"});
}

void check_positive(std::vector<Diagnostic>& d, const std::string& path, double v) {
  if (!(v > 0) || !std::isfinite(v)) d.push_back({path, "must be a positive finite number"});
}

void check_at_least(std::vector<Diagnostic>& d, const std::string& path, std::size_t v, std::size_t min) {
  if (v < min) d.push_back({path, "must be at least " + std::to_string(min)});
}

void check_fraction(std::vector<Diagnostic>& d, const std::string& path, double v) {
  if (!(v > 0 && v < 1)) d.push_back({path, "must lie strictly between 0 and 1"});
}

}  // namespace

std::vector<std::string> ExperimentConfig::positive_names() const {
  std::vector<std::string> out;
  for (const auto& s : datasets) out.push_back(s.name);
  return out;
}

std::vector<std::string> ExperimentConfig::negated_names() const {
  std::vector<std::string> out;
  for (const auto& s : datasets)
    if (s.negate) out.push_back("Neg" + s.name);
  return out;
}

std::string to_string(const Diagnostic& d) { return d.path + ": " + d.message; }

std::string apply_wrapper(const std::string& wrapper, const std::string& text) {
  static const std::string slot = "{statement}";
  const auto pos = wrapper.find(slot);
  require(pos != std::string::npos, ErrorKind::Configuration, "prompt_wrapper has no {statement} slot");
  return wrapper.substr(0, pos) + text + wrapper.substr(pos + slot.size());
}

ConfigParse parse_config(const json& j, const fs::path& base_dir) {
  std::vector<Diagnostic> d;
  ExperimentConfig c;
  Fields root(j, "", d);
  root.required("id");
  root.required("datasets");
  if (auto id = root.str("id")) {
    c.id = *id;
    if (!valid_id(c.id)) d.push_back({"id", "must be non-empty and use only letters, digits, '-', '_' or '.'"});
  }
  c.seed = root.u64("seed", 0);

  if (const json* ds = root.find("datasets")) {
    if (!ds->is_array()) {
      d.push_back({"datasets", "expected an array of dataset objects"});
    } else {
      for (std::size_t i = 0; i < ds->size(); ++i) {
        const std::string path = "datasets[" + std::to_string(i) + "]";
        Fields f((*ds)[i], path, d);
        f.required("name");
        DatasetSpec spec;
        spec.name = f.str("name").value_or("");
        spec.size = f.size("size", spec.size);
        spec.negate = f.boolean("negate", false);
        if (auto t = f.str("table")) spec.table = fs::path(*t).is_absolute() ? fs::path(*t) : base_dir / *t;
        f.finish();
        if (!spec.name.empty()) check_dataset(spec, path, d);
        c.datasets.push_back(std::move(spec));
      }
      std::set<std::string> names;
      for (std::size_t i = 0; i < c.datasets.size(); ++i)
        if (!c.datasets[i].name.empty() && !names.insert(c.datasets[i].name).second)
          d.push_back({"datasets[" + std::to_string(i) + "].name", "duplicate dataset '" + c.datasets[i].name + "'"});
      if (c.datasets.size() < 2)
        d.push_back({"datasets", "the leave-one-out grid needs at least two datasets"});
    }
  }

  if (const json* ch = root.find("chance")) {
    Fields f(*ch, "chance", d);
    c.chance.urns = f.size("urns", c.chance.urns);
    c.chance.holdout_fraction = f.number("holdout_fraction", c.chance.holdout_fraction);
    c.chance.epochs = f.size("epochs", c.chance.epochs);
    f.finish();
    if (c.chance.urns > 0) {
      check_fraction(d, "chance.holdout_fraction", c.chance.holdout_fraction);
      check_at_least(d, "chance.urns", c.chance.urns, 8);
      check_at_least(d, "chance.epochs", c.chance.epochs, 1);
    }
  }

  if (const json* lm = root.find("lm")) {
    Fields f(*lm, "lm", d);
    c.lm.d_model = f.size("d_model", c.lm.d_model);
    c.lm.n_layers = f.size("n_layers", c.lm.n_layers);
    c.lm.n_heads = f.size("n_heads", c.lm.n_heads);
    c.lm.context_len = f.size("context_len", c.lm.context_len);
    c.lm.vocab_size = f.size("vocab_size", c.lm.vocab_size);
    c.lm_train.steps = f.size("steps", c.lm_train.steps);
    c.lm_train.batch_size = f.size("batch_size", c.lm_train.batch_size);
    c.lm_train.step_size = f.number("step_size", c.lm_train.step_size);
    f.finish();
  }
  check_at_least(d, "lm.d_model", c.lm.d_model, 1);
  check_at_least(d, "lm.n_layers", c.lm.n_layers, 1);
  check_at_least(d, "lm.n_heads", c.lm.n_heads, 1);
  check_at_least(d, "lm.context_len", c.lm.context_len, 2);
  check_at_least(d, "lm.vocab_size", c.lm.vocab_size, 2);
  check_at_least(d, "lm.steps", c.lm_train.steps, 1);
  check_at_least(d, "lm.batch_size", c.lm_train.batch_size, 1);
  check_positive(d, "lm.step_size", c.lm_train.step_size);
  if (c.lm.n_heads >= 1 && c.lm.d_model % c.lm.n_heads != 0)
    d.push_back({"lm.n_heads", "lm.n_heads (" + std::to_string(c.lm.n_heads) + ") does not divide lm.d_model (" +
                                   std::to_string(c.lm.d_model) + ")"});

  if (const json* ls = root.find("layers")) {
    c.layers.clear();
    if (!ls->is_array()) d.push_back({"layers", "expected an array of negative integers"});
    else
      for (std::size_t i = 0; i < ls->size(); ++i) {
        const auto& e = (*ls)[i];
        if (!e.is_number_integer()) {
          d.push_back({"layers[" + std::to_string(i) + "]", "expected an integer"});
          continue;
        }
        c.layers.push_back(e.get<int>());
      }
  }
  if (c.layers.empty()) d.push_back({"layers", "at least one layer selector is needed"});
  {
    std::set<int> seen;
    const auto n = static_cast<int>(c.lm.n_layers);
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
      const int l = c.layers[i];
      const std::string path = "layers[" + std::to_string(i) + "]";
      if (l > -1 || l < -n)
        d.push_back({path, "layer selector " + std::to_string(l) + " is outside [-" + std::to_string(n) +
                               ", -1] for a " + std::to_string(n) + "-layer lm"});
      else if (!seen.insert(l).second)
        d.push_back({path, "duplicate layer selector " + std::to_string(l)});
    }
  }

  if (auto w = root.str("prompt_wrapper")) {
    c.prompt_wrapper = *w;
    if (count_occurrences(*w, "{statement}") != 1)
      d.push_back({"prompt_wrapper", "must contain {statement} exactly once"});
    else if (!w->ends_with("{statement}") && !w->ends_with("."))
      d.push_back({"prompt_wrapper", "must end with {statement} or '.' so the wrapped text keeps a final period"});
  }

  if (const json* p = root.find("probe")) {
    Fields f(*p, "probe", d);
    c.probe.hidden = f.sizes("hidden", c.probe.hidden);
    c.probe.epochs = f.size("epochs", c.probe.epochs);
    c.probe.batch_size = f.size("batch_size", c.probe.batch_size);
    c.probe.step_size = f.number("step_size", c.probe.step_size);
    c.probe.best_of = f.size("best_of", c.probe.best_of);
    c.probe.selection_fraction = f.number("selection_fraction", c.probe.selection_fraction);
    f.finish();
  }
  check_at_least(d, "probe.epochs", c.probe.epochs, 1);
  check_at_least(d, "probe.batch_size", c.probe.batch_size, 1);
  check_at_least(d, "probe.best_of", c.probe.best_of, 1);
  check_positive(d, "probe.step_size", c.probe.step_size);
  check_fraction(d, "probe.selection_fraction", c.probe.selection_fraction);

  if (const json* p = root.find("ccs")) {
    Fields f(*p, "ccs", d);
    c.ccs.hidden = f.sizes("hidden", c.ccs.hidden);
    c.ccs.restarts = f.size("restarts", c.ccs.restarts);
    c.ccs.steps = f.size("steps", c.ccs.steps);
    c.ccs.step_size = f.number("step_size", c.ccs.step_size);
    if (const json* ds = f.find("datasets")) {
      if (!ds->is_array()) d.push_back({"ccs.datasets", "expected an array of dataset names"});
      else
        for (std::size_t i = 0; i < ds->size(); ++i) {
          if (!(*ds)[i].is_string()) {
            d.push_back({"ccs.datasets[" + std::to_string(i) + "]", "expected a string"});
            continue;
          }
          c.ccs.datasets.push_back((*ds)[i].get<std::string>());
        }
    }
    f.finish();
  }
  check_at_least(d, "ccs.restarts", c.ccs.restarts, 1);
  check_at_least(d, "ccs.steps", c.ccs.steps, 1);
  check_positive(d, "ccs.step_size", c.ccs.step_size);
  for (std::size_t i = 0; i < c.ccs.datasets.size(); ++i) {
    const auto& name = c.ccs.datasets[i];
    bool ok = false;
    for (const auto& s : c.datasets) ok = ok || (s.name == name && s.negate);
    if (!ok)
      d.push_back({"ccs.datasets[" + std::to_string(i) + "]",
                   "'" + name + "' must name a dataset with \"negate\": true to form contrast pairs"});
  }

  if (const json* cal = root.find("calibration")) {
    Fields f(*cal, "calibration", d);
    c.calibration_bins = f.size("bins", c.calibration_bins);
    f.finish();
  }
  check_at_least(d, "calibration.bins", c.calibration_bins, 2);

  root.finish();
  ConfigParse out;
  out.diagnostics = std::move(d);
  if (out.diagnostics.empty()) out.config = std::move(c);
  return out;
}

ConfigParse parse_config_file(const fs::path& path, const json& overrides) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    return {std::nullopt, {{"<root>", std::string("not valid JSON: ") + e.what()}}};
  }
  if (j.is_object())
    for (const auto& [k, v] : overrides.items()) j[k] = v;
  return parse_config(j, path.parent_path());
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["id"] = c.id;
  j["seed"] = c.seed;
  j["datasets"] = nlohmann::ordered_json::array();
  for (const auto& s : c.datasets) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["size"] = s.size;
    e["negate"] = s.negate;
    if (s.table) e["table"] = s.table->string();
    j["datasets"].push_back(e);
  }
  j["chance"] = {{"urns", c.chance.urns}, {"holdout_fraction", c.chance.holdout_fraction}, {"epochs", c.chance.epochs}};
  j["lm"] = {{"d_model", c.lm.d_model},       {"n_layers", c.lm.n_layers},
             {"n_heads", c.lm.n_heads},       {"context_len", c.lm.context_len},
             {"vocab_size", c.lm.vocab_size}, {"steps", c.lm_train.steps},
             {"batch_size", c.lm_train.batch_size}, {"step_size", c.lm_train.step_size}};
  j["layers"] = c.layers;
  j["prompt_wrapper"] = c.prompt_wrapper ? nlohmann::ordered_json(*c.prompt_wrapper) : nlohmann::ordered_json();
  j["probe"] = {{"hidden", c.probe.hidden},       {"epochs", c.probe.epochs},   {"batch_size", c.probe.batch_size},
                {"step_size", c.probe.step_size}, {"best_of", c.probe.best_of}, {"selection_fraction", c.probe.selection_fraction}};
  j["ccs"] = {{"hidden", c.ccs.hidden},
              {"restarts", c.ccs.restarts},
              {"steps", c.ccs.steps},
              {"step_size", c.ccs.step_size},
              {"datasets", c.ccs.datasets}};
  j["calibration"] = {{"bins", c.calibration_bins}};
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(cfg).dump())));
  return buf;
}

}  // namespace vlab
