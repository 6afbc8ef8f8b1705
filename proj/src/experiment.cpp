#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <ostream>
#include <sstream>

#include <unistd.h>

#include "vlab/dataset_gen.hpp"
#include "vlab/eval.hpp"
#include "vlab/experiment.hpp"
#include "vlab/parallel.hpp"

namespace vlab {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out << text;
    out.close();
    require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Stage> deps(Stage s) {
  switch (s) {
    case Stage::Gen: return {};
    case Stage::TrainLm: return {Stage::Gen};
    case Stage::Embed: return {Stage::TrainLm};
    case Stage::TrainProbe:
    case Stage::TrainCcs: return {Stage::Embed};
    case Stage::Eval: return {Stage::TrainProbe, Stage::TrainCcs};
    case Stage::Report: return {Stage::Eval};
  }
  return {};
}

bool depends_on(Stage later, Stage earlier) {
  for (Stage d : deps(later))
    if (d == earlier || depends_on(d, earlier)) return true;
  return false;
}

std::string layer_tag(int layer) { return "layer" + std::to_string(layer); }

std::string file_safe(std::string s) {
  std::replace(s.begin(), s.end(), '^', '-');
  std::replace(s.begin(), s.end(), '/', '-');
  return s;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::size_t> probe_dims(std::size_t input, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> dims{input};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  return dims;
}

EmbeddingStore by_dataset(const EmbeddingStore& store, const std::string& name) {
  return store.filter([&](const Statement& s) { return s.dataset == name; });
}

// Both members of each D / NegD pair, and their pairing.
struct PairedSet {
  EmbeddingStore store;
  std::vector<ContrastPair> pairs;
};

PairedSet paired(const EmbeddingStore& store, const std::string& name) {
  PairedSet p{store.filter([&](const Statement& s) { return s.dataset == name || s.dataset == "Neg" + name; }), {}};
  p.pairs = make_contrast_pairs(p.store.statements);
  require(p.pairs.size() >= 2, ErrorKind::Data, "dataset " + name + " has fewer than two contrast pairs");
  return p;
}

std::vector<int> pair_labels(const std::vector<ContrastPair>& pairs) {
  std::vector<int> labels;
  for (const auto& p : pairs) {
    require(p.label.has_value(), ErrorKind::Data, "contrast pair without a label");
    labels.push_back(*p.label);
  }
  return labels;
}

std::uint64_t layer_seed(std::uint64_t base, int layer, const std::string& name) {
  return Rng(base).split(static_cast<std::uint64_t>(static_cast<std::int64_t>(layer))).split(name).next_u64();
}

}  // namespace

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Gen: return "gen";
    case Stage::TrainLm: return "train-lm";
    case Stage::Embed: return "embed";
    case Stage::TrainProbe: return "train-probe";
    case Stage::TrainCcs: return "train-ccs";
    case Stage::Eval: return "eval";
    case Stage::Report: return "report";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::Gen,      Stage::TrainLm, Stage::Embed, Stage::TrainProbe,
                                         Stage::TrainCcs, Stage::Eval,    Stage::Report};
  return stages;
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : all_stages())
    if (stage_name(s) == name) return s;
  return std::nullopt;
}

Experiment::Experiment(ExperimentConfig cfg, const fs::path& root, RunOptions opts)
    : cfg_(std::move(cfg)), opts_(opts), dir_(root / cfg_.id), hash_(config_hash(cfg_)) {
  fs::create_directories(dir_ / "stages");
  const fs::path lock = dir_ / ".lock";
  std::FILE* f = std::fopen(lock.c_str(), "wx");
  require(f != nullptr, ErrorKind::Io,
          dir_.string() + " is in use by another run; delete " + lock.string() + " if no run is active");
  std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
  std::fclose(f);
  locked_ = true;
  try {
    const fs::path manifest = dir_ / "manifest.json";
    if (fs::exists(manifest)) {
      const auto old = nlohmann::json::parse(read_text(manifest)).value("config_hash", std::string());
      if (old != hash_) {
        require(opts_.force, ErrorKind::Configuration,
                "experiment '" + cfg_.id + "' in " + dir_.string() + " was created from a different config (hash " +
                    old + ", now " + hash_ + "); use a new id or pass --force");
        for (Stage s : all_stages()) fs::remove(dir_ / "stages" / (std::string(stage_name(s)) + ".done"));
      }
    }
    ojson m;
    m["id"] = cfg_.id;
    m["config_hash"] = hash_;
    m["config"] = to_json(cfg_);
    write_text(manifest, m.dump(2) + "\n");
  } catch (...) {
    fs::remove(lock);
    throw;
  }
}

Experiment::~Experiment() {
  if (locked_) {
    std::error_code ec;
    fs::remove(dir_ / ".lock", ec);
  }
}

void Experiment::log(const std::string& line) const {
  if (opts_.log) *opts_.log << line << std::endl;
}

std::uint64_t Experiment::derived_seed(std::string_view purpose) const {
  return Rng(cfg_.seed).split(purpose).next_u64();
}

fs::path Experiment::store_dir(int layer) const { return dir_ / "stores" / layer_tag(layer); }

bool Experiment::done(Stage s) const {
  const fs::path marker = dir_ / "stages" / (std::string(stage_name(s)) + ".done");
  if (!fs::exists(marker)) return false;
  try {
    const auto j = nlohmann::json::parse(read_text(marker));
    if (j.value("config_hash", std::string()) != hash_) return false;
    for (const auto& out : j.at("outputs"))
      if (!fs::exists(dir_ / out.get<std::string>())) return false;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

bool Experiment::run(Stage s) {
  const std::string name(stage_name(s));
  if (!opts_.force && done(s)) {
    log(name + ": up to date");
    return false;
  }
  for (Stage d : deps(s))
    require(done(d), ErrorKind::Protocol,
            "stage " + name + " needs " + std::string(stage_name(d)) + " to have completed; run it first or use 'all'");
  const fs::path stages = dir_ / "stages";
  fs::remove(stages / (name + ".done"));
  fs::remove(stages / (name + ".failed"));
  for (Stage later : all_stages())
    if (depends_on(later, s)) fs::remove(stages / (std::string(stage_name(later)) + ".done"));

  log(name + ": running");
  std::vector<std::string> outputs;
  try {
    switch (s) {
      case Stage::Gen: outputs = gen(); break;
      case Stage::TrainLm: outputs = train_lm_stage(); break;
      case Stage::Embed: outputs = embed(); break;
      case Stage::TrainProbe: outputs = train_probe(); break;
      case Stage::TrainCcs: outputs = train_ccs_stage(); break;
      case Stage::Eval: outputs = eval(); break;
      case Stage::Report: outputs = report(); break;
    }
  } catch (const std::exception& e) {
    ojson f;
    f["stage"] = name;
    f["config_hash"] = hash_;
    f["error"] = e.what();
    write_text(stages / (name + ".failed"), f.dump(2) + "\n");
    throw;
  }
  ojson m;
  m["config_hash"] = hash_;
  m["outputs"] = outputs;
  write_text(stages / (name + ".done"), m.dump(2) + "\n");
  log(name + ": done");
  return true;
}

void Experiment::run_all() {
  for (Stage s : all_stages()) run(s);
}

std::vector<Statement> Experiment::load_statements() const {
  std::vector<Statement> all;
  auto append = [&](const std::string& name) {
    auto part = read_statements(dir_ / "datasets" / (name + ".jsonl"));
    all.insert(all.end(), part.begin(), part.end());
  };
  for (const auto& spec : cfg_.datasets) {
    append(spec.name);
    if (spec.negate) append("Neg" + spec.name);
  }
  if (cfg_.chance.urns > 0) append("Chance");
  return all;
}

std::map<int, EmbeddingStore> Experiment::load_stores() const {
  std::map<int, EmbeddingStore> out;
  for (int layer : cfg_.layers) out.emplace(layer, read_store(store_dir(layer)));
  return out;
}

std::vector<std::string> Experiment::gen() {
  std::vector<std::string> outputs;
  auto save = [&](const std::string& name, const std::vector<Statement>& st) {
    const std::string rel = "datasets/" + name + ".jsonl";
    fs::create_directories(dir_ / "datasets");
    write_statements(dir_ / rel, st);
    outputs.push_back(rel);
    log("gen: " + rel + " (" + std::to_string(st.size()) + " statements)");
  };
  const Rng gen_rng = Rng(cfg_.seed).split("gen");
  for (const auto& spec : cfg_.datasets) {
    const TemplateTable table = spec.table ? read_template_table(*spec.table) : builtin_table(spec.name);
    const auto st = generate_facts(table, spec.size, gen_rng.split(spec.name).next_u64());
    save(spec.name, st);
    if (spec.negate) {
      std::vector<Statement> neg;
      neg.reserve(st.size());
      for (const auto& s : st) neg.push_back(negate(s, table));
      save("Neg" + spec.name, neg);
    }
  }
  if (cfg_.chance.urns > 0)
    save("Chance", generate_chance_set(random_urns(cfg_.chance.urns, derived_seed("urns")), derived_seed("chance")));
  return outputs;
}

std::vector<std::string> Experiment::train_lm_stage() {
  std::vector<std::string> corpus;
  for (const auto& s : load_statements()) corpus.push_back(s.text);
  for (const auto& spec : cfg_.datasets) {
    const auto extra =
        paraphrase_corpus(spec.table ? read_template_table(*spec.table) : builtin_table(spec.name));
    corpus.insert(corpus.end(), extra.begin(), extra.end());
  }
  LmConfig lc = cfg_.lm;
  lc.seed = derived_seed("lm");
  LmTrainReport rep;
  const auto model = train_lm<float>(corpus, lc, cfg_.lm_train, &rep);
  fs::create_directories(dir_ / "lm");
  save_checkpoint(model, dir_ / "lm" / "model.vlab");
  ojson j;
  j["vocab_size"] = model.vocab().size();
  j["parameters"] = model.params().size();
  j["initial_loss"] = rep.initial_loss;
  j["final_loss"] = rep.final_loss;
  j["step_losses"] = rep.step_losses;
  write_text(dir_ / "lm" / "train.json", j.dump() + "\n");
  log("train-lm: corpus loss " + std::to_string(rep.initial_loss) + " -> " + std::to_string(rep.final_loss));
  return {"lm/model.vlab", "lm/train.json"};
}

std::vector<std::string> Experiment::embed() {
  const auto model = load_checkpoint<float>(dir_ / "lm" / "model.vlab");
  const auto statements = load_statements();
  std::vector<LayerSelector> selectors;
  for (int l : cfg_.layers) selectors.push_back({l});
  const auto n = static_cast<Eigen::Index>(statements.size());
  const auto d = static_cast<Eigen::Index>(model.config().d_model);
  std::vector<EmbeddingMatrix> mats(selectors.size(), EmbeddingMatrix(n, d));
  parallel_for(statements.size(), opts_.jobs, [&](std::size_t i) {
    const auto& text = statements[i].text;
    const auto vecs =
        extract_embeddings(model, cfg_.prompt_wrapper ? apply_wrapper(*cfg_.prompt_wrapper, text) : text, selectors);
    for (std::size_t k = 0; k < vecs.size(); ++k) mats[k].row(static_cast<Eigen::Index>(i)) = vecs[k].transpose();
  });
  std::vector<std::string> outputs;
  for (std::size_t k = 0; k < selectors.size(); ++k) {
    const int layer = cfg_.layers[k];
    auto store = EmbeddingStore::make(statements, mats[k], "toy-lm:" + hash_, layer);
    store.meta.prompt_wrapper = cfg_.prompt_wrapper;
    write_store(store, store_dir(layer));
    for (const char* f : {"meta.json", "statements.jsonl", "embeddings.bin"})
      outputs.push_back("stores/" + layer_tag(layer) + "/" + f);
    log("embed: " + layer_tag(layer) + " " + std::to_string(n) + " x " + std::to_string(d));
  }
  return outputs;
}

std::vector<std::string> Experiment::train_probe() {
  const auto by_layer = load_stores();
  const auto columns = grid_columns(cfg_.positive_names(), cfg_.negated_names());
  const auto master = derived_seed("probe");
  const fs::path grid_dir = dir_ / "probes" / "grid";
  fs::create_directories(grid_dir);

  std::mutex mu;
  std::map<std::uint64_t, std::vector<double>> selection;
  const ProbeFactory factory = [&](const EmbeddingStore& train, std::uint64_t seed) {
    const auto [fit, sel] = holdout_split(train.statements.size(), cfg_.probe.selection_fraction, seed);
    TrainConfig tc;
    tc.epochs = cfg_.probe.epochs;
    tc.batch_size = cfg_.probe.batch_size;
    tc.step_size = cfg_.probe.step_size;
    tc.seed = seed;
    const auto res = best_of_k(train.select(fit), tc, probe_dims(train.meta.dim, cfg_.probe.hidden),
                               cfg_.probe.best_of, train.select(sel));
    save_probe(res.best.probe, grid_dir / (hex(seed) + ".vprb"));
    std::lock_guard lock(mu);
    selection[seed] = res.selection_accuracies;
    return res.best.probe;
  };
  generalization_matrix(by_layer, columns, factory, master, opts_.jobs);

  std::vector<std::string> outputs;
  ojson index = ojson::array();
  for (auto it = by_layer.rbegin(); it != by_layer.rend(); ++it) {
    std::set<std::uint64_t> listed;
    for (const auto& col : columns) {
      const auto seed = cell_seed(master, it->first, col);
      if (!listed.insert(seed).second) continue;
      const std::string rel = "probes/grid/" + hex(seed) + ".vprb";
      outputs.push_back(rel);
      index.push_back({{"layer", it->first}, {"train", col.train}, {"seed", seed}, {"file", rel},
                       {"selection_accuracies", selection.at(seed)}});
    }
  }
  write_text(grid_dir / "index.json", index.dump(2) + "\n");
  outputs.push_back("probes/grid/index.json");
  log("train-probe: " + std::to_string(index.size()) + " grid probes");

  if (cfg_.chance.urns > 0) {
    for (const auto& [layer, store] : by_layer) {
      const auto chance = by_dataset(store, "Chance");
      const auto [fit, hold] = holdout_split(chance.statements.size(), cfg_.chance.holdout_fraction,
                                             derived_seed("chance-split"));
      TrainConfig tc;
      tc.epochs = cfg_.chance.epochs;
      tc.batch_size = cfg_.probe.batch_size;
      tc.step_size = cfg_.probe.step_size;
      tc.seed = layer_seed(derived_seed("chance-probe"), layer, "Chance");
      const auto res = train_supervised(chance.select(fit), tc, probe_dims(store.meta.dim, cfg_.probe.hidden));
      const std::string rel = "probes/chance/" + layer_tag(layer) + ".vprb";
      fs::create_directories(dir_ / "probes" / "chance");
      save_probe(res.probe, dir_ / rel);
      outputs.push_back(rel);
    }
  }
  return outputs;
}

std::vector<std::string> Experiment::train_ccs_stage() {
  const auto by_layer = load_stores();
  std::vector<std::string> outputs;
  fs::create_directories(dir_ / "probes" / "ccs");
  for (auto it = by_layer.rbegin(); it != by_layer.rend(); ++it) {
    const auto& [layer, store] = *it;
    for (const auto& name : cfg_.ccs.datasets) {
      const auto set = paired(store, name);
      const auto norm = normalize_by_class(set.store, set.pairs);
      CcsConfig cc;
      cc.restarts = cfg_.ccs.restarts;
      cc.steps = cfg_.ccs.steps;
      cc.step_size = cfg_.ccs.step_size;
      cc.seed = layer_seed(derived_seed("ccs"), layer, name);
      cc.jobs = opts_.jobs;
      const auto res = train_ccs(norm.pos, norm.neg, probe_dims(store.meta.dim, cfg_.ccs.hidden), cc);
      const std::string base = "probes/ccs/" + layer_tag(layer) + "_" + name;
      save_probe(res.probe, dir_ / (base + ".vprb"));
      ojson j;
      j["layer"] = layer;
      j["datasets"] = name + "/Neg" + name;
      j["loss"] = res.loss.total;
      j["best_restart"] = res.best_restart;
      j["restart_losses"] = res.restart_losses;
      write_text(dir_ / (base + ".json"), j.dump(2) + "\n");
      outputs.push_back(base + ".vprb");
      outputs.push_back(base + ".json");
      log("train-ccs: " + layer_tag(layer) + " " + name + " L_CCS " + std::to_string(res.loss.total));
    }
  }
  return outputs;
}

std::vector<std::string> Experiment::eval() {
  const auto by_layer = load_stores();
  const auto columns = grid_columns(cfg_.positive_names(), cfg_.negated_names());
  const auto master = derived_seed("probe");
  const fs::path grid_dir = dir_ / "probes" / "grid";
  auto load_grid_probe = [&](std::uint64_t seed) {
    const fs::path p = grid_dir / (hex(seed) + ".vprb");
    require(fs::exists(p), ErrorKind::Data, "no trained probe " + p.string() + "; rerun train-probe");
    return load_probe<double>(p);
  };
  const ProbeFactory loader = [&](const EmbeddingStore&, std::uint64_t seed) { return load_grid_probe(seed); };

  EvalReport r;
  r.experiment_id = cfg_.id;
  r.grid = generalization_matrix(by_layer, columns, loader, master, opts_.jobs);

  for (int layer : r.grid->layers) {
    const auto& store = by_layer.at(layer);
    for (const auto& col : columns) {
      const auto probe = load_grid_probe(cell_seed(master, layer, col));
      const auto test = by_dataset(store, col.test);
      const auto labels = store_labels(test);
      std::vector<int> y(static_cast<std::size_t>(labels.size()));
      for (Eigen::Index i = 0; i < labels.size(); ++i) y[static_cast<std::size_t>(i)] = labels(i) >= 0.5;
      r.calibration.push_back({layer, col.name, calibration_curve(predict(probe, test), y, cfg_.calibration_bins)});
    }
    for (const auto& name : cfg_.ccs.datasets) {
      const auto set = paired(store, name);
      const auto norm = normalize_by_class(set.store, set.pairs);
      const auto probe = load_probe<double>(dir_ / "probes" / "ccs" / (layer_tag(layer) + "_" + name + ".vprb"));
      const auto labels = pair_labels(set.pairs);
      std::vector<int> preds;
      for (const auto& p : ccs_predict_all(probe, norm.pos, norm.neg)) preds.push_back(p.label);
      CcsRecord rec;
      rec.layer = layer;
      rec.datasets = name + "/Neg" + name;
      rec.loss = ccs_loss(probe, norm.pos, norm.neg);
      rec.accuracy = flip_accuracy(preds, labels);
      rec.degeneracy = diagnose_degenerate(probe, norm.pos, norm.neg, labels);
      r.ccs.push_back(rec);
    }
    if (cfg_.chance.urns > 0) {
      const auto chance = by_dataset(store, "Chance");
      const auto [fit, hold] = holdout_split(chance.statements.size(), cfg_.chance.holdout_fraction,
                                             derived_seed("chance-split"));
      const auto probe = load_probe<double>(dir_ / "probes" / "chance" / (layer_tag(layer) + ".vprb"));
      r.chance.push_back({layer, chance_error(probe, chance.select(hold))});
    }
  }
  write_text(report_path(), render_jsonl(r));
  log("eval: wrote reports/report.jsonl");
  return {"reports/report.jsonl"};
}

std::vector<std::string> Experiment::report() {
  const auto r = parse_jsonl(read_text(report_path()));
  std::vector<std::string> outputs;
  const std::string tables = render_tables(r);
  write_text(dir_ / "reports" / "tables.txt", tables);
  outputs.push_back("reports/tables.txt");
  for (const auto& c : r.calibration) {
    const std::string rel = "reports/calibration/" + layer_tag(c.layer) + "_" + file_safe(c.dataset) + ".csv";
    write_text(dir_ / rel, calibration_csv(c.bins));
    outputs.push_back(rel);
  }
  log(tables);
  return outputs;
}

}  // namespace vlab
