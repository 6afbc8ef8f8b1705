#include "vlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vlab/error.hpp"
#include "vlab/parallel.hpp"
#include "vlab/rng.hpp"

namespace vlab {
using nlohmann::ordered_json;

double accuracy(const std::vector<double>& predictions, const std::vector<int>& labels, double threshold) {
  require(threshold > 0 && threshold < 1, ErrorKind::Argument, "threshold must lie in (0, 1)");
  require(predictions.size() == labels.size(), ErrorKind::Argument, "prediction and label counts differ");
  require(!labels.empty(), ErrorKind::Argument, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += (predictions[i] >= threshold) == (labels[i] == 1);
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<double> predict(const Probe& probe, const EmbeddingStore& store) {
  const Eigen::VectorXd p = probe.forward(store.as_double());
  return {p.data(), p.data() + p.size()};
}

namespace {

std::vector<int> hard_labels(const EmbeddingStore& store) {
  std::vector<int> y;
  y.reserve(store.statements.size());
  for (const auto& s : store.statements) {
    if (!s.label) fail(ErrorKind::Data, "statement " + s.id + " has no label");
    y.push_back(*s.label);
  }
  return y;
}

}  // namespace

double accuracy(const Probe& probe, const EmbeddingStore& store, double threshold) {
  const auto y = hard_labels(store);
  return accuracy(predict(probe, store), y, threshold);
}

std::size_t CalibrationBins::total() const {
  std::size_t n = 0;
  for (const auto& b : bins) n += b.count;
  return n;
}

CalibrationBins calibration_curve(const std::vector<double>& predictions, const std::vector<int>& labels,
                                  std::size_t n_bins) {
  require(n_bins >= 2, ErrorKind::Argument, "calibration needs at least 2 bins");
  require(predictions.size() == labels.size(), ErrorKind::Argument, "prediction and label counts differ");
  const double n = static_cast<double>(n_bins);
  auto edge = [&](std::size_t k) { return static_cast<double>(k) / n; };
  CalibrationBins out;
  out.bins.resize(n_bins);
  std::vector<double> sum_pred(n_bins, 0.0), sum_pos(n_bins, 0.0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = predictions[i];
    require(p >= 0 && p <= 1, ErrorKind::Argument, "prediction outside [0, 1] at index " + std::to_string(i));
    require(labels[i] == 0 || labels[i] == 1, ErrorKind::Argument, "labels must be 0 or 1");
    auto k = std::min(static_cast<std::size_t>(std::floor(p * n)), n_bins - 1);
    while (k > 0 && p < edge(k)) --k;
    while (k + 1 < n_bins && p >= edge(k + 1)) ++k;
    ++out.bins[k].count;
    sum_pred[k] += p;
    sum_pos[k] += labels[i];
  }
  for (std::size_t k = 0; k < n_bins; ++k) {
    auto& b = out.bins[k];
    b.lo = edge(k);
    b.hi = edge(k + 1);
    b.empty = b.count == 0;
    if (!b.empty) {
      b.mean_pred = sum_pred[k] / static_cast<double>(b.count);
      b.emp_freq = sum_pos[k] / static_cast<double>(b.count);
    }
  }
  return out;
}

std::string calibration_csv(const CalibrationBins& bins) {
  std::ostringstream out;
  out << "bin_mid,mean_pred,emp_freq,count\n";
  char buf[64];
  for (const auto& b : bins.bins) {
    std::snprintf(buf, sizeof buf, "%.4f", (b.lo + b.hi) / 2);
    out << buf << ',';
    if (!b.empty) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", b.mean_pred, b.emp_freq);
      out << buf;
    } else {
      out << ',';
    }
    out << ',' << b.count << '\n';
  }
  return out.str();
}

ChanceError chance_error(const std::vector<double>& predictions, const std::vector<Rational>& chances) {
  require(predictions.size() == chances.size(), ErrorKind::Argument, "prediction and chance counts differ");
  require(!chances.empty(), ErrorKind::Argument, "chance error of an empty set");
  struct Acc {
    std::size_t count = 0;
    long double pred = 0, abs = 0;
  };
  std::map<Rational, Acc> by_chance;
  long double abs = 0, sq = 0, base = 0;
  for (std::size_t i = 0; i < chances.size(); ++i) {
    const long double c = static_cast<long double>(chances[i].num) / static_cast<long double>(chances[i].den);
    const long double d = static_cast<long double>(predictions[i]) - c;
    abs += std::fabs(d);
    sq += d * d;
    base += std::fabs(0.5L - c);
    auto& a = by_chance[chances[i]];
    ++a.count;
    a.pred += predictions[i];
    a.abs += std::fabs(d);
  }
  const auto n = static_cast<long double>(chances.size());
  ChanceError e;
  e.mae = static_cast<double>(abs / n);
  e.brier = static_cast<double>(sq / n);
  e.baseline_mae = static_cast<double>(base / n);
  for (const auto& [c, a] : by_chance) {
    const auto k = static_cast<long double>(a.count);
    e.buckets.push_back({c, a.count, static_cast<double>(a.pred / k), static_cast<double>(a.abs / k)});
  }
  return e;
}

ChanceError chance_error(const Probe& probe, const EmbeddingStore& store) {
  std::vector<Rational> chances;
  for (const auto& s : store.statements) {
    if (!s.chance) fail(ErrorKind::Data, "statement " + s.id + " has no chance value");
    chances.push_back(*s.chance);
  }
  return chance_error(predict(probe, store), chances);
}

std::vector<GridColumn> grid_columns(const std::vector<std::string>& positive, const std::vector<std::string>& negated) {
  require(positive.size() >= 2, ErrorKind::Protocol, "a generalization grid needs at least 2 positive datasets");
  const std::set<std::string> pos_set(positive.begin(), positive.end());
  require(pos_set.size() == positive.size(), ErrorKind::Protocol, "duplicate positive dataset names");
  for (const auto& n : negated)
    require(n.rfind("Neg", 0) == 0 && pos_set.count(n.substr(3)), ErrorKind::Key,
            "negated dataset " + n + " has no positive counterpart");
  std::vector<GridColumn> cols;
  for (const auto& d : positive) {
    std::vector<std::string> others;
    for (const auto& o : positive)
      if (o != d) others.push_back(o);
    cols.push_back({d, d, others, 0});
    const std::string neg = "Neg" + d;
    if (std::find(negated.begin(), negated.end(), neg) == negated.end()) continue;
    cols.push_back({neg + "^1", neg, others, 1});
    std::vector<std::string> wide = positive;
    for (const auto& n : negated)
      if (n != neg) wide.push_back(n);
    cols.push_back({neg + "^2", neg, wide, 2});
  }
  return cols;
}

namespace {

std::string train_key(int layer, const GridColumn& c) {
  auto names = c.train;
  std::sort(names.begin(), names.end());
  std::string key = std::to_string(layer);
  for (const auto& n : names) key += "|" + n;
  return key;
}

EmbeddingStore subset(const EmbeddingStore& store, const std::vector<std::string>& datasets) {
  const std::set<std::string> want(datasets.begin(), datasets.end());
  return store.filter([&](const Statement& s) { return want.count(s.dataset) > 0; });
}

void check_present(const EmbeddingStore& store, int layer, const GridColumn& c) {
  std::set<std::string> have;
  for (const auto& s : store.statements) have.insert(s.dataset);
  auto need = c.train;
  need.push_back(c.test);
  for (const auto& d : need)
    require(have.count(d) > 0, ErrorKind::Key,
            "layer " + std::to_string(layer) + " store has no statements from dataset " + d);
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t seed, int layer, const GridColumn& column) {
  return Rng(seed).split(train_key(layer, column)).next_u64();
}

double grid_cell(const EmbeddingStore& store, int layer, const GridColumn& column, const ProbeFactory& factory,
                 std::uint64_t seed) {
  check_present(store, layer, column);
  const Probe probe = factory(subset(store, column.train), cell_seed(seed, layer, column));
  return accuracy(probe, subset(store, {column.test}));
}

GeneralizationGrid generalization_matrix(const std::map<int, EmbeddingStore>& by_layer,
                                         const std::vector<GridColumn>& columns, const ProbeFactory& factory,
                                         std::uint64_t seed, std::size_t jobs) {
  require(!columns.empty(), ErrorKind::Protocol, "no grid columns");
  GeneralizationGrid g;
  g.columns = columns;
  // higher layers first, matching -1, -4, -8 reading order
  for (auto it = by_layer.rbegin(); it != by_layer.rend(); ++it) g.layers.push_back(it->first);

  struct Task {
    int layer;
    const GridColumn* column;
  };
  std::vector<Task> tasks;
  std::map<std::string, std::size_t> task_of;
  for (int layer : g.layers)
    for (const auto& c : columns) {
      check_present(by_layer.at(layer), layer, c);
      if (task_of.emplace(train_key(layer, c), tasks.size()).second) tasks.push_back({layer, &c});
    }

  std::vector<std::optional<Probe>> probes(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const auto& t = tasks[i];
    probes[i] = factory(subset(by_layer.at(t.layer), t.column->train), cell_seed(seed, t.layer, *t.column));
  });

  for (int layer : g.layers) {
    std::vector<double> row;
    for (const auto& c : columns) {
      const auto& probe = *probes[task_of.at(train_key(layer, c))];
      row.push_back(accuracy(probe, subset(by_layer.at(layer), {c.test})));
    }
    g.accuracy.push_back(std::move(row));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Serialization

std::string render_jsonl(const EvalReport& r) {
  std::string out;
  auto emit = [&](const ordered_json& j) { out += j.dump() + "\n"; };
  emit({{"kind", "report"}, {"experiment_id", r.experiment_id}});
  if (r.grid) {
    emit({{"kind", "grid"}, {"layers", r.grid->layers}});
    for (const auto& c : r.grid->columns)
      emit({{"kind", "grid_column"}, {"name", c.name}, {"test", c.test}, {"train", c.train}, {"regime", c.regime}});
    for (std::size_t l = 0; l < r.grid->layers.size(); ++l)
      for (std::size_t c = 0; c < r.grid->columns.size(); ++c)
        emit({{"kind", "grid_cell"},
              {"layer", r.grid->layers[l]},
              {"column", r.grid->columns[c].name},
              {"accuracy", r.grid->accuracy[l][c]}});
  }
  for (const auto& rec : r.calibration)
    for (std::size_t k = 0; k < rec.bins.bins.size(); ++k) {
      const auto& b = rec.bins.bins[k];
      emit({{"kind", "calibration_bin"}, {"layer", rec.layer}, {"dataset", rec.dataset}, {"bin", k},
            {"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"mean_pred", b.mean_pred}, {"emp_freq", b.emp_freq},
            {"empty", b.empty}});
    }
  for (const auto& c : r.ccs)
    emit({{"kind", "ccs"},
          {"layer", c.layer},
          {"datasets", c.datasets},
          {"l_ccs", c.loss.total},
          {"l_confidence", c.loss.confidence},
          {"l_consistency", c.loss.consistency},
          {"accuracy", c.accuracy.accuracy},
          {"raw_accuracy", c.accuracy.raw},
          {"flipped", c.accuracy.flipped},
          {"mean_pos", c.degeneracy.mean_pos},
          {"mean_neg", c.degeneracy.mean_neg},
          {"gap", c.degeneracy.gap},
          {"diagnostic_accuracy", c.degeneracy.accuracy},
          {"polarity_coding", c.degeneracy.polarity_coding}});
  for (const auto& c : r.chance) {
    emit({{"kind", "chance"},
          {"layer", c.layer},
          {"mae", c.error.mae},
          {"brier", c.error.brier},
          {"baseline_mae", c.error.baseline_mae}});
    for (const auto& b : c.error.buckets)
      emit({{"kind", "chance_bucket"}, {"layer", c.layer}, {"num", b.chance.num}, {"den", b.chance.den},
            {"count", b.count}, {"mean_pred", b.mean_pred}, {"mae", b.mae}});
  }
  return out;
}

EvalReport parse_jsonl(const std::string& text) {
  EvalReport r;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = "report line " + std::to_string(lineno) + ": ";
    try {
      const auto j = ordered_json::parse(line);
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "report") {
        r.experiment_id = j.at("experiment_id").get<std::string>();
        seen_header = true;
      } else if (kind == "grid") {
        r.grid.emplace();
        r.grid->layers = j.at("layers").get<std::vector<int>>();
        r.grid->accuracy.assign(r.grid->layers.size(), {});
      } else if (kind == "grid_column") {
        require(r.grid.has_value(), ErrorKind::Malformed, where + "grid column before grid header");
        r.grid->columns.push_back({j.at("name").get<std::string>(), j.at("test").get<std::string>(),
                                   j.at("train").get<std::vector<std::string>>(), j.at("regime").get<int>()});
      } else if (kind == "grid_cell") {
        require(r.grid.has_value(), ErrorKind::Malformed, where + "grid cell before grid header");
        const int layer = j.at("layer").get<int>();
        const auto it = std::find(r.grid->layers.begin(), r.grid->layers.end(), layer);
        require(it != r.grid->layers.end(), ErrorKind::Malformed, where + "unknown layer");
        auto& row = r.grid->accuracy[static_cast<std::size_t>(it - r.grid->layers.begin())];
        require(row.size() < r.grid->columns.size() && r.grid->columns[row.size()].name == j.at("column"),
                ErrorKind::Malformed, where + "grid cell out of order");
        row.push_back(j.at("accuracy").get<double>());
      } else if (kind == "calibration_bin") {
        const int layer = j.at("layer").get<int>();
        const auto ds = j.at("dataset").get<std::string>();
        if (r.calibration.empty() || r.calibration.back().layer != layer || r.calibration.back().dataset != ds ||
            j.at("bin").get<std::size_t>() == 0)
          r.calibration.push_back({layer, ds, {}});
        r.calibration.back().bins.bins.push_back(
            {j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("count").get<std::size_t>(),
             j.at("mean_pred").get<double>(), j.at("emp_freq").get<double>(), j.at("empty").get<bool>()});
      } else if (kind == "ccs") {
        CcsRecord c;
        c.layer = j.at("layer").get<int>();
        c.datasets = j.at("datasets").get<std::string>();
        c.loss = {j.at("l_ccs").get<double>(), j.at("l_consistency").get<double>(),
                  j.at("l_confidence").get<double>()};
        c.accuracy = {j.at("accuracy").get<double>(), j.at("raw_accuracy").get<double>(),
                      j.at("flipped").get<bool>()};
        c.degeneracy = {j.at("mean_pos").get<double>(), j.at("mean_neg").get<double>(), j.at("gap").get<double>(),
                        j.at("diagnostic_accuracy").get<double>(), j.at("polarity_coding").get<bool>()};
        r.ccs.push_back(c);
      } else if (kind == "chance") {
        r.chance.push_back({j.at("layer").get<int>(),
                            {j.at("mae").get<double>(), j.at("brier").get<double>(),
                             j.at("baseline_mae").get<double>(), {}}});
      } else if (kind == "chance_bucket") {
        require(!r.chance.empty() && r.chance.back().layer == j.at("layer").get<int>(), ErrorKind::Malformed,
                where + "chance bucket without its summary");
        r.chance.back().error.buckets.push_back(
            {Rational::make(j.at("num").get<std::int64_t>(), j.at("den").get<std::int64_t>()),
             j.at("count").get<std::size_t>(), j.at("mean_pred").get<double>(), j.at("mae").get<double>()});
      } else {
        fail(ErrorKind::Malformed, where + "unknown record kind '" + kind + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Malformed, where + e.what());
    }
  }
  require(seen_header, ErrorKind::Malformed, "report has no header record");
  if (r.grid)
    for (const auto& row : r.grid->accuracy)
      require(row.size() == r.grid->columns.size(), ErrorKind::Malformed, "report grid is incomplete");
  return r;
}

// ---------------------------------------------------------------------------
// Text tables

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  else if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
  return s;
}

namespace {

std::string aligned(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return "";
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const std::string pad(width[c] - r[c].size(), ' ');
      if (c > 0) line += "  ";
      line += c == 0 ? r[c] + pad : pad + r[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string table_for(const GeneralizationGrid& g, const std::vector<std::size_t>& cols) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"Layer"};
  for (auto c : cols) head.push_back(g.columns[c].name);
  rows.push_back(head);
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    std::vector<std::string> row{std::to_string(g.layers[l])};
    for (auto c : cols) row.push_back(fmt3(g.accuracy[l][c]));
    rows.push_back(row);
  }
  return aligned(rows);
}

}  // namespace

std::string render_positive_table(const GeneralizationGrid& g) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < g.columns.size(); ++c)
    if (g.columns[c].regime == 0) cols.push_back(c);
  return table_for(g, cols);
}

std::string render_negation_table(const GeneralizationGrid& g) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < g.columns.size(); ++c) {
    if (g.columns[c].regime != 0) continue;
    const bool has_neg = c + 1 < g.columns.size() && g.columns[c + 1].regime != 0;
    if (!has_neg) continue;
    cols.push_back(c);
    for (std::size_t k = c + 1; k < g.columns.size() && g.columns[k].regime != 0; ++k) cols.push_back(k);
  }
  if (cols.empty()) return "";
  return table_for(g, cols);
}

std::string render_ccs_loss_table(const std::vector<CcsRecord>& records) {
  if (records.empty()) return "";
  std::vector<std::vector<std::string>> rows{
      {"Layer", "Datasets", "L_CCS", "L_Confidence", "L_Consistency", "Accuracy"}};
  for (const auto& r : records)
    rows.push_back({std::to_string(r.layer), r.datasets, fmt3(r.loss.total), fmt3(r.loss.confidence),
                    fmt3(r.loss.consistency), fmt3(r.accuracy.accuracy)});
  return aligned(rows);
}

std::string render_ccs_means_table(const std::vector<CcsRecord>& records) {
  if (records.empty()) return "";
  std::vector<std::vector<std::string>> rows{
      {"Layer", "Datasets", "Positive Prediction Avg", "Negative Prediction Avg", "Polarity coding"}};
  for (const auto& r : records)
    rows.push_back({std::to_string(r.layer), r.datasets, fmt3(r.degeneracy.mean_pos), fmt3(r.degeneracy.mean_neg),
                    r.degeneracy.polarity_coding ? "yes" : "no"});
  return aligned(rows);
}

std::string render_chance_table(const std::vector<ChanceRecord>& records) {
  if (records.empty()) return "";
  std::vector<std::vector<std::string>> rows{{"Layer", "MAE", "Brier", "Constant 0.5 MAE"}};
  for (const auto& r : records)
    rows.push_back({std::to_string(r.layer), fmt3(r.error.mae), fmt3(r.error.brier), fmt3(r.error.baseline_mae)});
  return aligned(rows);
}

std::string render_tables(const EvalReport& r) {
  std::string out = "Experiment " + r.experiment_id + "\n";
  auto section = [&](const std::string& title, const std::string& body) {
    if (!body.empty()) out += "\n" + title + "\n" + body;
  };
  if (r.grid) {
    section("Held-out accuracy by layer", render_positive_table(*r.grid));
    section("Negation generalization", render_negation_table(*r.grid));
  }
  section("CCS losses and accuracy", render_ccs_loss_table(r.ccs));
  section("CCS class means", render_ccs_means_table(r.ccs));
  section("Chance prediction error", render_chance_table(r.chance));
  return out;
}

}  // namespace vlab
