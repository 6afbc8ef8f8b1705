#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "vlab/eval.hpp"
#include "vlab/rng.hpp"

using namespace vlab;
using vlab::testing::kind_of;

namespace {

ProbeFactory small_factory(std::size_t dim, std::size_t epochs = 5) {
  return [dim, epochs](const EmbeddingStore& train, std::uint64_t seed) {
    TrainConfig c;
    c.seed = seed;
    c.epochs = epochs;
    return train_supervised(train, c, {dim, 16, 1}).probe;
  };
}

EmbeddingStore labeled_store(const std::vector<int>& labels, std::size_t dim = 1) {
  std::vector<Statement> st;
  EmbeddingMatrix m(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Statement s;
    s.id = "S-" + std::to_string(i);
    s.text = "Statement " + std::to_string(i) + ".";
    s.label = labels[i];
    s.dataset = "S";
    st.push_back(s);
    m.row(static_cast<Eigen::Index>(i)).setConstant(labels[i] ? 50.f : -50.f);
  }
  return EmbeddingStore::make(st, m, "test", -1);
}

Probe identity_probe() {
  Probe p({1, 1});
  p.weight(0)(0, 0) = 1;
  return p;
}

}  // namespace

TEST_CASE("accuracy examples") {
  const auto store = labeled_store({1, 0, 1, 1, 0});
  CHECK(accuracy(identity_probe(), store) == 1.0);
  const Probe half({1, 1});
  CHECK(accuracy(half, labeled_store({1, 1, 1})) == 1.0);
  CHECK(accuracy(half, labeled_store({0, 0, 0})) == 0.0);
  CHECK(kind_of([&] { accuracy(half, store, 1.0); }) == ErrorKind::Argument);
  auto unlabeled = store;
  unlabeled.statements[2].label.reset();
  unlabeled.statements[2].chance = Rational::make(1, 2);
  CHECK(kind_of([&] { accuracy(half, unlabeled); }) == ErrorKind::Data);
}

TEST_CASE("perfect predictor is perfectly calibrated") {
  Rng rng(1);
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) y.push_back(static_cast<int>(rng.below(2)));
  const std::vector<double> p(y.begin(), y.end());
  const auto bins = calibration_curve(p, y, 10);
  for (const auto& b : bins.bins)
    if (!b.empty) CHECK(std::abs(b.mean_pred - b.emp_freq) == 0.0);
  CHECK(bins.bins.size() == 10);
  CHECK(bins.total() == 200);
}

TEST_CASE("constant one-half predictions land in one bin") {
  const std::vector<double> p(10, 0.5);
  const std::vector<int> y = {1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
  const auto bins = calibration_curve(p, y, 10);
  int nonempty = 0;
  for (const auto& b : bins.bins)
    if (!b.empty) {
      ++nonempty;
      CHECK(b.emp_freq == 0.5);
      CHECK(b.lo == 0.5);
    }
  CHECK(nonempty == 1);
}

TEST_CASE("six hand-made predictions over three bins") {
  const auto bins = calibration_curve({0.1, 0.2, 0.4, 0.5, 0.9, 1.0}, {0, 1, 0, 1, 1, 1}, 3);
  REQUIRE(bins.bins.size() == 3);
  CHECK(bins.bins[0].count == 2);
  CHECK(bins.bins[0].mean_pred == doctest::Approx(0.15));
  CHECK(bins.bins[0].emp_freq == 0.5);
  CHECK(bins.bins[1].count == 2);
  CHECK(bins.bins[1].mean_pred == doctest::Approx(0.45));
  CHECK(bins.bins[1].emp_freq == 0.5);
  CHECK(bins.bins[2].count == 2);
  CHECK(bins.bins[2].mean_pred == doctest::Approx(0.95));
  CHECK(bins.bins[2].emp_freq == 1.0);
}

TEST_CASE("bin edges: left closed, last bin right closed, empty bins kept") {
  const auto bins = calibration_curve({0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}, {0, 0, 1, 1}, 3);
  CHECK(bins.bins[0].count == 1);
  CHECK(bins.bins[1].count == 1);
  CHECK(bins.bins[2].count == 2);
  const auto sparse = calibration_curve({0.05, 0.95}, {0, 1}, 10);
  CHECK(sparse.bins.size() == 10);
  CHECK(sparse.bins[4].empty);
  CHECK(sparse.bins[4].count == 0);
  CHECK(kind_of([] { calibration_curve({0.5}, {1, 0}, 10); }) == ErrorKind::Argument);
  CHECK(kind_of([] { calibration_curve({0.5}, {1}, 1); }) == ErrorKind::Argument);
  CHECK(kind_of([] { calibration_curve({1.5}, {1}, 4); }) == ErrorKind::Argument);
}

TEST_CASE("calibration conserves counts and positives") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = rng.below(60);
    const auto nb = 2 + rng.below(19);
    std::vector<double> p;
    std::vector<int> y;
    int positives = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      // mix of continuous values and exact bin edges
      p.push_back(rng.below(4) == 0 ? static_cast<double>(rng.below(nb + 1)) / static_cast<double>(nb)
                                    : rng.uniform());
      y.push_back(static_cast<int>(rng.below(2)));
      positives += y.back();
    }
    const auto bins = calibration_curve(p, y, nb);
    CHECK(bins.total() == n);
    double pos = 0;
    for (const auto& b : bins.bins) {
      pos += static_cast<double>(b.count) * b.emp_freq;
      if (!b.empty) {
        CHECK(b.mean_pred >= b.lo);
        CHECK(b.mean_pred <= b.hi);
      }
    }
    CHECK(std::abs(pos - positives) <= 1e-9);
  }
}

TEST_CASE("calibration CSV columns") {
  const auto csv = calibration_csv(calibration_curve({0.1, 0.9}, {0, 1}, 2));
  CHECK(csv == "bin_mid,mean_pred,emp_freq,count\n0.2500,0.100000,0.000000,1\n0.7500,0.900000,1.000000,1\n");
  const auto empty = calibration_csv(calibration_curve({0.1}, {0}, 2));
  CHECK(empty.find("0.7500,,,0\n") != std::string::npos);
}

TEST_CASE("chance error") {
  const std::vector<Rational> chances = {Rational::make(0, 1), Rational::make(2, 5), Rational::make(1, 1)};
  const auto exact = chance_error({0.0, 0.4, 1.0}, chances);
  CHECK(exact.mae <= 1e-16);
  const auto half = chance_error({0.5, 0.5, 0.5}, chances);
  CHECK(half.mae == 11.0 / 30.0);
  CHECK(half.baseline_mae == 11.0 / 30.0);
  CHECK(half.brier == doctest::Approx((0.25 + 0.01 + 0.25) / 3));
  REQUIRE(half.buckets.size() == 3);
  CHECK(half.buckets[1].chance == Rational::make(2, 5));
  CHECK(half.buckets[1].mae == doctest::Approx(0.1));
  const Probe p({1, 1});
  CHECK(kind_of([&] { chance_error(p, labeled_store({1, 0})); }) == ErrorKind::Data);
}

TEST_CASE("grid columns follow the two negation regimes") {
  const auto cols = grid_columns({"Facts", "Companies", "Cities"}, {"NegFacts", "NegCompanies"});
  REQUIRE(cols.size() == 7);
  CHECK(cols[0].name == "Facts");
  CHECK(cols[0].train == std::vector<std::string>{"Companies", "Cities"});
  CHECK(cols[1].name == "NegFacts^1");
  CHECK(cols[1].test == "NegFacts");
  CHECK(cols[1].train == cols[0].train);
  CHECK(cols[2].name == "NegFacts^2");
  CHECK(cols[2].train == std::vector<std::string>{"Facts", "Companies", "Cities", "NegCompanies"});
  CHECK(cols[3].name == "Companies");
  CHECK(cols[5].train == std::vector<std::string>{"Facts", "Companies", "Cities", "NegFacts"});
  CHECK(cols[6].name == "Cities");
  CHECK(kind_of([] { grid_columns({"Facts"}, {}); }) == ErrorKind::Protocol);
  CHECK(kind_of([] { grid_columns({"Facts", "Cities"}, {"NegOceans"}); }) == ErrorKind::Key);
}

TEST_CASE("three datasets by two layers") {
  PlantSpec spec;
  spec.truth_strength = 2;
  spec.noise = 0.5;
  spec.datasets = {"A", "B", "C"};
  std::map<int, EmbeddingStore> by_layer;
  by_layer[-1] = plant_store(spec, 90, 8, 1).store;
  by_layer[-4] = plant_store(spec, 90, 8, 2).store;
  const auto cols = grid_columns({"A", "B", "C"}, {});
  const auto g = generalization_matrix(by_layer, cols, small_factory(8), 5);
  CHECK(g.layers == std::vector<int>{-1, -4});
  REQUIRE(g.accuracy.size() == 2);
  for (const auto& row : g.accuracy) {
    REQUIRE(row.size() == 3);
    for (double a : row) {
      CHECK(a >= 0);
      CHECK(a <= 1);
    }
  }
  CHECK(generalization_matrix(by_layer, cols, small_factory(8), 5, 3) == g);
  // any cell alone, with its own seed, matches the full run
  CHECK(grid_cell(by_layer.at(-4), -4, cols[1], small_factory(8), 5) == g.accuracy[1][1]);
  CHECK(kind_of([&] { generalization_matrix(by_layer, grid_columns({"A", "Z"}, {}), small_factory(8), 5); }) ==
        ErrorKind::Key);
}

TEST_CASE("true-and-unnegated world: positives generalize, negations do not") {
  PlantSpec spec;
  spec.conjunction_strength = 5;
  spec.datasets = {"A", "B", "C"};
  std::map<int, EmbeddingStore> by_layer{{-1, plant_store(spec, 600, 16, 3).store}};
  const auto cols = grid_columns({"A", "B", "C"}, {"NegA", "NegB", "NegC"});
  const auto g = generalization_matrix(by_layer, cols, small_factory(16, 40), 9);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].regime == 0) CHECK(g.accuracy[0][c] >= 0.9);
    else CHECK(g.accuracy[0][c] <= 0.6);
  }
  const auto table = render_negation_table(g);
  CHECK(table.find("NegA^1") != std::string::npos);
  CHECK(table.find("NegC^2") != std::string::npos);
}

TEST_CASE("number format") {
  CHECK(fmt3(0.722) == ".722");
  CHECK(fmt3(1.0) == "1.000");
  CHECK(fmt3(0.00004) == ".000");
  CHECK(fmt3(-0.5) == "-.500");
  CHECK(fmt3(-0.0000001) == ".000");
}

TEST_CASE("report roundtrip and tables") {
  EvalReport r;
  r.experiment_id = "demo";
  GeneralizationGrid g;
  g.layers = {-1, -4};
  g.columns = grid_columns({"Facts", "Companies"}, {"NegFacts"});
  g.accuracy = {{0.826, 0.408, 0.526, 0.722}, {0.821, 0.373, 0.568, 0.766}};
  r.grid = g;
  r.calibration.push_back({-1, "Facts", calibration_curve({0.1, 0.7, 0.71}, {0, 1, 0}, 4)});
  r.calibration.push_back({-4, "Facts", calibration_curve({0.3}, {1}, 4)});
  CcsRecord c;
  c.layer = -1;
  c.datasets = "Facts/NegFacts";
  c.loss = {0.009, 0.005, 0.004};
  c.accuracy = flip_accuracy({1, 1, 0, 1}, {0, 0, 1, 1});
  c.degeneracy = diagnose_degenerate(0.968, 0.035, c.accuracy.accuracy);
  r.ccs.push_back(c);
  r.chance.push_back({-1, chance_error({0.5, 0.5, 0.5}, {Rational::make(0, 1), Rational::make(2, 5),
                                                         Rational::make(1, 1)})});
  const auto text = render_jsonl(r);
  CHECK(parse_jsonl(text) == r);
  CHECK(parse_jsonl(render_jsonl(EvalReport{"empty", {}, {}, {}, {}})) == EvalReport{"empty", {}, {}, {}, {}});

  const auto tables = render_tables(r);
  CHECK(tables.find("Layer  Facts  Companies\n") != std::string::npos);
  CHECK(tables.find("-1      .826       .722\n") != std::string::npos);
  CHECK(tables.find("Layer  Facts  NegFacts^1  NegFacts^2\n") != std::string::npos);
  CHECK(tables.find(".968") != std::string::npos);
  CHECK(kind_of([] { parse_jsonl("{\"kind\":\"mystery\"}\n"); }) == ErrorKind::Malformed);
  CHECK(kind_of([] { parse_jsonl("not json\n"); }) == ErrorKind::Malformed);
}
