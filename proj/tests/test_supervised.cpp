#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "support.hpp"
#include "vlab/rng.hpp"
#include "vlab/supervised.hpp"

using namespace vlab;
using vlab::testing::kind_of;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * rng.normal();
  return m;
}

PlantedStore truth_world(std::size_t pairs, std::uint64_t seed) {
  PlantSpec spec;
  spec.truth_strength = 5;
  return plant_store(spec, pairs, 32, seed);
}

}  // namespace

TEST_CASE("zero final layer gives exactly one half") {
  Rng rng(1);
  auto p = Probe::init({6, 5, 3, 1}, 3);
  p.weight(2).setZero();
  p.bias(2).setZero();
  for (int i = 0; i < 20; ++i) CHECK(p.forward_one(gaussian(6, 1, rng, 10).col(0)) == 0.5);
}

TEST_CASE("hand-set single layer probe") {
  Probe p({2, 1});
  p.weight(0) << 1, 0;
  Eigen::VectorXd v(2);
  v << 0, 9;
  CHECK(p.forward_one(v) == 0.5);
  CHECK(kind_of([&] { p.forward_one(Eigen::VectorXd::Zero(3)); }) == ErrorKind::Argument);
}

TEST_CASE("probe outputs stay strictly inside (0, 1)") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = Probe::init({6, 5, 3, 1}, static_cast<std::uint64_t>(trial));
    p.params() *= 1 + 50 * rng.uniform();
    const Eigen::VectorXd out = p.forward(gaussian(16, 6, rng, 100));
    CHECK(out.minCoeff() > 0);
    CHECK(out.maxCoeff() < 1);
  }
}

TEST_CASE("BCE gradient matches central differences on [6,5,3,1]") {
  Rng rng(3);
  double worst = 0;
  for (int draw = 0; draw < 100; ++draw) {
    Probe p({6, 5, 3, 1});
    p.params() = gaussian(p.params().size(), 1, rng).col(0);
    const Eigen::MatrixXd X = gaussian(8, 6, rng);
    Eigen::VectorXd y(8);
    for (int i = 0; i < 8; ++i) y(i) = static_cast<double>(rng.below(2));
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.params().size());
    bce_loss(p, X, y, &g);
    auto f = [&](const Eigen::VectorXd& theta) {
      Probe q = p;
      q.params() = theta;
      return bce_loss(q, X, y);
    };
    worst = std::max(worst, vlab::testing::relative_error(g, vlab::testing::numeric_gradient(f, p.params())));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("training is deterministic per seed and lowers the loss") {
  auto w = truth_world(300, 4);
  TrainConfig cfg;
  cfg.seed = 17;
  auto a = train_supervised(w.store, cfg, {32, 64, 32, 16, 1});
  auto b = train_supervised(w.store, cfg, {32, 64, 32, 16, 1});
  REQUIRE(a.probe.params().size() == b.probe.params().size());
  CHECK(std::memcmp(a.probe.params().data(), b.probe.params().data(),
                    sizeof(double) * static_cast<std::size_t>(a.probe.params().size())) == 0);
  CHECK(a.epoch_losses.size() == 5);
  CHECK(a.epoch_losses.back() <= a.epoch_losses.front());
  CHECK(a.final_loss <= a.initial_loss);
}

TEST_CASE("batch order is fixed by the seed, not by row order") {
  auto w = truth_world(100, 5);
  const Eigen::MatrixXd X = w.store.as_double();
  const Eigen::VectorXd y = store_labels(w.store);
  TrainConfig cfg;
  cfg.shuffle = false;
  cfg.batch_size = static_cast<std::size_t>(X.rows());
  // with one full batch per epoch the row order cannot matter beyond summation order
  Eigen::MatrixXd Xr = X.colwise().reverse();
  Eigen::VectorXd yr = y.reverse();
  auto a = train_supervised(X, y, cfg, {32, 8, 1});
  auto b = train_supervised(Xr, yr, cfg, {32, 8, 1});
  CHECK((a.probe.params() - b.probe.params()).cwiseAbs().maxCoeff() < 1e-9);
  cfg.shuffle = true;
  cfg.batch_size = 16;
  auto c = train_supervised(X, y, cfg, {32, 8, 1});
  auto d = train_supervised(Xr, yr, cfg, {32, 8, 1});
  CHECK(c.probe.params() != d.probe.params());
}

TEST_CASE("planted truth direction is learned to near perfect training accuracy") {
  auto w = truth_world(500, 6);
  auto r = train_supervised(w.store, TrainConfig{}, {32, 64, 32, 16, 1});
  CHECK(binary_accuracy(r.probe, w.store.as_double(), store_labels(w.store)) >= 0.99);
}

TEST_CASE("all-true labels drive the probe toward one") {
  Rng rng(7);
  const Eigen::MatrixXd X = gaussian(500, 8, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(500);
  TrainConfig cfg;
  cfg.epochs = 80;
  auto r = train_supervised(X, y, cfg, {8, 16, 1});
  CHECK(r.final_loss < 0.05);
}

TEST_CASE("labels independent of the embedding give chance held-out accuracy") {
  PlantSpec spec;
  spec.negation_strength = 5;
  auto w = plant_store(spec, 1000, 32, 8);
  auto pos = w.store.filter([](const Statement& s) { return s.polarity == Polarity::Positive; });
  auto [train_rows, hold_rows] = holdout_split(pos.statements.size(), 0.5, 1);
  REQUIRE(hold_rows.size() == 500);
  auto train = pos.select(train_rows);
  auto held = pos.select(hold_rows);
  auto r = train_supervised(train, TrainConfig{}, {32, 64, 32, 16, 1});
  const double acc = binary_accuracy(r.probe, held.as_double(), store_labels(held));
  CHECK(acc >= 0.4);
  CHECK(acc <= 0.6);
}

TEST_CASE("unlabeled statements are a data error") {
  auto w = truth_world(10, 1);
  w.store.statements[3].label.reset();
  CHECK(kind_of([&] { train_supervised(w.store, TrainConfig{}, {32, 4, 1}); }) == ErrorKind::Data);
}

TEST_CASE("non-finite training data is a numeric error naming the seed") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(10, 3);
  X(4, 1) = std::numeric_limits<double>::infinity();
  Eigen::VectorXd y = Eigen::VectorXd::Ones(10);
  TrainConfig cfg;
  cfg.seed = 5;
  try {
    best_of_k(X, y, cfg, {3, 4, 1}, 2, X, y);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).find("seed 5") != std::string::npos);
  }
}

TEST_CASE("bad train config is a configuration error") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::Configuration);
  cfg = TrainConfig{};
  cfg.step_size = 0;
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::Configuration);
}

TEST_CASE("best_of_k with k=1 is plain training") {
  auto w = truth_world(100, 2);
  TrainConfig cfg;
  cfg.seed = 3;
  auto a = best_of_k(w.store, cfg, {32, 8, 1}, 1, w.store);
  auto b = train_supervised(w.store, cfg, {32, 8, 1});
  CHECK(a.best.probe.params() == b.probe.params());
  CHECK(a.best_seed == 3);
}

TEST_CASE("best_of_k picks the maximum, ties to the lower seed, independent of jobs") {
  PlantSpec spec;
  spec.truth_strength = 0.3;
  spec.noise = 1.0;
  auto w = plant_store(spec, 200, 16, 3);
  auto sel = plant_store(spec, 100, 16, 4);
  TrainConfig cfg;
  cfg.seed = 10;
  auto a = best_of_k(w.store, cfg, {16, 8, 1}, 10, sel.store, 1);
  auto b = best_of_k(w.store, cfg, {16, 8, 1}, 10, sel.store, 3);
  CHECK(a.best.probe.params() == b.best.probe.params());
  CHECK(a.selection_accuracies == b.selection_accuracies);
  auto sorted = a.selection_accuracies;
  std::sort(sorted.begin(), sorted.end());
  const double best = a.selection_accuracies[a.best_seed - cfg.seed];
  CHECK(best >= sorted[5]);
  CHECK(best == sorted.back());
  for (std::size_t i = 0; i < a.best_seed - cfg.seed; ++i) CHECK(a.selection_accuracies[i] < best);

  // a trivially separable selection set makes every candidate tie at 1.0
  auto easy = truth_world(300, 5);
  cfg.epochs = 20;
  auto t = best_of_k(easy.store, cfg, {32, 8, 1}, 4, easy.store);
  CHECK(std::count(t.selection_accuracies.begin(), t.selection_accuracies.end(), 1.0) == 4);
  CHECK(t.best_seed == 10);
}

TEST_CASE("probe checkpoint roundtrip and version check") {
  auto p = Probe::init({6, 5, 3, 1}, 42);
  auto path = vlab::testing::scratch("probe.vprb");
  save_probe(p, path);
  auto q = load_probe<double>(path);
  CHECK(q.dims() == p.dims());
  CHECK(q.seed() == 42);
  CHECK(q.params() == p.params().cast<float>().cast<double>());
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char v[4] = {9, 0, 0, 0};
    f.write(v, 4);
  }
  CHECK(kind_of([&] { load_probe<double>(path); }) == ErrorKind::Version);
}

TEST_CASE("holdout split partitions rows deterministically") {
  auto [a, b] = holdout_split(100, 0.1, 3);
  CHECK(a.size() == 90);
  CHECK(b.size() == 10);
  auto [c, d] = holdout_split(100, 0.1, 3);
  CHECK(b == d);
  std::vector<Eigen::Index> all = a;
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (Eigen::Index i = 0; i < 100; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);
}
