#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "support.hpp"
#include "vlab/ccs.hpp"
#include "vlab/rng.hpp"

using namespace vlab;
using vlab::testing::kind_of;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

// 1-in, 1-out probe with unit weight: output = sigmoid(x), so inputs can be chosen by their logit
Probe identity_probe() {
  Probe p({1, 1});
  p.weight(0)(0, 0) = 1;
  return p;
}

Eigen::MatrixXd logits(std::initializer_list<double> ps) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(ps.size()), 1);
  Eigen::Index i = 0;
  for (double p : ps) m(i++, 0) = std::log(p / (1 - p));
  return m;
}

std::vector<int> pair_labels(const std::vector<ContrastPair>& pairs) {
  std::vector<int> out;
  for (const auto& p : pairs) out.push_back(*p.label);
  return out;
}

}  // namespace

TEST_CASE("class normalization examples") {
  Eigen::MatrixXd pos(2, 2), neg(2, 2);
  pos << 1, 5, 3, 5;
  neg << 0, 2, 4, 2;
  auto n = normalize_by_class(pos, neg);
  CHECK(n.pos(0, 0) == -1);
  CHECK(n.pos(1, 0) == 1);
  CHECK(n.pos(0, 1) == 0);
  CHECK(n.pos(1, 1) == 0);
  CHECK(n.neg(0, 0) == -1);
  CHECK(n.neg.col(1).isZero());
  CHECK(n.stats.std_pos(1) == 0);
  CHECK(kind_of([&] { normalize_by_class(pos.topRows(1), neg.topRows(1)); }) == ErrorKind::Argument);
}

TEST_CASE("normalized moments recomputed independently") {
  Rng rng(1);
  Eigen::MatrixXd pos = gaussian(100, 8, rng) * 3, neg = gaussian(100, 8, rng);
  pos.array() += 7;
  neg.col(3).setConstant(2.5);
  auto n = normalize_by_class(pos, neg);
  for (const Eigen::MatrixXd* m : {&n.pos, &n.neg}) {
    for (Eigen::Index j = 0; j < 8; ++j) {
      double mean = 0, sq = 0;
      for (Eigen::Index i = 0; i < 100; ++i) mean += (*m)(i, j);
      mean /= 100;
      for (Eigen::Index i = 0; i < 100; ++i) sq += ((*m)(i, j) - mean) * ((*m)(i, j) - mean);
      CHECK(std::abs(mean) <= 1e-9);
      if (m == &n.neg && j == 3) CHECK(sq == 0);
      else CHECK(std::abs(std::sqrt(sq / 100) - 1) <= 1e-6);
    }
  }
}

TEST_CASE("consistency and confidence examples") {
  CHECK(consistency_loss(0.7, 0.3) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(consistency_loss(1.0, 1.0) == 1.0);
  CHECK(consistency_loss(0.6, 0.6) == doctest::Approx(0.04));
  CHECK(confidence_loss(0.9, 0.1) == doctest::Approx(0.01));
  CHECK(confidence_loss(0.5, 0.5) == 0.25);
  CHECK(confidence_loss(0.0, 1.0) == 0.0);
  CHECK(kind_of([] { consistency_loss(1.1, 0.2); }) == ErrorKind::Argument);
  CHECK(kind_of([] { confidence_loss(0.2, -0.1); }) == ErrorKind::Argument);
}

TEST_CASE("swap symmetry and bounds on the unit square") {
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    CHECK(consistency_loss(a, b) == consistency_loss(b, a));
    CHECK(confidence_loss(a, b) == confidence_loss(b, a));
    CHECK(consistency_loss(a, b) >= 0);
    CHECK(consistency_loss(a, b) <= 1);
    CHECK(confidence_loss(a, b) >= 0);
    CHECK(confidence_loss(a, b) <= 1);
  }
}

TEST_CASE("constant one-half probe is the exact degenerate anchor") {
  Rng rng(3);
  Probe p({6, 5, 1});
  const auto l = ccs_loss(p, gaussian(40, 6, rng), gaussian(40, 6, rng));
  CHECK(l.total == 0.25);
  CHECK(l.consistency == 0.0);
  CHECK(l.confidence == 0.25);
}

TEST_CASE("perfectly coherent probe has zero loss") {
  Probe p({1, 1});
  p.weight(0)(0, 0) = 1000;
  const auto l = ccs_loss(p, Eigen::MatrixXd::Ones(5, 1), -Eigen::MatrixXd::Ones(5, 1));
  CHECK(l.total <= 1e-30);
}

TEST_CASE("two hand-set pairs") {
  // pairs (0.5, 0.2) and (0.75, 0.5): (0.09 + 0.04 + 0.0625 + 0.25) / 2
  const auto l = ccs_loss(identity_probe(), logits({0.5, 0.75}), logits({0.2, 0.5}));
  CHECK(l.consistency == doctest::Approx((0.09 + 0.0625) / 2).epsilon(1e-12));
  CHECK(l.confidence == doctest::Approx((0.04 + 0.25) / 2).epsilon(1e-12));
  CHECK(l.total == doctest::Approx(0.22125).epsilon(1e-12));
  CHECK(kind_of([] { ccs_loss(identity_probe(), Eigen::MatrixXd(0, 1), Eigen::MatrixXd(0, 1)); }) ==
        ErrorKind::Argument);
}

TEST_CASE("CCS gradient matches central differences on [6,5,1]") {
  Rng rng(4);
  double worst = 0;
  for (int draw = 0; draw < 100; ++draw) {
    Probe p({6, 5, 1});
    p.params() = gaussian(p.params().size(), 1, rng).col(0);
    const Eigen::MatrixXd pos = gaussian(8, 6, rng), neg = gaussian(8, 6, rng);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.params().size());
    ccs_loss(p, pos, neg, &g);
    auto f = [&](const Eigen::VectorXd& theta) {
      Probe q = p;
      q.params() = theta;
      return ccs_loss(q, pos, neg).total;
    };
    worst = std::max(worst, vlab::testing::relative_error(g, vlab::testing::numeric_gradient(f, p.params())));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("prediction rule") {
  const auto p = identity_probe();
  auto at = [&](double a, double b) { return ccs_predict(p, logits({a}).col(0), logits({b}).col(0)); };
  CHECK(at(0.9, 0.1).score == doctest::Approx(0.9));
  CHECK(at(0.9, 0.1).label == 1);
  CHECK(at(0.5, 0.5).score == 0.5);
  CHECK(at(0.5, 0.5).label == 1);
  CHECK(at(0.2, 0.9).score == doctest::Approx(0.15));
  CHECK(at(0.2, 0.9).label == 0);
  CHECK(kind_of([&] { ccs_predict(p, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)); }) == ErrorKind::Argument);
}

TEST_CASE("flip accuracy") {
  std::vector<int> labels(10, 1);
  auto with_hits = [&](int hits) {
    std::vector<int> pred(10, 0);
    for (int i = 0; i < hits; ++i) pred[static_cast<std::size_t>(i)] = 1;
    return flip_accuracy(pred, labels);
  };
  CHECK(with_hits(4).accuracy == doctest::Approx(0.6));
  CHECK(with_hits(4).flipped);
  CHECK(with_hits(5).accuracy == 0.5);
  CHECK_FALSE(with_hits(5).flipped);
  CHECK(with_hits(9).accuracy == doctest::Approx(0.9));
  CHECK(kind_of([] { flip_accuracy({1, 0}, {1}); }) == ErrorKind::Argument);
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    std::vector<int> a(7), b(7);
    for (int i = 0; i < 7; ++i) a[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
    for (int i = 0; i < 7; ++i) b[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
    CHECK(flip_accuracy(a, b).accuracy >= 0.5);
  }
}

TEST_CASE("degeneracy flag on published class means") {
  CHECK(diagnose_degenerate(0.968, 0.035, 0.552).polarity_coding);
  CHECK(diagnose_degenerate(0.990, 0.012, 0.568).polarity_coding);
  const auto r = diagnose_degenerate(0.389, 0.601, 0.502);
  CHECK_FALSE(r.polarity_coding);
  CHECK(r.gap == doctest::Approx(0.212));
}

TEST_CASE("a perfect truth probe on balanced pairs is not flagged") {
  // x+ carries the truth value, x- its complement; the probe reads it off directly
  Eigen::MatrixXd pos(100, 1), neg(100, 1);
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) {
    const int y = i % 2;
    labels.push_back(y);
    pos(i, 0) = y ? 20 : -20;
    neg(i, 0) = -pos(i, 0);
  }
  const auto r = diagnose_degenerate(identity_probe(), pos, neg, labels);
  CHECK(r.mean_pos == doctest::Approx(0.5));
  CHECK(r.mean_neg == doctest::Approx(0.5));
  CHECK(r.accuracy == 1.0);
  CHECK_FALSE(r.polarity_coding);
}

TEST_CASE("training never sees labels") {
  PlantSpec spec;
  spec.truth_strength = 5;
  auto w = plant_store(spec, 60, 8, 6);
  auto pairs = make_contrast_pairs(w.store.statements);
  auto corrupted = pairs;
  Rng rng(7);
  for (auto& p : corrupted) p.label = static_cast<int>(rng.below(2));
  auto shuffled_store = w.store;
  for (auto& s : shuffled_store.statements) s.label = 1;
  CcsConfig cfg;
  cfg.restarts = 2;
  cfg.steps = 50;
  auto a = normalize_by_class(w.store, pairs);
  auto b = normalize_by_class(shuffled_store, corrupted);
  auto ra = train_ccs(a.pos, a.neg, {8, 10, 1}, cfg);
  auto rb = train_ccs(b.pos, b.neg, {8, 10, 1}, cfg);
  REQUIRE(ra.probe.params().size() == rb.probe.params().size());
  CHECK(std::memcmp(ra.probe.params().data(), rb.probe.params().data(),
                    sizeof(double) * static_cast<std::size_t>(ra.probe.params().size())) == 0);
}

TEST_CASE("more restarts never do worse, and parallel restarts match serial") {
  Rng rng(8);
  const Eigen::MatrixXd pos = gaussian(50, 6, rng), neg = gaussian(50, 6, rng);
  CcsConfig cfg;
  cfg.steps = 100;
  cfg.restarts = 1;
  auto one = train_ccs(pos, neg, {6, 5, 1}, cfg);
  cfg.restarts = 8;
  auto eight = train_ccs(pos, neg, {6, 5, 1}, cfg);
  CHECK(eight.loss.total <= one.loss.total);
  CHECK(eight.restart_losses[0] == one.loss.total);
  cfg.jobs = 3;
  auto par = train_ccs(pos, neg, {6, 5, 1}, cfg);
  CHECK(par.restart_losses == eight.restart_losses);
  CHECK(par.best_restart == eight.best_restart);
}

TEST_CASE("non-finite inputs are a numeric error naming the restart") {
  Eigen::MatrixXd pos = Eigen::MatrixXd::Ones(4, 2), neg = Eigen::MatrixXd::Zero(4, 2);
  pos(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CcsConfig cfg;
  cfg.restarts = 1;
  cfg.steps = 3;
  try {
    train_ccs(pos, neg, {2, 3, 1}, cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).find("restart 0") != std::string::npos);
  }
}

TEST_CASE("small planted worlds: truth is found, negation coding is degenerate") {
  CcsConfig cfg;
  cfg.restarts = 2;
  cfg.steps = 500;
  cfg.step_size = 3e-3;
  {
    PlantSpec spec;
    spec.truth_strength = 5;
    auto w = plant_store(spec, 200, 16, 10);
    auto pairs = make_contrast_pairs(w.store.statements);
    auto n = normalize_by_class(w.store, pairs);
    auto r = train_ccs(n.pos, n.neg, {16, 32, 1}, cfg);
    CHECK(diagnose_degenerate(r.probe, n.pos, n.neg, pair_labels(pairs)).accuracy >= 0.95);
  }
  {
    PlantSpec spec;
    spec.negation_strength = 5;
    auto w = plant_store(spec, 200, 16, 11);
    auto pairs = make_contrast_pairs(w.store.statements);
    auto n = normalize_by_class(w.store, pairs);
    auto r = train_ccs(n.pos, n.neg, {16, 32, 1}, cfg);
    const auto d = diagnose_degenerate(r.probe, n.pos, n.neg, pair_labels(pairs));
    CHECK(r.loss.total < 0.05);
    CHECK(d.accuracy <= 0.6);
    CHECK(d.polarity_coding);
  }
}
