#include "vlab/supervised.hpp"

#include <cmath>
#include <numeric>

#include "vlab/adam.hpp"
#include "vlab/error.hpp"
#include "vlab/parallel.hpp"
#include "vlab/rng.hpp"

namespace vlab {

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::Configuration, "epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::Configuration, "batch_size must be >= 1");
  require(step_size > 0 && std::isfinite(step_size), ErrorKind::Configuration, "step_size must be > 0");
}

double bce_loss(const Probe& probe, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::VectorXd* grad) {
  require(X.rows() == y.size(), ErrorKind::Argument, "feature and label counts differ");
  require(X.rows() > 0, ErrorKind::Argument, "empty batch");
  Probe::Cache cache;
  const Eigen::VectorXd p = probe.forward(X, grad ? &cache : nullptr);
  const double n = static_cast<double>(X.rows());
  double loss = 0;
  Eigen::VectorXd dp(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double raw = p(i);
    const double q = std::clamp(raw, kBceClamp, 1 - kBceClamp);
    loss -= y(i) * std::log(q) + (1 - y(i)) * std::log(1 - q);
    const bool clamped = raw < kBceClamp || raw > 1 - kBceClamp;
    dp(i) = clamped ? 0.0 : (-y(i) / q + (1 - y(i)) / (1 - q)) / n;
  }
  if (grad) probe.backward(cache, dp, *grad);
  return loss / n;
}

SupervisedResult train_supervised(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TrainConfig& cfg,
                                  const std::vector<std::size_t>& dims) {
  cfg.validate();
  require(X.rows() == y.size(), ErrorKind::Argument, "feature and label counts differ");
  require(X.rows() > 0, ErrorKind::Data, "no training rows");
  require(!dims.empty() && dims.front() == static_cast<std::size_t>(X.cols()), ErrorKind::Argument,
          "probe input dim does not match embedding dim");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    require(y(i) >= 0 && y(i) <= 1, ErrorKind::Data, "target outside [0, 1] at row " + std::to_string(i));

  SupervisedResult r{Probe::init(dims, cfg.seed), 0, 0, {}};
  r.initial_loss = bce_loss(r.probe, X, y);
  Adam<double> adam(r.probe.params().size(), cfg.step_size);
  const Rng order_rng = Rng(cfg.seed).split("batch-order");
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> order(n);
  Eigen::VectorXd grad(r.probe.params().size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) {
      Rng e = order_rng.split(static_cast<std::uint64_t>(epoch));
      e.shuffle(order);
    }
    double sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd bx(static_cast<Eigen::Index>(len), X.cols());
      Eigen::VectorXd by(static_cast<Eigen::Index>(len));
      for (std::size_t k = 0; k < len; ++k) {
        bx.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(order[start + k]));
        by(static_cast<Eigen::Index>(k)) = y(static_cast<Eigen::Index>(order[start + k]));
      }
      grad.setZero();
      const double loss = bce_loss(r.probe, bx, by, &grad);
      if (!std::isfinite(loss) || !grad.allFinite())
        fail(ErrorKind::Numeric, "non-finite loss or gradient at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batches) + " (seed " + std::to_string(cfg.seed) + ")");
      adam.step(r.probe.params(), grad);
      sum += loss;
      ++batches;
    }
    r.epoch_losses.push_back(sum / static_cast<double>(batches));
  }
  r.final_loss = bce_loss(r.probe, X, y);
  return r;
}

Eigen::VectorXd store_labels(const EmbeddingStore& store) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(store.statements.size()));
  for (std::size_t i = 0; i < store.statements.size(); ++i) {
    const auto& s = store.statements[i];
    if (s.label) y(static_cast<Eigen::Index>(i)) = *s.label;
    else if (s.chance) y(static_cast<Eigen::Index>(i)) = s.chance->to_double();
    else fail(ErrorKind::Data, "statement " + s.id + " has no label");
  }
  return y;
}

SupervisedResult train_supervised(const EmbeddingStore& store, const TrainConfig& cfg,
                                  const std::vector<std::size_t>& dims) {
  return train_supervised(store.as_double(), store_labels(store), cfg, dims);
}

double binary_accuracy(const Probe& probe, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  require(X.rows() == y.size() && X.rows() > 0, ErrorKind::Argument, "accuracy needs matching, nonempty inputs");
  const Eigen::VectorXd p = probe.forward(X);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) hits += (p(i) >= 0.5) == (y(i) >= 0.5);
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

BestOfK best_of_k(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TrainConfig& cfg,
                  const std::vector<std::size_t>& dims, std::size_t k, const Eigen::MatrixXd& sel_X,
                  const Eigen::VectorXd& sel_y, std::size_t jobs) {
  require(k >= 1, ErrorKind::Argument, "best_of_k needs k >= 1");
  std::vector<std::optional<SupervisedResult>> runs(k);
  std::vector<double> acc(k, 0.0);
  parallel_for(k, jobs, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + i;
    try {
      runs[i] = train_supervised(X, y, c, dims);
      acc[i] = binary_accuracy(runs[i]->probe, sel_X, sel_y);
    } catch (const Error& e) {
      throw Error(e.kind(), "seed " + std::to_string(c.seed) + ": " + e.detail());
    }
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < k; ++i)
    if (acc[i] > acc[best]) best = i;
  return BestOfK{std::move(*runs[best]), cfg.seed + best, acc};
}

BestOfK best_of_k(const EmbeddingStore& store, const TrainConfig& cfg, const std::vector<std::size_t>& dims,
                  std::size_t k, const EmbeddingStore& selection_store, std::size_t jobs) {
  return best_of_k(store.as_double(), store_labels(store), cfg, dims, k, selection_store.as_double(),
                   store_labels(selection_store), jobs);
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> holdout_split(std::size_t n, double fraction,
                                                                             std::uint64_t seed) {
  require(fraction >= 0 && fraction < 1, ErrorKind::Argument, "holdout fraction must be in [0, 1)");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng(seed).split("holdout").shuffle(perm);
  const auto h = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<Eigen::Index> train, hold;
  for (std::size_t i = 0; i < n; ++i) (i < h ? hold : train).push_back(static_cast<Eigen::Index>(perm[i]));
  std::sort(train.begin(), train.end());
  std::sort(hold.begin(), hold.end());
  return {train, hold};
}

}  // namespace vlab
