#include "vlab/ccs.hpp"

#include <cmath>

#include "vlab/adam.hpp"
#include "vlab/error.hpp"
#include "vlab/parallel.hpp"

namespace vlab {

namespace {

void check_unit(double p, const char* what) {
  require(p >= 0 && p <= 1, ErrorKind::Argument, std::string(what) + " must lie in [0, 1]");
}

void normalize_class(Eigen::MatrixXd& x, Eigen::VectorXd& mean, Eigen::VectorXd& sd, double eps) {
  const double n = static_cast<double>(x.rows());
  mean = x.colwise().sum().transpose() / n;
  x.rowwise() -= mean.transpose();
  sd = (x.colwise().squaredNorm().transpose() / n).cwiseSqrt();
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (sd(j) > eps) x.col(j) /= sd(j);
}

}  // namespace

NormalizedPairs normalize_by_class(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg, double eps) {
  require(pos.rows() == neg.rows() && pos.cols() == neg.cols(), ErrorKind::Argument,
          "positive and negated matrices differ in shape");
  require(pos.rows() >= 2, ErrorKind::Argument, "normalization needs at least 2 pairs");
  NormalizedPairs out{pos, neg, {}};
  out.stats.eps = eps;
  normalize_class(out.pos, out.stats.mean_pos, out.stats.std_pos, eps);
  normalize_class(out.neg, out.stats.mean_neg, out.stats.std_neg, eps);
  return out;
}

NormalizedPairs normalize_by_class(const EmbeddingStore& store, const std::vector<ContrastPair>& pairs, double eps) {
  const auto n = static_cast<Eigen::Index>(pairs.size());
  const auto rows = store.statements.size();
  Eigen::MatrixXd pos(n, store.matrix.cols()), neg(n, store.matrix.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& p = pairs[static_cast<std::size_t>(k)];
    require(p.pos_index < rows && p.neg_index < rows && p.pos_index != p.neg_index, ErrorKind::Argument,
            "contrast pair indices out of range or equal");
    pos.row(k) = store.matrix.row(static_cast<Eigen::Index>(p.pos_index)).cast<double>();
    neg.row(k) = store.matrix.row(static_cast<Eigen::Index>(p.neg_index)).cast<double>();
  }
  return normalize_by_class(pos, neg, eps);
}

double consistency_loss(double p_pos, double p_neg) {
  check_unit(p_pos, "p_pos");
  check_unit(p_neg, "p_neg");
  const double d = 1 - p_pos - p_neg;
  return d * d;
}

double confidence_loss(double p_pos, double p_neg) {
  check_unit(p_pos, "p_pos");
  check_unit(p_neg, "p_neg");
  const double m = std::min(p_pos, p_neg);
  return m * m;
}

CcsLoss ccs_loss(const Probe& probe, const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg, Eigen::VectorXd* grad) {
  require(pos.rows() == neg.rows(), ErrorKind::Argument, "positive and negated counts differ");
  require(pos.rows() >= 1, ErrorKind::Argument, "ccs_loss needs at least one pair");
  Probe::Cache cp, cn;
  const Eigen::VectorXd a = probe.forward(pos, grad ? &cp : nullptr);
  const Eigen::VectorXd b = probe.forward(neg, grad ? &cn : nullptr);
  const auto n = pos.rows();
  CcsLoss l;
  Eigen::VectorXd da(n), db(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = 1 - a(i) - b(i);
    const double m = std::min(a(i), b(i));
    l.consistency += d * d;
    l.confidence += m * m;
    da(i) = -2 * d;
    db(i) = -2 * d;
    if (a(i) <= b(i)) da(i) += 2 * a(i);
    else db(i) += 2 * b(i);
  }
  const double nn = static_cast<double>(n);
  l.consistency /= nn;
  l.confidence /= nn;
  l.total = l.consistency + l.confidence;
  if (grad) {
    probe.backward(cp, da / nn, *grad);
    probe.backward(cn, db / nn, *grad);
  }
  return l;
}

CcsResult train_ccs(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg, const std::vector<std::size_t>& dims,
                    const CcsConfig& cfg) {
  require(cfg.restarts >= 1, ErrorKind::Configuration, "restarts must be >= 1");
  require(cfg.step_size > 0, ErrorKind::Configuration, "step_size must be > 0");
  require(pos.rows() >= 1, ErrorKind::Argument, "no contrast pairs");
  require(!dims.empty() && dims.front() == static_cast<std::size_t>(pos.cols()), ErrorKind::Argument,
          "probe input dim does not match embedding dim");

  std::vector<Probe> probes(cfg.restarts);
  std::vector<CcsLoss> losses(cfg.restarts);
  parallel_for(cfg.restarts, cfg.jobs, [&](std::size_t r) {
    Probe p = Probe::init(dims, cfg.seed + r);
    Adam<double> adam(p.params().size(), cfg.step_size);
    Eigen::VectorXd grad(p.params().size());
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      grad.setZero();
      const CcsLoss l = ccs_loss(p, pos, neg, &grad);
      if (!std::isfinite(l.total) || !grad.allFinite())
        fail(ErrorKind::Numeric, "restart " + std::to_string(r) + ": non-finite CCS loss at step " +
                                     std::to_string(step));
      adam.step(p.params(), grad);
    }
    losses[r] = ccs_loss(p, pos, neg);
    if (!std::isfinite(losses[r].total))
      fail(ErrorKind::Numeric, "restart " + std::to_string(r) + ": non-finite final CCS loss");
    probes[r] = std::move(p);
  });

  CcsResult out;
  std::size_t best = 0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    out.restart_losses.push_back(losses[r].total);
    if (losses[r].total < losses[best].total) best = r;
  }
  out.best_restart = best;
  out.loss = losses[best];
  out.probe = std::move(probes[best]);
  return out;
}

CcsPrediction ccs_predict(const Probe& probe, const Eigen::VectorXd& pos, const Eigen::VectorXd& neg) {
  const double a = probe.forward_one(pos);
  const double b = probe.forward_one(neg);
  const double score = (a + (1 - b)) / 2;
  return {score, score >= 0.5 ? 1 : 0};
}

std::vector<CcsPrediction> ccs_predict_all(const Probe& probe, const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg) {
  require(pos.rows() == neg.rows(), ErrorKind::Argument, "positive and negated counts differ");
  const Eigen::VectorXd a = probe.forward(pos);
  const Eigen::VectorXd b = probe.forward(neg);
  std::vector<CcsPrediction> out;
  out.reserve(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double score = (a(i) + (1 - b(i))) / 2;
    out.push_back({score, score >= 0.5 ? 1 : 0});
  }
  return out;
}

FlipAccuracy flip_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  require(predictions.size() == labels.size(), ErrorKind::Argument, "prediction and label counts differ");
  require(!labels.empty(), ErrorKind::Argument, "flip_accuracy needs at least one prediction");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  FlipAccuracy f;
  f.raw = static_cast<double>(hits) / static_cast<double>(labels.size());
  f.flipped = f.raw < 0.5;
  f.accuracy = f.flipped ? 1 - f.raw : f.raw;
  return f;
}

DegeneracyReport diagnose_degenerate(double mean_pos, double mean_neg, double flip_acc) {
  check_unit(mean_pos, "mean_pos");
  check_unit(mean_neg, "mean_neg");
  check_unit(flip_acc, "accuracy");
  DegeneracyReport r;
  r.mean_pos = mean_pos;
  r.mean_neg = mean_neg;
  r.gap = std::abs(mean_pos - mean_neg);
  r.accuracy = flip_acc;
  r.polarity_coding = r.gap > kDegenerateGap && flip_acc < kDegenerateAccuracy;
  return r;
}

DegeneracyReport diagnose_degenerate(const Probe& probe, const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg,
                                     const std::vector<int>& labels) {
  require(pos.rows() >= 1 && pos.rows() == neg.rows(), ErrorKind::Argument, "need matching, nonempty pairs");
  require(labels.size() == static_cast<std::size_t>(pos.rows()), ErrorKind::Argument, "one label per pair required");
  const double mp = probe.forward(pos).mean();
  const double mn = probe.forward(neg).mean();
  std::vector<int> pred;
  for (const auto& p : ccs_predict_all(probe, pos, neg)) pred.push_back(p.label);
  return diagnose_degenerate(mp, mn, flip_accuracy(pred, labels).accuracy);
}

}  // namespace vlab
