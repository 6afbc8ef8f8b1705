#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "vlab/dataset_gen.hpp"
#include "vlab/embedding_store.hpp"
#include "vlab/supervised.hpp"

namespace vlab {

inline constexpr double kNormEps = 1e-8;

struct NormalizationStats {
  Eigen::VectorXd mean_pos, std_pos;
  Eigen::VectorXd mean_neg, std_neg;
  double eps = kNormEps;
};

/// Row k of pos and neg is pair k, each class centered and scaled on its own.
struct NormalizedPairs {
  Eigen::MatrixXd pos;
  Eigen::MatrixXd neg;
  NormalizationStats stats;
};

/// Population std; dimensions with std <= eps are centered only.
NormalizedPairs normalize_by_class(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg, double eps = kNormEps);
/// Reads only the row indices of the pairs, never their labels.
NormalizedPairs normalize_by_class(const EmbeddingStore& store, const std::vector<ContrastPair>& pairs,
                                   double eps = kNormEps);

double consistency_loss(double p_pos, double p_neg);
double confidence_loss(double p_pos, double p_neg);

struct CcsLoss {
  double total = 0;
  double consistency = 0;
  double confidence = 0;

  friend bool operator==(const CcsLoss&, const CcsLoss&) = default;
};

/// Means over pairs. With grad, accumulates d(total)/d(params).
CcsLoss ccs_loss(const Probe& probe, const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg,
                 Eigen::VectorXd* grad = nullptr);

struct CcsConfig {
  std::size_t restarts = 10;
  std::size_t steps = 1000;
  double step_size = 1e-3;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct CcsResult {
  Probe probe;
  CcsLoss loss;
  std::size_t best_restart = 0;
  std::vector<double> restart_losses;
};

/// Full-batch Adam on L_CCS. Restart r starts from probe seed cfg.seed + r; the
/// lowest final L_CCS wins, ties to the earlier restart.
CcsResult train_ccs(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg, const std::vector<std::size_t>& dims,
                    const CcsConfig& cfg);

struct CcsPrediction {
  double score = 0;
  int label = 0;
};

/// score = (p_pos + 1 - p_neg) / 2, label = score >= 0.5.
CcsPrediction ccs_predict(const Probe& probe, const Eigen::VectorXd& pos, const Eigen::VectorXd& neg);
std::vector<CcsPrediction> ccs_predict_all(const Probe& probe, const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg);

struct FlipAccuracy {
  double accuracy = 0;  // max(raw, 1 - raw)
  double raw = 0;
  bool flipped = false;

  friend bool operator==(const FlipAccuracy&, const FlipAccuracy&) = default;
};

FlipAccuracy flip_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

inline constexpr double kDegenerateGap = 0.8;
inline constexpr double kDegenerateAccuracy = 0.6;

struct DegeneracyReport {
  double mean_pos = 0;
  double mean_neg = 0;
  double gap = 0;
  double accuracy = 0;
  bool polarity_coding = false;

  friend bool operator==(const DegeneracyReport&, const DegeneracyReport&) = default;
};

DegeneracyReport diagnose_degenerate(double mean_pos, double mean_neg, double flip_acc);
/// Labels are the truth values of the positive members of each pair.
DegeneracyReport diagnose_degenerate(const Probe& probe, const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg,
                                     const std::vector<int>& labels);

}  // namespace vlab
