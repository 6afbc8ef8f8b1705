#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "vlab/embedding_store.hpp"
#include "vlab/mlp.hpp"

namespace vlab {

using Probe = Mlp<double>;

inline constexpr double kBceClamp = 1e-7;

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double step_size = 1e-3;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

struct SupervisedResult {
  Probe probe;
  double initial_loss = 0;  // full training set, before the first step
  double final_loss = 0;    // full training set, after the last step
  std::vector<double> epoch_losses;  // mean minibatch loss per epoch
};

/// Mean BCE with probabilities clamped to [kBceClamp, 1 - kBceClamp]. Targets may be soft.
double bce_loss(const Probe& probe, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                Eigen::VectorXd* grad = nullptr);

/// Rows are visited in a per-epoch permutation (seeded by cfg.seed and the epoch)
/// and cut into consecutive batches; the last batch may be short.
SupervisedResult train_supervised(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TrainConfig& cfg,
                                  const std::vector<std::size_t>& dims);

/// Labels from the store; a statement without a label raises ErrorKind::Data.
SupervisedResult train_supervised(const EmbeddingStore& store, const TrainConfig& cfg,
                                  const std::vector<std::size_t>& dims);

/// Fraction of rows where (p >= 0.5) equals (y >= 0.5).
double binary_accuracy(const Probe& probe, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct BestOfK {
  SupervisedResult best;
  std::uint64_t best_seed = 0;
  std::vector<double> selection_accuracies;  // indexed by seed - cfg.seed
};

/// Trains k probes with seeds cfg.seed .. cfg.seed + k - 1 and keeps the most accurate
/// one on the selection set; ties go to the lower seed. jobs > 1 trains in parallel.
BestOfK best_of_k(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TrainConfig& cfg,
                  const std::vector<std::size_t>& dims, std::size_t k, const Eigen::MatrixXd& sel_X,
                  const Eigen::VectorXd& sel_y, std::size_t jobs = 1);

BestOfK best_of_k(const EmbeddingStore& store, const TrainConfig& cfg, const std::vector<std::size_t>& dims,
                  std::size_t k, const EmbeddingStore& selection_store, std::size_t jobs = 1);

/// Row-wise labels of a store as doubles; raises ErrorKind::Data on a missing label.
Eigen::VectorXd store_labels(const EmbeddingStore& store);

/// Deterministic split of row indices into (train, holdout) with round(fraction * n) holdout rows.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> holdout_split(std::size_t n, double fraction,
                                                                             std::uint64_t seed);

}  // namespace vlab
