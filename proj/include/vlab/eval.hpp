#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vlab/ccs.hpp"
#include "vlab/embedding_store.hpp"
#include "vlab/statement.hpp"
#include "vlab/supervised.hpp"

namespace vlab {

/// Fraction of rows where (p >= threshold) agrees with the label.
double accuracy(const std::vector<double>& predictions, const std::vector<int>& labels, double threshold = 0.5);
double accuracy(const Probe& probe, const EmbeddingStore& store, double threshold = 0.5);

std::vector<double> predict(const Probe& probe, const EmbeddingStore& store);

struct CalibrationBin {
  double lo = 0, hi = 0;
  std::size_t count = 0;
  double mean_pred = 0;
  double emp_freq = 0;
  bool empty = true;

  friend bool operator==(const CalibrationBin&, const CalibrationBin&) = default;
};

struct CalibrationBins {
  std::vector<CalibrationBin> bins;

  std::size_t total() const;
  friend bool operator==(const CalibrationBins&, const CalibrationBins&) = default;
};

/// Equal-width bins [k/n, (k+1)/n), the last one closed on the right.
CalibrationBins calibration_curve(const std::vector<double>& predictions, const std::vector<int>& labels,
                                  std::size_t n_bins = 10);

/// Columns bin_mid, mean_pred, emp_freq, count; empty bins leave mean_pred and emp_freq blank.
std::string calibration_csv(const CalibrationBins& bins);

struct ChanceBucket {
  Rational chance;
  std::size_t count = 0;
  double mean_pred = 0;
  double mae = 0;

  friend bool operator==(const ChanceBucket&, const ChanceBucket&) = default;
};

struct ChanceError {
  double mae = 0;
  double brier = 0;
  double baseline_mae = 0;  // constant 0.5 predictor on the same chances
  std::vector<ChanceBucket> buckets;  // ascending chance

  friend bool operator==(const ChanceError&, const ChanceError&) = default;
};

ChanceError chance_error(const std::vector<double>& predictions, const std::vector<Rational>& chances);
/// Statements without a chance value raise ErrorKind::Data.
ChanceError chance_error(const Probe& probe, const EmbeddingStore& store);

/// One column of a generalization grid: train on `train`, test on `test`.
/// regime 0 is a held-out positive dataset; for a negated test set, regime 1
/// trains on the positive datasets other than its topic and regime 2 on all
/// positive datasets plus the other negated ones.
struct GridColumn {
  std::string name;
  std::string test;
  std::vector<std::string> train;
  int regime = 0;

  friend bool operator==(const GridColumn&, const GridColumn&) = default;
};

/// Columns in presentation order: each positive dataset, followed by its
/// regime 1 and 2 negation columns when "Neg" + name is among `negated`.
std::vector<GridColumn> grid_columns(const std::vector<std::string>& positive, const std::vector<std::string>& negated);

struct GeneralizationGrid {
  std::vector<int> layers;
  std::vector<GridColumn> columns;
  std::vector<std::vector<double>> accuracy;  // [layer][column]

  friend bool operator==(const GeneralizationGrid&, const GeneralizationGrid&) = default;
};

/// Trains a probe on `train` with the given seed. Must be deterministic in its inputs.
using ProbeFactory = std::function<Probe(const EmbeddingStore& train, std::uint64_t seed)>;

/// Seed for a cell, derived from the layer and the training datasets only, so columns
/// sharing a training set share a probe.
std::uint64_t cell_seed(std::uint64_t seed, int layer, const GridColumn& column);

double grid_cell(const EmbeddingStore& store, int layer, const GridColumn& column, const ProbeFactory& factory,
                 std::uint64_t seed);

/// Each layer's store holds every dataset of that layer, told apart by Statement::dataset.
GeneralizationGrid generalization_matrix(const std::map<int, EmbeddingStore>& by_layer,
                                         const std::vector<GridColumn>& columns, const ProbeFactory& factory,
                                         std::uint64_t seed, std::size_t jobs = 1);

struct CcsRecord {
  int layer = -1;
  std::string datasets;
  CcsLoss loss;
  FlipAccuracy accuracy;
  DegeneracyReport degeneracy;

  friend bool operator==(const CcsRecord&, const CcsRecord&) = default;
};

struct CalibrationRecord {
  int layer = -1;
  std::string dataset;
  CalibrationBins bins;

  friend bool operator==(const CalibrationRecord&, const CalibrationRecord&) = default;
};

struct ChanceRecord {
  int layer = -1;
  ChanceError error;

  friend bool operator==(const ChanceRecord&, const ChanceRecord&) = default;
};

struct EvalReport {
  std::string experiment_id;
  std::optional<GeneralizationGrid> grid;
  std::vector<CalibrationRecord> calibration;
  std::vector<CcsRecord> ccs;
  std::vector<ChanceRecord> chance;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// One JSON object per line, each tagged with "kind".
std::string render_jsonl(const EvalReport& report);
EvalReport parse_jsonl(const std::string& text);

/// ".722" style: three decimals, no leading zero below one.
std::string fmt3(double v);

std::string render_positive_table(const GeneralizationGrid& grid);
std::string render_negation_table(const GeneralizationGrid& grid);
std::string render_ccs_loss_table(const std::vector<CcsRecord>& records);
std::string render_ccs_means_table(const std::vector<CcsRecord>& records);
std::string render_chance_table(const std::vector<ChanceRecord>& records);
std::string render_tables(const EvalReport& report);

}  // namespace vlab
