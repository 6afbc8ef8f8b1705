#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "vlab/dataset_gen.hpp"
#include "vlab/statement.hpp"

namespace vlab {

using EmbeddingMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kStoreFormatVersion = 1;

struct StoreMeta {
  int format_version = kStoreFormatVersion;
  std::string model_id;
  int layer = -1;
  std::size_t dim = 0;
  std::size_t count = 0;
  std::string dtype = "f32le";
  /// crc32 of (id bytes, 0x00, row bytes as f32le), one per row.
  std::vector<std::uint32_t> row_checksums;
  std::optional<std::string> prompt_wrapper;
  /// Fields written by other producers (e.g. extraction provenance), carried through untouched.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  friend bool operator==(const StoreMeta&, const StoreMeta&) = default;
};

/// One (model, layer) worth of embeddings. Row i belongs to statements[i].
///
/// On disk a store is a directory holding meta.json, statements.jsonl and
/// embeddings.bin (row-major f32 little-endian, count x dim). meta.json is
/// written last so an interrupted write never leaves a loadable store behind.
struct EmbeddingStore {
  StoreMeta meta;
  std::vector<Statement> statements;
  EmbeddingMatrix matrix;

  static EmbeddingStore make(std::vector<Statement> statements, EmbeddingMatrix matrix, std::string model_id,
                             int layer);

  /// Rows whose statement satisfies pred, in order.
  template <typename Pred>
  EmbeddingStore filter(Pred pred) const {
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < statements.size(); ++i)
      if (pred(statements[i])) keep.push_back(static_cast<Eigen::Index>(i));
    return select(keep);
  }
  EmbeddingStore select(const std::vector<Eigen::Index>& rows) const;

  Eigen::MatrixXd as_double() const { return matrix.cast<double>(); }
};

std::uint32_t row_checksum(const Statement& s, const EmbeddingMatrix& matrix, Eigen::Index row);

/// Throws ErrorKind::Validation describing the first broken invariant.
void validate(const EmbeddingStore& store);

void write_store(const EmbeddingStore& store, const std::filesystem::path& dir);
EmbeddingStore read_store(const std::filesystem::path& dir);

/// Feature directions planted into synthetic embeddings.
///
/// truth:       +1 for true statements, -1 for false ones.
/// negation:    a sign interaction over two directions (z, z*s) with z = +-1 drawn
///              per statement and s = +1 for positives, -1 for negations. Both
///              classes have zero mean along every axis, so per-class centering and
///              scaling cannot remove it; polarity stays decodable nonlinearly.
/// conjunction: 1 when the statement is true and carries no negation, else 0.
struct PlantSpec {
  double truth_strength = 0.0;
  double negation_strength = 0.0;
  double conjunction_strength = 0.0;
  double noise = 0.1;
  std::vector<std::string> datasets = {"Planted"};
};

struct PlantPlan {
  static constexpr int kTruth = 0, kNegationA = 1, kNegationB = 2, kConjunction = 3, kFeatures = 4;

  PlantSpec spec;
  Eigen::MatrixXd directions;  // dim x kFeatures, orthonormal columns
  Eigen::MatrixXd features;    // rows x kFeatures feature values before scaling
};

struct PlantedStore {
  EmbeddingStore store;
  PlantPlan plan;
};

/// Statements alternate positive/negated per pair; pairs are spread round-robin
/// over spec.datasets (negations go to "Neg" + name).
PlantedStore plant_store(const PlantSpec& spec, std::size_t n_pairs, std::size_t dim, std::uint64_t seed);

}  // namespace vlab
