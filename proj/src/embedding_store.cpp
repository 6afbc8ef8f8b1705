#include "vlab/embedding_store.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/QR>
#include <zlib.h>

#include "vlab/binary_io.hpp"
#include "vlab/error.hpp"
#include "vlab/rng.hpp"

namespace vlab {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kMetaFile = "meta.json";
constexpr const char* kStatementsFile = "statements.jsonl";
constexpr const char* kMatrixFile = "embeddings.bin";

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::uint32_t parse_hex32(const std::string& s) {
  if (s.size() != 8) fail(ErrorKind::Malformed, "meta.json: bad row checksum '" + s + "'");
  std::uint32_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint32_t>(c - 'a' + 10);
    else fail(ErrorKind::Malformed, "meta.json: bad row checksum '" + s + "'");
  }
  return v;
}

std::string row_bytes(const EmbeddingMatrix& m, Eigen::Index row) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.cols()) * 4);
  for (Eigen::Index j = 0; j < m.cols(); ++j) binary::put_f32(out, m(row, j));
  return out;
}

ordered_json meta_to_json(const StoreMeta& m) {
  ordered_json j;
  j["format_version"] = m.format_version;
  j["model_id"] = m.model_id;
  j["layer"] = m.layer;
  j["dim"] = m.dim;
  j["count"] = m.count;
  j["dtype"] = m.dtype;
  if (m.prompt_wrapper) j["prompt_wrapper"] = *m.prompt_wrapper;
  ordered_json sums = ordered_json::array();
  for (auto c : m.row_checksums) sums.push_back(hex32(c));
  j["row_checksums"] = std::move(sums);
  for (auto& [k, v] : m.extra.items()) j[k] = v;
  return j;
}

StoreMeta meta_from_json(const ordered_json& j) {
  if (!j.is_object()) fail(ErrorKind::Malformed, "meta.json: not an object");
  auto field = [&](const char* name) -> const ordered_json& {
    if (!j.contains(name)) fail(ErrorKind::Malformed, std::string("meta.json: missing field '") + name + "'");
    return j.at(name);
  };
  StoreMeta m;
  try {
    m.format_version = field("format_version").get<int>();
    if (m.format_version != kStoreFormatVersion)
      fail(ErrorKind::Version, "meta.json: format_version " + std::to_string(m.format_version) + ", expected " +
                                   std::to_string(kStoreFormatVersion));
    m.model_id = field("model_id").get<std::string>();
    m.layer = field("layer").get<int>();
    m.dim = field("dim").get<std::size_t>();
    m.count = field("count").get<std::size_t>();
    m.dtype = field("dtype").get<std::string>();
    if (j.contains("prompt_wrapper") && !j["prompt_wrapper"].is_null())
      m.prompt_wrapper = j["prompt_wrapper"].get<std::string>();
    for (const auto& c : field("row_checksums")) m.row_checksums.push_back(parse_hex32(c.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Malformed, std::string("meta.json: ") + e.what());
  }
  if (m.dtype != "f32le") fail(ErrorKind::Malformed, "meta.json: unsupported dtype '" + m.dtype + "'");
  static const std::set<std::string> known = {"format_version", "model_id", "layer",         "dim",
                                              "count",          "dtype",    "prompt_wrapper", "row_checksums"};
  for (auto& [k, v] : j.items())
    if (!known.count(k)) m.extra[k] = v;
  return m;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

EmbeddingStore EmbeddingStore::make(std::vector<Statement> statements, EmbeddingMatrix matrix, std::string model_id,
                                    int layer) {
  EmbeddingStore s;
  s.meta.model_id = std::move(model_id);
  s.meta.layer = layer;
  s.meta.dim = static_cast<std::size_t>(matrix.cols());
  s.meta.count = static_cast<std::size_t>(matrix.rows());
  s.statements = std::move(statements);
  s.matrix = std::move(matrix);
  for (Eigen::Index i = 0; i < s.matrix.rows() && static_cast<std::size_t>(i) < s.statements.size(); ++i)
    s.meta.row_checksums.push_back(row_checksum(s.statements[static_cast<std::size_t>(i)], s.matrix, i));
  return s;
}

EmbeddingStore EmbeddingStore::select(const std::vector<Eigen::Index>& rows) const {
  std::vector<Statement> st;
  EmbeddingMatrix m(static_cast<Eigen::Index>(rows.size()), matrix.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    require(rows[k] >= 0 && rows[k] < matrix.rows(), ErrorKind::Argument, "row index out of range");
    st.push_back(statements[static_cast<std::size_t>(rows[k])]);
    m.row(static_cast<Eigen::Index>(k)) = matrix.row(rows[k]);
  }
  auto out = make(std::move(st), std::move(m), meta.model_id, meta.layer);
  out.meta.prompt_wrapper = meta.prompt_wrapper;
  out.meta.extra = meta.extra;
  return out;
}

std::uint32_t row_checksum(const Statement& s, const EmbeddingMatrix& matrix, Eigen::Index row) {
  std::string bytes = s.id;
  bytes.push_back('\0');
  bytes += row_bytes(matrix, row);
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void validate(const EmbeddingStore& store) {
  const auto& m = store.meta;
  const auto rows = static_cast<std::size_t>(store.matrix.rows());
  const auto cols = static_cast<std::size_t>(store.matrix.cols());
  if (m.format_version != kStoreFormatVersion)
    fail(ErrorKind::Validation, "format_version " + std::to_string(m.format_version));
  if (m.dtype != "f32le") fail(ErrorKind::Validation, "dtype must be f32le");
  if (m.dim < 1) fail(ErrorKind::Validation, "dim must be >= 1");
  if (cols != m.dim)
    fail(ErrorKind::Validation, "matrix has " + std::to_string(cols) + " columns, meta.dim " + std::to_string(m.dim));
  if (rows != m.count || store.statements.size() != m.count)
    fail(ErrorKind::Validation, "count mismatch: meta " + std::to_string(m.count) + ", matrix " +
                                    std::to_string(rows) + ", statements " + std::to_string(store.statements.size()));
  if (!store.matrix.allFinite()) {
    for (Eigen::Index i = 0; i < store.matrix.rows(); ++i)
      if (!store.matrix.row(i).allFinite()) fail(ErrorKind::Validation, "non-finite entry in row " + std::to_string(i));
  }
  std::set<std::string> ids;
  for (const auto& s : store.statements) {
    validate(s);
    if (!ids.insert(s.id).second) fail(ErrorKind::Validation, "duplicate statement id " + s.id);
  }
  if (m.row_checksums.size() != m.count)
    fail(ErrorKind::Validation, "expected " + std::to_string(m.count) + " row checksums, found " +
                                    std::to_string(m.row_checksums.size()));
  for (std::size_t i = 0; i < m.count; ++i)
    if (row_checksum(store.statements[i], store.matrix, static_cast<Eigen::Index>(i)) != m.row_checksums[i])
      fail(ErrorKind::Alignment, "row " + std::to_string(i) + " (" + store.statements[i].id +
                                     ") does not match its checksum; statements and matrix are misaligned");
}

void write_store(const EmbeddingStore& store, const fs::path& dir) {
  validate(store);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  fs::remove(dir / kMetaFile, ec);

  std::string bin;
  bin.reserve(static_cast<std::size_t>(store.matrix.size()) * 4);
  for (Eigen::Index i = 0; i < store.matrix.rows(); ++i) bin += row_bytes(store.matrix, i);
  write_file(dir / kMatrixFile, bin);
  write_statements(dir / kStatementsFile, store.statements);

  const fs::path tmp = dir / "meta.json.tmp";
  write_file(tmp, meta_to_json(store.meta).dump(2) + "\n");
  fs::rename(tmp, dir / kMetaFile, ec);
  if (ec) fail(ErrorKind::Io, "cannot finalize " + (dir / kMetaFile).string() + ": " + ec.message());
}

EmbeddingStore read_store(const fs::path& dir) {
  for (const char* f : {kMetaFile, kStatementsFile, kMatrixFile})
    if (!fs::exists(dir / f)) fail(ErrorKind::Io, "missing " + (dir / f).string());

  ordered_json j;
  try {
    j = ordered_json::parse(read_file(dir / kMetaFile));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Malformed, std::string("meta.json: ") + e.what());
  }
  EmbeddingStore store;
  store.meta = meta_from_json(j);
  const auto& m = store.meta;
  if (m.dim < 1) fail(ErrorKind::Malformed, "meta.json: dim must be >= 1");

  store.statements = read_statements(dir / kStatementsFile);
  if (store.statements.size() != m.count)
    fail(ErrorKind::SizeMismatch, "statements.jsonl has " + std::to_string(store.statements.size()) +
                                      " lines, meta.count is " + std::to_string(m.count));

  const std::string bin = read_file(dir / kMatrixFile);
  const std::size_t expected = m.count * m.dim * 4;
  if (bin.size() != expected)
    fail(ErrorKind::SizeMismatch, "embeddings.bin: expected " + std::to_string(expected) + " bytes, found " +
                                      std::to_string(bin.size()));
  store.matrix.resize(static_cast<Eigen::Index>(m.count), static_cast<Eigen::Index>(m.dim));
  std::size_t pos = 0;
  for (Eigen::Index i = 0; i < store.matrix.rows(); ++i)
    for (Eigen::Index k = 0; k < store.matrix.cols(); ++k) store.matrix(i, k) = binary::get_f32(bin, pos);

  validate(store);
  return store;
}

PlantedStore plant_store(const PlantSpec& spec, std::size_t n_pairs, std::size_t dim, std::uint64_t seed) {
  constexpr int F = PlantPlan::kFeatures;
  require(dim >= static_cast<std::size_t>(F), ErrorKind::Argument,
          "dim " + std::to_string(dim) + " is smaller than the " + std::to_string(F) + " planted directions");
  require(n_pairs >= 2, ErrorKind::Argument, "need at least 2 pairs");
  for (double v : {spec.truth_strength, spec.negation_strength, spec.conjunction_strength, spec.noise})
    require(std::isfinite(v), ErrorKind::Argument, "planted strengths must be finite");
  require(spec.noise >= 0, ErrorKind::Argument, "noise must be non-negative");
  require(!spec.datasets.empty(), ErrorKind::Argument, "no dataset names");

  Rng root(seed);
  Rng dir_rng = root.split("directions");
  Rng label_rng = root.split("labels");
  Rng sign_rng = root.split("negation-signs");
  Rng noise_rng = root.split("noise");

  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd gauss(d, F);
  for (Eigen::Index c = 0; c < F; ++c)
    for (Eigen::Index r = 0; r < d; ++r) gauss(r, c) = dir_rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  PlantPlan plan;
  plan.spec = spec;
  plan.directions = qr.householderQ() * Eigen::MatrixXd::Identity(d, F);

  std::vector<int> labels(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) labels[i] = i < n_pairs / 2 ? 1 : 0;
  label_rng.shuffle(labels);

  const auto rows = static_cast<Eigen::Index>(2 * n_pairs);
  plan.features = Eigen::MatrixXd::Zero(rows, F);
  std::vector<Statement> statements;
  statements.reserve(2 * n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::string& ds = spec.datasets[i % spec.datasets.size()];
    char num[24];
    std::snprintf(num, sizeof num, "%05zu", i);
    Statement pos;
    pos.id = ds + "-" + num;
    pos.text = "Planted claim " + std::to_string(i) + " holds.";
    pos.label = labels[i];
    pos.dataset = ds;
    pos.pair_id = pos.id;
    Statement neg = pos;
    neg.id = pos.id + "-neg";
    neg.text = "Planted claim " + std::to_string(i) + " does not hold.";
    neg.label = 1 - labels[i];
    neg.dataset = "Neg" + ds;
    neg.polarity = Polarity::Negated;
    for (const Statement* s : {&pos, &neg}) {
      const auto r = static_cast<Eigen::Index>(statements.size());
      const bool positive = s->polarity == Polarity::Positive;
      const double z = sign_rng.below(2) ? 1.0 : -1.0;
      plan.features(r, PlantPlan::kTruth) = *s->label ? 1.0 : -1.0;
      plan.features(r, PlantPlan::kNegationA) = z;
      plan.features(r, PlantPlan::kNegationB) = positive ? z : -z;
      plan.features(r, PlantPlan::kConjunction) = (*s->label == 1 && positive) ? 1.0 : 0.0;
      statements.push_back(*s);
    }
  }

  Eigen::Vector4d strength(spec.truth_strength, spec.negation_strength, spec.negation_strength,
                           spec.conjunction_strength);
  Eigen::MatrixXd x = (plan.features * strength.asDiagonal()) * plan.directions.transpose();
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < d; ++c) x(r, c) += spec.noise * noise_rng.normal();

  EmbeddingMatrix m = x.cast<float>();
  PlantedStore out{EmbeddingStore::make(std::move(statements), std::move(m), "planted", -1), std::move(plan)};
  return out;
}

}  // namespace vlab
