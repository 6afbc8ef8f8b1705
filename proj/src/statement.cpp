#include "vlab/statement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "vlab/error.hpp"

namespace vlab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Unnegatable: return "unnegatable";
    case ErrorKind::Pairing: return "pairing";
    case ErrorKind::Key: return "key";
    case ErrorKind::Length: return "length";
    case ErrorKind::Convention: return "convention";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
    case ErrorKind::SizeMismatch: return "size-mismatch";
    case ErrorKind::Version: return "version";
    case ErrorKind::Malformed: return "malformed";
    case ErrorKind::Data: return "data";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Alignment: return "alignment";
  }
  return "unknown";
}

Rational Rational::make(std::int64_t num, std::int64_t den) {
  require(den > 0, ErrorKind::Argument, "rational with non-positive denominator");
  require(num >= 0, ErrorKind::Argument, "negative rational");
  const std::int64_t g = std::gcd(num, den);
  if (g == 0) return {0, 1};
  return {num / g, den / g};
}

Rational Rational::from_double(double value) {
  require(std::isfinite(value) && value >= 0.0, ErrorKind::Malformed, "chance must be a finite non-negative number");
  // Continued-fraction convergents; stop at the first one that reproduces the value.
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double x = value;
  for (int iter = 0; iter < 64; ++iter) {
    const double a = std::floor(x);
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t h2 = ai * h1 + h0;
    const std::int64_t k2 = ai * k1 + k0;
    if (k2 > 1'000'000) break;
    h0 = h1, h1 = h2, k0 = k1, k1 = k2;
    if (static_cast<double>(h1) / static_cast<double>(k1) == value) return make(h1, k1);
    const double frac = x - a;
    if (frac <= 0.0) break;
    x = 1.0 / frac;
  }
  fail(ErrorKind::Malformed, "chance value " + std::to_string(value) + " is not a simple fraction");
}

std::string_view to_string(Polarity p) { return p == Polarity::Positive ? "positive" : "negated"; }

void validate(const Statement& s) {
  require(!s.id.empty(), ErrorKind::Validation, "statement with empty id");
  require(!s.text.empty() && s.text.back() == '.', ErrorKind::Validation,
          "statement " + s.id + ": text must be nonempty and end with '.'");
  require(s.label.has_value() != s.chance.has_value(), ErrorKind::Validation,
          "statement " + s.id + ": exactly one of label and chance must be present");
  if (s.label) require(*s.label == 0 || *s.label == 1, ErrorKind::Validation, "statement " + s.id + ": label must be 0 or 1");
  if (s.chance) require(s.chance->num <= s.chance->den, ErrorKind::Validation, "statement " + s.id + ": chance above 1");
  if (s.polarity == Polarity::Negated)
    require(s.pair_id.has_value(), ErrorKind::Validation, "statement " + s.id + ": negated statement without pair_id");
}

std::string to_json_line(const Statement& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["text"] = s.text;
  if (s.label) j["label"] = *s.label;
  j["dataset"] = s.dataset;
  j["polarity"] = to_string(s.polarity);
  if (s.pair_id) j["pair_id"] = *s.pair_id;
  if (s.chance) j["chance"] = s.chance->to_double();
  return j.dump();
}

Statement parse_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Malformed, e.what());
  }
  require(j.is_object(), ErrorKind::Malformed, "statement line is not an object");
  static const char* known[] = {"id", "text", "label", "dataset", "polarity", "pair_id", "chance"};
  for (const auto& [key, _] : j.items()) {
    require(std::find(std::begin(known), std::end(known), key) != std::end(known), ErrorKind::Malformed,
            "unknown statement field '" + key + "'");
  }
  Statement s;
  try {
    s.id = j.at("id").get<std::string>();
    s.text = j.at("text").get<std::string>();
    s.dataset = j.at("dataset").get<std::string>();
    const auto pol = j.at("polarity").get<std::string>();
    if (pol == "positive") s.polarity = Polarity::Positive;
    else if (pol == "negated") s.polarity = Polarity::Negated;
    else fail(ErrorKind::Malformed, "unknown polarity '" + pol + "'");
    if (j.contains("label")) s.label = j["label"].get<int>();
    if (j.contains("pair_id")) s.pair_id = j["pair_id"].get<std::string>();
    if (j.contains("chance")) s.chance = Rational::from_double(j["chance"].get<double>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Malformed, e.what());
  }
  try {
    validate(s);
  } catch (const Error& e) {
    fail(ErrorKind::Malformed, e.what());
  }
  return s;
}

void write_statements(const std::filesystem::path& path, const std::vector<Statement>& statements) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  for (const auto& s : statements) out << to_json_line(s) << '\n';
  require(static_cast<bool>(out.flush()), ErrorKind::Io, "write failed: " + path.string());
}

std::vector<Statement> read_statements(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::vector<Statement> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_json_line(line));
    } catch (const Error& e) {
      fail(ErrorKind::Malformed, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace vlab
