#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vlab {

/// Exact non-negative fraction; always kept in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t num, std::int64_t den);
  /// Recovers the fraction a double was printed from (denominators up to 10^6).
  static Rational from_double(double value);

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Rational&, const Rational&) = default;
  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
  }
};

enum class Polarity { Positive, Negated };

struct Statement {
  std::string id;
  std::string text;
  std::optional<int> label;
  std::string dataset;
  Polarity polarity = Polarity::Positive;
  std::optional<std::string> pair_id;
  std::optional<Rational> chance;

  friend bool operator==(const Statement&, const Statement&) = default;
};

/// Throws ErrorKind::Validation naming the broken invariant.
void validate(const Statement& s);

/// One JSON object per line, fields in the order
/// id, text, label, dataset, polarity, pair_id, chance; absent optionals omitted.
std::string to_json_line(const Statement& s);
Statement parse_json_line(const std::string& line);

void write_statements(const std::filesystem::path& path, const std::vector<Statement>& statements);
std::vector<Statement> read_statements(const std::filesystem::path& path);

std::string_view to_string(Polarity p);

}  // namespace vlab
