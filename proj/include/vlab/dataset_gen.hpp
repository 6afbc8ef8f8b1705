#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vlab/statement.hpp"

namespace vlab {

/// A positive sentence pattern and its negated counterpart. Slots are written
/// `{name}` and must appear identically in both patterns.
struct Template {
  std::string positive;
  std::string negated;

  std::vector<std::string> slots() const;
};

/// Slot fillers plus the truth value the filled positive pattern receives.
struct EntityRow {
  std::map<std::string, std::string> fillers;
  int label = 0;
};

struct TemplateTable {
  std::string dataset;
  std::vector<Template> templates;
  std::vector<EntityRow> rows;

  /// A row applies to every template whose slots it fills.
  bool applies(const Template& t, const EntityRow& row) const;
  std::size_t true_combinations() const;
  std::size_t false_combinations() const;
};

/// Throws ErrorKind::Configuration when patterns disagree on slots.
void validate(const TemplateTable& table);

std::string fill(const std::string& pattern, const std::map<std::string, std::string>& fillers);

std::vector<Statement> generate_facts(const TemplateTable& table, std::size_t n, std::uint64_t seed);

/// Every true positive fill of the table, across all templates that apply to each
/// row, in table order. Used as background text for the toy LM.
std::vector<std::string> paraphrase_corpus(const TemplateTable& table);

/// Toggles polarity: positive statements get the negated pattern and vice versa.
/// The label flips and both members share pair_id.
Statement negate(const Statement& s, const TemplateTable& table);

struct ContrastPair {
  std::size_t pos_index = 0;
  std::size_t neg_index = 0;
  std::optional<int> label;

  friend bool operator==(const ContrastPair&, const ContrastPair&) = default;
};

/// Pairs by pair_id; statements without a pair_id take no part.
std::vector<ContrastPair> make_contrast_pairs(const std::vector<Statement>& statements);

struct Urn {
  std::vector<std::pair<std::string, int>> counts;  // color, number of balls
  std::string query;
};

std::string urn_prompt(const Urn& urn);
std::vector<Statement> generate_chance_set(const std::vector<Urn>& urns, std::uint64_t seed);
/// Character offset where the outcome clause of a chance statement begins.
std::size_t chance_outcome_offset(const Statement& s);
std::vector<Urn> random_urns(std::size_t count, std::uint64_t seed);

struct Split {
  std::vector<Statement> train;
  std::vector<Statement> test;
};

Split split_leave_one_out(const std::map<std::string, std::vector<Statement>>& datasets, const std::string& holdout);

/// Animals, Cities, Companies, Elements, Facts, Inventions.
const std::vector<TemplateTable>& builtin_tables();
const TemplateTable& builtin_table(const std::string& dataset);

TemplateTable read_template_table(const std::filesystem::path& path);

}  // namespace vlab
