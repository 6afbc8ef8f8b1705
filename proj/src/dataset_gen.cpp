#include "vlab/dataset_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>

#include <json.hpp>

#include "vlab/error.hpp"
#include "vlab/rng.hpp"

namespace vlab {
namespace {

struct Segment {
  bool is_slot = false;
  std::string text;  // literal text or slot name
};

std::vector<Segment> parse_pattern(const std::string& pattern) {
  std::vector<Segment> out;
  std::string lit;
  for (std::size_t i = 0; i < pattern.size();) {
    if (pattern[i] == '{') {
      const auto close = pattern.find('}', i);
      require(close != std::string::npos, ErrorKind::Configuration, "unterminated slot in pattern: " + pattern);
      if (!lit.empty()) out.push_back({false, std::move(lit)}), lit.clear();
      out.push_back({true, pattern.substr(i + 1, close - i - 1)});
      i = close + 1;
    } else {
      lit += pattern[i++];
    }
  }
  if (!lit.empty()) out.push_back({false, std::move(lit)});
  return out;
}

bool match_from(const std::vector<Segment>& segs, std::size_t si, const std::string& text, std::size_t pos,
                std::map<std::string, std::string>& caps) {
  if (si == segs.size()) return pos == text.size();
  const Segment& seg = segs[si];
  if (!seg.is_slot) {
    if (text.compare(pos, seg.text.size(), seg.text) != 0) return false;
    return match_from(segs, si + 1, text, pos + seg.text.size(), caps);
  }
  // Non-greedy slot capture of at least one character.
  for (std::size_t end = pos + 1; end <= text.size(); ++end) {
    caps[seg.text] = text.substr(pos, end - pos);
    if (match_from(segs, si + 1, text, end, caps)) return true;
  }
  caps.erase(seg.text);
  return false;
}

std::optional<std::map<std::string, std::string>> match(const std::string& pattern, const std::string& text) {
  std::map<std::string, std::string> caps;
  if (match_from(parse_pattern(pattern), 0, text, 0, caps)) return caps;
  return std::nullopt;
}

std::string pad_index(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

const char* kNegSuffix = "-neg";

}  // namespace

std::vector<std::string> Template::slots() const {
  std::vector<std::string> out;
  for (const auto& seg : parse_pattern(positive))
    if (seg.is_slot) out.push_back(seg.text);
  return out;
}

bool TemplateTable::applies(const Template& t, const EntityRow& row) const {
  for (const auto& slot : t.slots())
    if (!row.fillers.contains(slot)) return false;
  return true;
}

std::size_t TemplateTable::true_combinations() const {
  std::size_t n = 0;
  for (const auto& t : templates)
    for (const auto& r : rows) n += (r.label == 1 && applies(t, r));
  return n;
}

std::size_t TemplateTable::false_combinations() const {
  std::size_t n = 0;
  for (const auto& t : templates)
    for (const auto& r : rows) n += (r.label == 0 && applies(t, r));
  return n;
}

void validate(const TemplateTable& table) {
  require(!table.templates.empty() && !table.rows.empty(), ErrorKind::Configuration,
          "template table '" + table.dataset + "' is empty");
  for (const auto& t : table.templates) {
    auto pos = t.slots();
    std::vector<std::string> neg;
    for (const auto& seg : parse_pattern(t.negated))
      if (seg.is_slot) neg.push_back(seg.text);
    std::set<std::string> unique(pos.begin(), pos.end());
    require(unique.size() == pos.size(), ErrorKind::Configuration, "repeated slot in pattern: " + t.positive);
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    require(pos == neg, ErrorKind::Configuration, "slot mismatch between '" + t.positive + "' and '" + t.negated + "'");
    require(!t.positive.empty() && t.positive.back() == '.' && !t.negated.empty() && t.negated.back() == '.',
            ErrorKind::Configuration, "patterns must end with '.': " + t.positive);
  }
}

std::string fill(const std::string& pattern, const std::map<std::string, std::string>& fillers) {
  std::string out;
  for (const auto& seg : parse_pattern(pattern)) {
    if (!seg.is_slot) {
      out += seg.text;
      continue;
    }
    const auto it = fillers.find(seg.text);
    require(it != fillers.end(), ErrorKind::Argument, "no filler for slot '" + seg.text + "'");
    out += it->second;
  }
  return out;
}

std::vector<Statement> generate_facts(const TemplateTable& table, std::size_t n, std::uint64_t seed) {
  validate(table);
  require(n >= 2, ErrorKind::Argument, "generate_facts needs n >= 2, got " + std::to_string(n));

  std::vector<std::pair<std::size_t, std::size_t>> trues, falses;  // (template, row)
  for (std::size_t t = 0; t < table.templates.size(); ++t)
    for (std::size_t r = 0; r < table.rows.size(); ++r)
      if (table.applies(table.templates[t], table.rows[r]))
        (table.rows[r].label == 1 ? trues : falses).emplace_back(t, r);

  // Closest-to-even split that the table can supply, within the +-10% band.
  const auto lo = static_cast<std::size_t>(std::ceil(0.45 * static_cast<double>(n)));
  const auto hi = static_cast<std::size_t>(std::floor(0.55 * static_cast<double>(n)));
  std::optional<std::size_t> n_true;
  for (std::size_t k = lo; k <= hi; ++k) {
    if (k > trues.size() || n - k > falses.size()) continue;
    const auto dist = [&](std::size_t x) { return x * 2 > n ? x * 2 - n : n - x * 2; };
    if (!n_true || dist(k) < dist(*n_true)) n_true = k;
  }
  require(n_true.has_value(), ErrorKind::Capacity,
          "table '" + table.dataset + "' cannot supply " + std::to_string(n) + " balanced statements (" +
              std::to_string(trues.size()) + " true, " + std::to_string(falses.size()) + " false combinations)");

  Rng rng(seed);
  rng.shuffle(trues);
  rng.shuffle(falses);
  std::vector<std::pair<std::size_t, std::size_t>> picked(trues.begin(), trues.begin() + *n_true);
  picked.insert(picked.end(), falses.begin(), falses.begin() + (n - *n_true));
  rng.shuffle(picked);

  std::vector<Statement> out;
  out.reserve(n);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const auto& [t, r] = picked[i];
    Statement s;
    s.id = table.dataset + "-" + pad_index(i);
    s.text = fill(table.templates[t].positive, table.rows[r].fillers);
    s.label = table.rows[r].label;
    s.dataset = table.dataset;
    s.polarity = Polarity::Positive;
    s.pair_id = s.id;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> paraphrase_corpus(const TemplateTable& table) {
  validate(table);
  std::vector<std::string> out;
  for (const auto& row : table.rows) {
    if (row.label != 1) continue;
    for (const auto& t : table.templates)
      if (table.applies(t, row)) out.push_back(fill(t.positive, row.fillers));
  }
  return out;
}

Statement negate(const Statement& s, const TemplateTable& table) {
  require(s.label.has_value(), ErrorKind::Unnegatable, "statement " + s.id + " carries no truth label");
  const bool to_negated = s.polarity == Polarity::Positive;
  for (const auto& t : table.templates) {
    const auto caps = match(to_negated ? t.positive : t.negated, s.text);
    if (!caps) continue;
    Statement out = s;
    out.text = fill(to_negated ? t.negated : t.positive, *caps);
    out.label = 1 - *s.label;
    out.polarity = to_negated ? Polarity::Negated : Polarity::Positive;
    const std::string base = s.pair_id.value_or(s.id);
    out.pair_id = base;
    out.id = to_negated ? base + kNegSuffix : base;
    if (to_negated) {
      out.dataset = "Neg" + s.dataset;
    } else if (s.dataset.starts_with("Neg")) {
      out.dataset = s.dataset.substr(3);
    }
    return out;
  }
  fail(ErrorKind::Unnegatable, "'" + s.text + "' matches no template of table '" + table.dataset + "'");
}

std::vector<ContrastPair> make_contrast_pairs(const std::vector<Statement>& statements) {
  struct Members {
    std::vector<std::size_t> pos, neg;
  };
  std::map<std::string, Members> by_pair;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < statements.size(); ++i) {
    const auto& s = statements[i];
    if (!s.pair_id) continue;
    auto [it, inserted] = by_pair.try_emplace(*s.pair_id);
    if (inserted) order.push_back(*s.pair_id);
    (s.polarity == Polarity::Positive ? it->second.pos : it->second.neg).push_back(i);
  }
  std::vector<std::string> offenders;
  for (const auto& id : order) {
    const auto& m = by_pair.at(id);
    if (m.pos.size() != 1 || m.neg.size() != 1) offenders.push_back(id);
  }
  if (!offenders.empty()) {
    std::string msg = "unmatched pair_id(s):";
    for (const auto& id : offenders) msg += " " + id;
    fail(ErrorKind::Pairing, msg);
  }
  std::vector<ContrastPair> pairs;
  pairs.reserve(order.size());
  for (const auto& id : order) {
    const auto& m = by_pair.at(id);
    pairs.push_back({m.pos[0], m.neg[0], statements[m.pos[0]].label});
  }
  // Pairs follow the order of their positive members.
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.pos_index < b.pos_index; });
  return pairs;
}

namespace {

std::string count_words(int n) {
  static const char* words[] = {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
                                "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen",
                                "eighteen", "nineteen", "twenty"};
  return n <= 20 ? words[n] : std::to_string(n);
}

}  // namespace

std::string urn_prompt(const Urn& urn) {
  std::vector<std::string> parts;
  for (const auto& [color, count] : urn.counts) {
    if (count == 0) continue;
    parts.push_back(count_words(count) + " " + color + (count == 1 ? " ball" : " balls"));
  }
  std::string contents;
  if (parts.size() == 1) {
    contents = parts[0] + " and nothing else";
  } else {
    for (const auto& p : parts) contents += p + ", ";
    contents += "and nothing else";
  }
  return "There is an urn with " + contents + ". A ball is drawn uniformly at random.";
}

std::vector<Statement> generate_chance_set(const std::vector<Urn>& urns, std::uint64_t seed) {
  std::vector<Statement> out;
  out.reserve(urns.size());
  for (const auto& urn : urns) {
    std::int64_t total = 0, hits = 0;
    for (const auto& [color, count] : urn.counts) {
      require(count >= 0, ErrorKind::Argument, "negative ball count for color " + color);
      total += count;
      if (color == urn.query) hits += count;
    }
    require(total >= 1, ErrorKind::Argument, "urn with zero balls");
    Statement s;
    s.text = urn_prompt(urn) + " The ball drawn is " + urn.query + ".";
    s.dataset = "Chance";
    s.chance = Rational::make(hits, total);
    out.push_back(std::move(s));
  }
  Rng(seed).shuffle(out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = "Chance-" + pad_index(i);
  return out;
}

std::size_t chance_outcome_offset(const Statement& s) {
  require(s.chance.has_value(), ErrorKind::Argument, "statement " + s.id + " is not a chance statement");
  const auto pos = s.text.rfind(". ", s.text.size() - 2);
  require(pos != std::string::npos, ErrorKind::Argument, "chance statement without a prompt: " + s.id);
  return pos + 2;
}

std::vector<Urn> random_urns(std::size_t count, std::uint64_t seed) {
  static const char* colors[] = {"red", "blue", "green", "yellow", "purple", "white", "black", "orange"};
  constexpr std::size_t n_colors = std::size(colors);
  Rng rng(seed);
  std::vector<Urn> urns;
  while (urns.size() < count) {
    const std::size_t k = 2 + rng.below(2);
    std::vector<std::size_t> idx(n_colors);
    for (std::size_t i = 0; i < n_colors; ++i) idx[i] = i;
    rng.shuffle(idx);
    Urn urn;
    int total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const int c = static_cast<int>(rng.below(10));
      total += c;
      urn.counts.emplace_back(colors[idx[i]], c);
    }
    if (total == 0) continue;
    urn.query = urn.counts[rng.below(k)].first;
    urns.push_back(std::move(urn));
  }
  return urns;
}

Split split_leave_one_out(const std::map<std::string, std::vector<Statement>>& datasets, const std::string& holdout) {
  require(datasets.size() >= 2, ErrorKind::Protocol, "leave-one-out needs at least two datasets");
  const auto it = datasets.find(holdout);
  require(it != datasets.end(), ErrorKind::Key, "no dataset named '" + holdout + "'");
  Split split;
  split.test = it->second;
  std::set<std::string> test_ids;
  for (const auto& s : split.test) test_ids.insert(s.id);
  for (const auto& [name, statements] : datasets) {
    if (name == holdout) continue;
    for (const auto& s : statements) {
      require(!test_ids.contains(s.id), ErrorKind::Data, "statement id " + s.id + " appears in train and test");
      split.train.push_back(s);
    }
  }
  return split;
}

TemplateTable read_template_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  TemplateTable table;
  try {
    const auto j = nlohmann::json::parse(in);
    table.dataset = j.at("dataset").get<std::string>();
    for (const auto& t : j.at("templates")) table.templates.push_back({t.at("positive"), t.at("negated")});
    for (const auto& r : j.at("rows"))
      table.rows.push_back({r.at("fillers").get<std::map<std::string, std::string>>(), r.at("label").get<int>()});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Configuration, path.string() + ": " + e.what());
  }
  validate(table);
  return table;
}

}  // namespace vlab
