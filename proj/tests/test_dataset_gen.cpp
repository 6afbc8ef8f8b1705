#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "support.hpp"
#include "vlab/dataset_gen.hpp"
#include "vlab/rng.hpp"

using namespace vlab;
using vlab::testing::kind_of;

namespace {

// Oracle: find the table row whose positive fill reproduces the text.
std::optional<int> label_from_table(const TemplateTable& t, const std::string& text) {
  for (const auto& tpl : t.templates)
    for (const auto& row : t.rows)
      if (t.applies(tpl, row) && fill(tpl.positive, row.fillers) == text) return row.label;
  return std::nullopt;
}

Statement fact(const std::string& id, const std::string& text, int label, Polarity pol, const std::string& pair) {
  Statement s;
  s.id = id;
  s.text = text;
  s.label = label;
  s.dataset = "T";
  s.polarity = pol;
  s.pair_id = pair;
  return s;
}

std::string jsonl(const std::vector<Statement>& v) {
  std::string out;
  for (const auto& s : v) out += to_json_line(s) + "\n";
  return out;
}

}  // namespace

TEST_CASE("four city statements, balanced, labels agree with the entity table") {
  const auto& cities = builtin_table("Cities");
  const auto st = generate_facts(cities, 4, 7);
  REQUIRE(st.size() == 4);
  int ones = 0;
  for (const auto& s : st) {
    CHECK(s.polarity == Polarity::Positive);
    CHECK(s.dataset == "Cities");
    const auto expected = label_from_table(cities, s.text);
    REQUIRE(expected.has_value());
    CHECK(*s.label == *expected);
    ones += *s.label;
  }
  CHECK(ones == 2);
}

TEST_CASE("Tripoli row fills the published sentence") {
  const auto& cities = builtin_table("Cities");
  CHECK(label_from_table(cities, "Tripoli is a city in Libya.") == 1);
  const auto all = generate_facts(cities, 2 * cities.true_combinations(), 1);
  bool found = false;
  for (const auto& s : all) found |= s.text == "Tripoli is a city in Libya." && s.label == 1;
  CHECK(found);
}

TEST_CASE("bad requests") {
  const auto& cities = builtin_table("Cities");
  CHECK(kind_of([&] { generate_facts(cities, 0, 1); }) == ErrorKind::Argument);
  CHECK(kind_of([&] { generate_facts(cities, 1, 1); }) == ErrorKind::Argument);
  CHECK(kind_of([&] { generate_facts(cities, 1000000, 1); }) == ErrorKind::Capacity);
  TemplateTable empty{"Empty", {}, {}};
  CHECK(kind_of([&] { generate_facts(empty, 4, 1); }) == ErrorKind::Configuration);
  TemplateTable broken{"Broken", {{"{a} is {b}.", "{a} is not {c}."}}, {{{{"a", "x"}, {"b", "y"}}, 1}}};
  CHECK(kind_of([&] { validate(broken); }) == ErrorKind::Configuration);
}

TEST_CASE("generation is byte-identical per seed and balanced") {
  for (const auto& t : builtin_tables()) {
    const auto a = generate_facts(t, 500, 3);
    CHECK(jsonl(a) == jsonl(generate_facts(t, 500, 3)));
    CHECK(jsonl(a) != jsonl(generate_facts(t, 500, 4)));
    std::set<std::string> ids, texts;
    int ones = 0;
    for (const auto& s : a) {
      ids.insert(s.id);
      texts.insert(s.text);
      ones += *s.label;
      CHECK_NOTHROW(validate(s));
    }
    CHECK(ids.size() == 500);
    CHECK(texts.size() == 500);
    CHECK(std::abs(2 * ones - 500) <= 50);
  }
  Rng rng(1);
  for (int trial = 0; trial < 40; ++trial) {
    const auto& t = builtin_tables()[rng.below(builtin_tables().size())];
    const auto n = 2 + rng.below(200);
    const auto st = generate_facts(t, n, rng.next_u64());
    int ones = 0;
    for (const auto& s : st) ones += *s.label;
    CHECK(std::abs(2.0 * ones - static_cast<double>(n)) / static_cast<double>(n) <= 0.1 + 1e-12);
  }
}

TEST_CASE("negation examples") {
  const auto& facts = builtin_table("Facts");
  Statement earth = fact("Facts-x", "The earth orbits the sun.", 1, Polarity::Positive, "Facts-x");
  earth.dataset = "Facts";
  const auto neg = negate(earth, facts);
  CHECK(neg.text == "The earth doesn't orbit the sun.");
  CHECK(neg.label == 0);
  CHECK(neg.polarity == Polarity::Negated);
  CHECK(neg.pair_id == earth.id);
  CHECK(neg.dataset == "NegFacts");
  CHECK(earth.text == "The earth orbits the sun.");

  Statement tripoli = fact("Cities-x", "Tripoli is a city in Libya.", 1, Polarity::Positive, "Cities-x");
  tripoli.dataset = "Cities";
  CHECK(negate(tripoli, builtin_table("Cities")).text == "Tripoli is not a city in Libya.");

  Statement odd = fact("Facts-y", "Bananas are purple.", 0, Polarity::Positive, "Facts-y");
  CHECK(kind_of([&] { negate(odd, facts); }) == ErrorKind::Unnegatable);
}

TEST_CASE("negation flips labels and is an involution on every table") {
  for (const auto& t : builtin_tables()) {
    for (const auto& s : generate_facts(t, 200, 5)) {
      const auto n = negate(s, t);
      CHECK(*n.label == 1 - *s.label);
      CHECK(n.text != s.text);
      CHECK_NOTHROW(validate(n));
      CHECK(negate(n, t) == s);
    }
  }
}

TEST_CASE("contrast pairing") {
  std::vector<Statement> st;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "T-" + std::to_string(i);
    st.push_back(fact(id, "Claim " + std::to_string(i) + " holds.", i % 2, Polarity::Positive, id));
  }
  for (int i = 9; i >= 0; --i) {
    const std::string id = "T-" + std::to_string(i);
    st.push_back(fact(id + "-neg", "Claim " + std::to_string(i) + " fails.", 1 - i % 2, Polarity::Negated, id));
  }
  const auto pairs = make_contrast_pairs(st);
  REQUIRE(pairs.size() == 10);
  for (const auto& p : pairs) {
    CHECK(st[p.pos_index].polarity == Polarity::Positive);
    CHECK(st[p.neg_index].polarity == Polarity::Negated);
    CHECK(st[p.pos_index].pair_id == st[p.neg_index].pair_id);
    CHECK(p.label == st[p.pos_index].label);
  }

  const std::vector<Statement> flat = {fact("E", "The earth is flat.", 0, Polarity::Positive, "E"),
                                       fact("E-neg", "The earth is not flat.", 1, Polarity::Negated, "E")};
  const auto fp = make_contrast_pairs(flat);
  REQUIRE(fp.size() == 1);
  CHECK(fp[0].pos_index == 0);
  CHECK(fp[0].neg_index == 1);

  std::vector<Statement> orphaned(st.begin(), st.begin() + 3);
  orphaned.push_back(st[19]);  // negation of T-0
  orphaned.push_back(st[18]);  // negation of T-1
  try {
    make_contrast_pairs(orphaned);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Pairing);
    CHECK(std::string(e.what()).find("T-2") != std::string::npos);
  }
}

TEST_CASE("urn prompts and exact chances") {
  const Urn urn{{{"yellow", 6}, {"purple", 4}}, "purple"};
  CHECK(urn_prompt(urn) ==
        "There is an urn with six yellow balls, four purple balls, and nothing else. A ball is drawn uniformly at "
        "random.");
  const auto st = generate_chance_set({urn, Urn{{{"yellow", 5}, {"purple", 0}}, "purple"},
                                       Urn{{{"red", 3}, {"blue", 7}}, "red"}},
                                      1);
  REQUIRE(st.size() == 3);
  std::map<std::string, Rational> by_text;
  for (const auto& s : st) {
    CHECK_FALSE(s.label.has_value());
    CHECK(s.dataset == "Chance");
    CHECK_NOTHROW(validate(s));
    CHECK(s.text.substr(chance_outcome_offset(s)).rfind("The ball drawn is ", 0) == 0);
    by_text[s.text] = *s.chance;
  }
  CHECK(by_text.at(urn_prompt(urn) + " The ball drawn is purple.") == Rational::make(2, 5));
  CHECK(by_text.at(urn_prompt(Urn{{{"yellow", 5}, {"purple", 0}}, "purple"}) + " The ball drawn is purple.") ==
        Rational::make(0, 1));
  CHECK(by_text.at(urn_prompt(Urn{{{"red", 3}, {"blue", 7}}, "red"}) + " The ball drawn is red.") ==
        Rational::make(3, 10));
  CHECK(kind_of([] { generate_chance_set({Urn{{{"red", 0}}, "red"}}, 1); }) == ErrorKind::Argument);
}

TEST_CASE("random urns give exact count ratios") {
  const auto urns = random_urns(200, 9);
  const auto st = generate_chance_set(urns, 2);
  REQUIRE(st.size() == urns.size());
  std::multiset<std::pair<std::int64_t, std::int64_t>> expected, got;
  for (const auto& u : urns) {
    std::int64_t total = 0, hit = 0;
    for (const auto& [c, n] : u.counts) {
      total += n;
      if (c == u.query) hit += n;
    }
    const auto r = Rational::make(hit, total);
    expected.insert({r.num, r.den});
  }
  for (const auto& s : st) got.insert({s.chance->num, s.chance->den});
  CHECK(expected == got);
}

TEST_CASE("leave-one-out splits") {
  std::map<std::string, std::vector<Statement>> ds;
  for (const auto& t : builtin_tables()) ds[t.dataset] = generate_facts(t, 20, 1);
  const auto split = split_leave_one_out(ds, "Animals");
  CHECK(split.test.size() == 20);
  CHECK(split.train.size() == 100);
  for (const auto& s : split.test) CHECK(s.dataset == "Animals");
  for (const auto& s : split.train) CHECK(s.dataset != "Animals");
  CHECK(kind_of([&] { split_leave_one_out(ds, "Oceans"); }) == ErrorKind::Key);

  std::map<std::string, std::vector<Statement>> two{{"Cities", ds["Cities"]}, {"Facts", ds["Facts"]}};
  CHECK(split_leave_one_out(two, "Cities").train == ds["Facts"]);
  CHECK(split_leave_one_out(two, "Facts").train == ds["Cities"]);
  std::map<std::string, std::vector<Statement>> one{{"Cities", ds["Cities"]}};
  CHECK(kind_of([&] { split_leave_one_out(one, "Cities"); }) == ErrorKind::Protocol);
}

TEST_CASE("statement records") {
  Statement s = fact("Cities-0001", "Tripoli is a city in Libya.", 1, Polarity::Positive, "Cities-0001");
  s.dataset = "Cities";
  CHECK(to_json_line(s) ==
        R"({"id":"Cities-0001","text":"Tripoli is a city in Libya.","label":1,"dataset":"Cities","polarity":"positive","pair_id":"Cities-0001"})");
  CHECK(parse_json_line(to_json_line(s)) == s);

  Statement c;
  c.id = "Chance-0000";
  c.text = "The ball drawn is red.";
  c.dataset = "Chance";
  c.chance = Rational::make(2, 5);
  CHECK(to_json_line(c) == R"({"id":"Chance-0000","text":"The ball drawn is red.","dataset":"Chance","polarity":"positive","chance":0.4})");
  CHECK(parse_json_line(to_json_line(c)).chance == Rational::make(2, 5));

  CHECK(kind_of([] { parse_json_line(R"({"id":"a","text":"b.","label":1,"dataset":"d","polarity":"positive","x":1})"); }) ==
        ErrorKind::Malformed);
  CHECK(kind_of([] { parse_json_line("{oops"); }) == ErrorKind::Malformed);

  Statement both = s;
  both.chance = Rational::make(1, 2);
  CHECK(kind_of([&] { validate(both); }) == ErrorKind::Validation);
  Statement no_period = s;
  no_period.text = "Tripoli is a city in Libya";
  CHECK(kind_of([&] { validate(no_period); }) == ErrorKind::Validation);
  Statement unpaired = s;
  unpaired.polarity = Polarity::Negated;
  unpaired.pair_id.reset();
  CHECK(kind_of([&] { validate(unpaired); }) == ErrorKind::Validation);
}

TEST_CASE("rationals survive the decimal round trip") {
  for (std::int64_t den = 1; den <= 40; ++den)
    for (std::int64_t num = 0; num <= den; ++num) {
      const auto r = Rational::make(num, den);
      CHECK(Rational::from_double(r.to_double()) == r);
    }
}

TEST_CASE("statement files roundtrip with line-numbered errors") {
  const auto st = generate_facts(builtin_table("Elements"), 50, 2);
  const auto path = vlab::testing::scratch("stmts.jsonl");
  write_statements(path, st);
  CHECK(read_statements(path) == st);
  {
    std::ofstream f(path, std::ios::app);
    f << "not json\n";
  }
  try {
    read_statements(path);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Malformed);
    CHECK(std::string(e.what()).find("51") != std::string::npos);
  }
}

TEST_CASE("every template fills to the golden sentences") {
  std::ostringstream out;
  for (const auto& t : builtin_tables()) {
    for (const auto& tpl : t.templates) {
      for (const auto& row : t.rows) {
        if (!t.applies(tpl, row)) continue;
        out << t.dataset << "\t" << row.label << "\t" << fill(tpl.positive, row.fillers) << "\t"
            << fill(tpl.negated, row.fillers) << "\n";
        break;
      }
    }
  }
  const std::string path = std::string(VLAB_TEST_DATA) + "/golden/template_fills.tsv";
  if (std::getenv("VLAB_UPDATE_GOLDEN")) {
    std::ofstream(path) << out.str();
  }
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream want;
  want << in.rdbuf();
  CHECK(want.str() == out.str());
}

TEST_CASE("paraphrase corpus holds exactly the true positive fills") {
  for (const auto& table : builtin_tables()) {
    const auto corpus = paraphrase_corpus(table);
    CHECK(corpus.size() == table.true_combinations());
    std::set<std::string> falses;
    for (const auto& row : table.rows)
      if (row.label == 0)
        for (const auto& t : table.templates)
          if (table.applies(t, row)) falses.insert(fill(t.positive, row.fillers));
    for (const auto& text : corpus) {
      CHECK(text.back() == '.');
      CHECK(falses.count(text) == 0);
    }
  }
}
