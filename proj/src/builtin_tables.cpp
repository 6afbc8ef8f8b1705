#include <algorithm>
#include <array>
#include <tuple>
#include <functional>
#include <set>

#include "vlab/dataset_gen.hpp"
#include "vlab/error.hpp"
#include "vlab/rng.hpp"

namespace vlab {
namespace {

using Fact = std::vector<std::string>;
using Allowed = std::function<bool(const Fact& key_fact, const Fact& value_fact)>;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Adds one true row per fact and `false_per_key` false rows built by pairing the
// key slots of a fact with the value slots of other facts.
void add_relation(TemplateTable& table, const std::vector<std::string>& slots, std::size_t n_key,
                  const std::vector<Fact>& facts, std::size_t false_per_key, const Allowed& allowed = {}) {
  auto row_of = [&](const Fact& keys, const Fact& values) {
    EntityRow row;
    for (std::size_t s = 0; s < n_key; ++s) row.fillers[slots[s]] = keys[s];
    for (std::size_t s = n_key; s < slots.size(); ++s) row.fillers[slots[s]] = values[s];
    return row;
  };
  auto values_of = [&](const Fact& f) { return Fact(f.begin() + static_cast<std::ptrdiff_t>(n_key), f.end()); };

  Rng rng(fnv1a64(table.dataset + "/" + slots.back()));
  for (std::size_t i = 0; i < facts.size(); ++i) {
    EntityRow truth = row_of(facts[i], facts[i]);
    truth.label = 1;
    table.rows.push_back(std::move(truth));

    std::set<Fact> used;
    for (std::size_t j : rng.permutation(facts.size())) {
      if (used.size() == false_per_key) break;
      const Fact v = values_of(facts[j]);
      if (lower(v[0]) == lower(values_of(facts[i])[0]) || used.contains(v)) continue;
      // Skip pairings that happen to be true for another fact with the same key.
      bool coincides = false;
      for (const auto& f : facts)
        if (f[0] == facts[i][0] && values_of(f) == v) coincides = true;
      if (coincides) continue;
      if (lower(v[0]) == lower(facts[i][0])) continue;
      if (allowed && !allowed(facts[i], facts[j])) continue;
      used.insert(v);
      EntityRow row = row_of(facts[i], facts[j]);
      row.label = 0;
      table.rows.push_back(std::move(row));
    }
  }
}

TemplateTable cities() {
  TemplateTable t{"Cities", {}, {}};
  t.templates = {
      {"{city} is a city in {country}.", "{city} is not a city in {country}."},
      {"{city} is located in {country}.", "{city} is not located in {country}."},
      {"The city of {city} is in {country}.", "The city of {city} is not in {country}."},
      {"{city} lies within the borders of {country}.", "{city} does not lie within the borders of {country}."},
      {"You can find {city} in {country}.", "You cannot find {city} in {country}."},
  };
  const std::vector<Fact> facts = {
      {"Tripoli", "Libya"}, {"Paris", "France"}, {"Berlin", "Germany"}, {"Madrid", "Spain"},
      {"Lisbon", "Portugal"}, {"Rome", "Italy"}, {"Vienna", "Austria"}, {"Warsaw", "Poland"},
      {"Prague", "Czechia"}, {"Budapest", "Hungary"}, {"Athens", "Greece"}, {"Oslo", "Norway"},
      {"Stockholm", "Sweden"}, {"Helsinki", "Finland"}, {"Copenhagen", "Denmark"}, {"Dublin", "Ireland"},
      {"Amsterdam", "the Netherlands"}, {"Brussels", "Belgium"}, {"Bern", "Switzerland"}, {"Moscow", "Russia"},
      {"Kyiv", "Ukraine"}, {"Ankara", "Turkey"}, {"Cairo", "Egypt"}, {"Nairobi", "Kenya"},
      {"Lagos", "Nigeria"}, {"Accra", "Ghana"}, {"Dakar", "Senegal"}, {"Tunis", "Tunisia"},
      {"Algiers", "Algeria"}, {"Rabat", "Morocco"}, {"Khartoum", "Sudan"}, {"Addis Ababa", "Ethiopia"},
      {"Kampala", "Uganda"}, {"Lima", "Peru"}, {"Bogota", "Colombia"}, {"Quito", "Ecuador"},
      {"Santiago", "Chile"}, {"Caracas", "Venezuela"}, {"Montevideo", "Uruguay"}, {"Havana", "Cuba"},
      {"Toronto", "Canada"}, {"Chicago", "the United States"}, {"Osaka", "Japan"}, {"Seoul", "South Korea"},
      {"Beijing", "China"}, {"Hanoi", "Vietnam"}, {"Bangkok", "Thailand"}, {"Jakarta", "Indonesia"},
      {"Manila", "the Philippines"}, {"Delhi", "India"}, {"Karachi", "Pakistan"}, {"Dhaka", "Bangladesh"},
      {"Kathmandu", "Nepal"}, {"Tehran", "Iran"}, {"Baghdad", "Iraq"}, {"Riyadh", "Saudi Arabia"},
      {"Doha", "Qatar"}, {"Amman", "Jordan"}, {"Beirut", "Lebanon"}, {"Kabul", "Afghanistan"},
      {"Tashkent", "Uzbekistan"}, {"Sydney", "Australia"}, {"Auckland", "New Zealand"}, {"Guadalajara", "Mexico"},
      {"Sao Paulo", "Brazil"}, {"Rosario", "Argentina"}, {"Edinburgh", "Scotland"}, {"Reykjavik", "Iceland"},
  };
  add_relation(t, {"city", "country"}, 1, facts, 5);
  return t;
}

TemplateTable companies() {
  TemplateTable t{"Companies", {}, {}};
  t.templates = {
      {"{company} has headquarters in {country}.", "{company} does not have headquarters in {country}."},
      {"{company} is headquartered in {country}.", "{company} is not headquartered in {country}."},
      {"The headquarters of {company} are located in {country}.",
       "The headquarters of {company} are not located in {country}."},
      {"{company} operates in the {industry} industry.", "{company} does not operate in the {industry} industry."},
      {"{company} is a company in the {industry} sector.", "{company} is not a company in the {industry} sector."},
  };
  const std::vector<Fact> hq = {
      {"Walmart", "the United States"}, {"Lowe's", "the United States"}, {"Microsoft", "the United States"},
      {"Boeing", "the United States"}, {"Pfizer", "the United States"}, {"Ford", "the United States"},
      {"ExxonMobil", "the United States"}, {"Verizon", "the United States"}, {"JPMorgan Chase", "the United States"},
      {"Amazon", "the United States"}, {"Toyota", "Japan"}, {"Honda", "Japan"}, {"Sony", "Japan"},
      {"Nintendo", "Japan"}, {"Samsung", "South Korea"}, {"Hyundai", "South Korea"}, {"Volkswagen", "Germany"},
      {"BMW", "Germany"}, {"Bayer", "Germany"}, {"Deutsche Bank", "Germany"}, {"Adidas", "Germany"},
      {"Lufthansa", "Germany"}, {"Nestle", "Switzerland"}, {"Novartis", "Switzerland"}, {"Roche", "Switzerland"},
      {"UBS", "Switzerland"}, {"HSBC", "the United Kingdom"}, {"BP", "the United Kingdom"},
      {"Vodafone", "the United Kingdom"}, {"Tesco", "the United Kingdom"}, {"Danone", "France"},
      {"Renault", "France"}, {"Orange", "France"}, {"Carrefour", "France"}, {"L'Oreal", "France"},
      {"Ferrari", "Italy"}, {"Eni", "Italy"}, {"Volvo Cars", "Sweden"}, {"Ericsson", "Sweden"},
      {"Nokia", "Finland"}, {"Lego", "Denmark"}, {"Maersk", "Denmark"}, {"Novo Nordisk", "Denmark"},
      {"Equinor", "Norway"}, {"Heineken", "the Netherlands"}, {"Royal Bank of Canada", "Canada"},
      {"Bank of Montreal", "Canada"}, {"Shopify", "Canada"}, {"Petrobras", "Brazil"}, {"Embraer", "Brazil"},
      {"Tata Motors", "India"}, {"Infosys", "India"}, {"Alibaba", "China"}, {"Huawei", "China"},
      {"Qantas", "Australia"}, {"BHP", "Australia"}, {"Emirates", "the United Arab Emirates"},
      {"Singapore Airlines", "Singapore"}, {"Vale", "Brazil"},
  };
  const std::vector<Fact> industry = {
      {"Walmart", "retail"}, {"Lowe's", "home improvement"}, {"Microsoft", "software"}, {"Boeing", "aerospace"},
      {"Pfizer", "pharmaceutical"}, {"Ford", "automotive"}, {"ExxonMobil", "oil and gas"},
      {"Verizon", "telecommunications"}, {"JPMorgan Chase", "banking"}, {"Amazon", "e-commerce"},
      {"Toyota", "automotive"}, {"Honda", "automotive"}, {"Nintendo", "video game"}, {"Hyundai", "automotive"},
      {"Volkswagen", "automotive"}, {"BMW", "automotive"}, {"Bayer", "pharmaceutical"},
      {"Deutsche Bank", "banking"}, {"Adidas", "sportswear"}, {"Lufthansa", "airline"}, {"Nestle", "food"},
      {"Novartis", "pharmaceutical"}, {"Roche", "pharmaceutical"}, {"UBS", "banking"}, {"HSBC", "banking"},
      {"BP", "oil and gas"}, {"Vodafone", "telecommunications"}, {"Tesco", "retail"}, {"Danone", "food"},
      {"Renault", "automotive"}, {"Orange", "telecommunications"}, {"Carrefour", "retail"},
      {"L'Oreal", "cosmetics"}, {"Ferrari", "automotive"}, {"Eni", "oil and gas"}, {"Volvo Cars", "automotive"},
      {"Ericsson", "telecommunications"}, {"Nokia", "telecommunications"}, {"Lego", "toy"},
      {"Maersk", "shipping"}, {"Novo Nordisk", "pharmaceutical"}, {"Equinor", "oil and gas"},
      {"Heineken", "brewing"}, {"Royal Bank of Canada", "banking"}, {"Bank of Montreal", "banking"},
      {"Shopify", "software"}, {"Petrobras", "oil and gas"}, {"Embraer", "aerospace"},
      {"Tata Motors", "automotive"}, {"Infosys", "software"}, {"Qantas", "airline"}, {"BHP", "mining"},
      {"Emirates", "airline"}, {"Singapore Airlines", "airline"}, {"Vale", "mining"},
  };
  add_relation(t, {"company", "country"}, 1, hq, 3);
  add_relation(t, {"company", "industry"}, 1, industry, 3);
  return t;
}

TemplateTable elements() {
  TemplateTable t{"Elements", {}, {}};
  t.templates = {
      {"{element} has the atomic number of {number}.", "{element} does not have the atomic number of {number}."},
      {"The atomic number of {element} is {number}.", "The atomic number of {element} is not {number}."},
      {"{element} appears in its standard state as {state}.",
       "{element} does not appear in its standard state as {state}."},
      {"The chemical symbol for {element} is {symbol}.", "The chemical symbol for {element} is not {symbol}."},
  };
  static const char* names[] = {
      "Hydrogen", "Helium", "Lithium", "Beryllium", "Boron", "Carbon", "Nitrogen", "Oxygen", "Fluorine", "Neon",
      "Sodium", "Magnesium", "Aluminium", "Silicon", "Phosphorus", "Sulfur", "Chlorine", "Argon", "Potassium",
      "Calcium", "Scandium", "Titanium", "Vanadium", "Chromium", "Manganese", "Iron", "Cobalt", "Nickel", "Copper",
      "Zinc", "Gallium", "Germanium", "Arsenic", "Selenium", "Bromine", "Krypton", "Rubidium", "Strontium",
      "Yttrium", "Zirconium", "Niobium", "Molybdenum", "Technetium", "Ruthenium", "Rhodium", "Palladium", "Silver",
      "Cadmium", "Indium", "Tin", "Antimony", "Tellurium", "Iodine", "Xenon", "Caesium", "Barium", "Lanthanum",
      "Cerium", "Praseodymium", "Neodymium"};
  static const char* symbols[] = {"H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
                                  "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
                                  "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
                                  "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
                                  "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd"};
  std::vector<Fact> numbers, states, syms;
  const std::set<int> gases = {1, 2, 7, 8, 9, 10, 17, 18, 36, 54};
  for (int z = 1; z <= 60; ++z) {
    const std::string name = names[z - 1];
    numbers.push_back({name, std::to_string(z)});
    states.push_back({name, gases.contains(z) ? "gas" : (z == 35 ? "liquid" : "solid")});
    syms.push_back({name, symbols[z - 1]});
  }
  for (const auto& [name, z, sym, state] : std::vector<std::tuple<const char*, int, const char*, const char*>>{
           {"Platinum", 78, "Pt", "solid"}, {"Gold", 79, "Au", "solid"}, {"Mercury", 80, "Hg", "liquid"},
           {"Lead", 82, "Pb", "solid"}, {"Radon", 86, "Rn", "gas"}}) {
    numbers.push_back({name, std::to_string(z)});
    states.push_back({name, state});
    syms.push_back({name, sym});
  }
  add_relation(t, {"element", "number"}, 1, numbers, 3);
  // Only three states exist, so each element gets the two wrong ones.
  for (const auto& f : states) {
    t.rows.push_back({{{"element", f[0]}, {"state", f[1]}}, 1});
    for (const char* s : {"gas", "liquid", "solid"})
      if (f[1] != s) t.rows.push_back({{{"element", f[0]}, {"state", s}}, 0});
  }
  add_relation(t, {"element", "symbol"}, 1, syms, 2);
  return t;
}

TemplateTable animals() {
  TemplateTable t{"Animals", {}, {}};
  t.templates = {
      {"The {animal} uses {locomotion} for locomotion.", "The {animal} does not use {locomotion} for locomotion."},
      {"The {animal} has a {habitat} habitat.", "The {animal} does not have a {habitat} habitat."},
      {"The {animal} is {class}.", "The {animal} is not {class}."},
      {"Biologists classify the {animal} as {class}.", "Biologists do not classify the {animal} as {class}."},
      {"The {animal} is {diet}.", "The {animal} is not {diet}."},
  };
  // animal, habitat, locomotion, class, diet
  const std::vector<std::array<const char*, 5>> zoo = {
      {"lion", "grassland", "walking", "a mammal", "a carnivore"},
      {"zebra", "grassland", "walking", "a mammal", "a herbivore"},
      {"giraffe", "grassland", "walking", "a mammal", "a herbivore"},
      {"hyena", "grassland", "walking", "a mammal", "a carnivore"},
      {"giant anteater", "grassland", "walking", "a mammal", "an insectivore"},
      {"bison", "grassland", "walking", "a mammal", "a herbivore"},
      {"cheetah", "grassland", "walking", "a mammal", "a carnivore"},
      {"kangaroo", "grassland", "hopping", "a mammal", "a herbivore"},
      {"ostrich", "grassland", "walking", "a bird", "an omnivore"},
      {"honeybee", "grassland", "flying", "an insect", "a herbivore"},
      {"grasshopper", "grassland", "hopping", "an insect", "a herbivore"},
      {"camel", "desert", "walking", "a mammal", "a herbivore"},
      {"fennec fox", "desert", "walking", "a mammal", "an omnivore"},
      {"rattlesnake", "desert", "slithering", "a reptile", "a carnivore"},
      {"desert tortoise", "desert", "walking", "a reptile", "a herbivore"},
      {"polar bear", "polar", "walking", "a mammal", "a carnivore"},
      {"emperor penguin", "polar", "swimming", "a bird", "a carnivore"},
      {"walrus", "polar", "swimming", "a mammal", "a carnivore"},
      {"arctic fox", "polar", "walking", "a mammal", "an omnivore"},
      {"snowy owl", "polar", "flying", "a bird", "a carnivore"},
      {"beaver", "freshwater", "swimming", "a mammal", "a herbivore"},
      {"river otter", "freshwater", "swimming", "a mammal", "a carnivore"},
      {"hippopotamus", "freshwater", "walking", "a mammal", "a herbivore"},
      {"trout", "freshwater", "swimming", "a fish", "a carnivore"},
      {"pike", "freshwater", "swimming", "a fish", "a carnivore"},
      {"catfish", "freshwater", "swimming", "a fish", "an omnivore"},
      {"bullfrog", "freshwater", "hopping", "an amphibian", "a carnivore"},
      {"axolotl", "freshwater", "swimming", "an amphibian", "a carnivore"},
      {"crocodile", "freshwater", "swimming", "a reptile", "a carnivore"},
      {"dragonfly", "freshwater", "flying", "an insect", "a carnivore"},
      {"dolphin", "marine", "swimming", "a mammal", "a carnivore"},
      {"blue whale", "marine", "swimming", "a mammal", "a carnivore"},
      {"great white shark", "marine", "swimming", "a fish", "a carnivore"},
      {"tuna", "marine", "swimming", "a fish", "a carnivore"},
      {"green sea turtle", "marine", "swimming", "a reptile", "a herbivore"},
      {"harbor seal", "marine", "swimming", "a mammal", "a carnivore"},
      {"albatross", "marine", "flying", "a bird", "a carnivore"},
      {"sea otter", "marine", "swimming", "a mammal", "a carnivore"},
      {"gorilla", "forest", "walking", "a mammal", "a herbivore"},
      {"orangutan", "forest", "climbing", "a mammal", "a herbivore"},
      {"sloth", "forest", "climbing", "a mammal", "a herbivore"},
      {"jaguar", "forest", "walking", "a mammal", "a carnivore"},
      {"toucan", "forest", "flying", "a bird", "an omnivore"},
      {"woodpecker", "forest", "flying", "a bird", "an insectivore"},
      {"python", "forest", "slithering", "a reptile", "a carnivore"},
      {"red deer", "forest", "walking", "a mammal", "a herbivore"},
      {"brown bear", "forest", "walking", "a mammal", "an omnivore"},
      {"koala", "forest", "climbing", "a mammal", "a herbivore"},
      {"mountain goat", "mountain", "climbing", "a mammal", "a herbivore"},
      {"snow leopard", "mountain", "walking", "a mammal", "a carnivore"},
      {"golden eagle", "mountain", "flying", "a bird", "a carnivore"},
      {"yak", "mountain", "walking", "a mammal", "a herbivore"},
      {"aardvark", "grassland", "walking", "a mammal", "an insectivore"},
      {"chameleon", "forest", "climbing", "a reptile", "an insectivore"},
  };
  std::vector<Fact> habitat, locomotion, klass, diet;
  for (const auto& a : zoo) {
    habitat.push_back({a[0], a[1]});
    locomotion.push_back({a[0], a[2]});
    klass.push_back({a[0], a[3]});
    diet.push_back({a[0], a[4]});
  }
  add_relation(t, {"animal", "habitat"}, 1, habitat, 2);
  add_relation(t, {"animal", "locomotion"}, 1, locomotion, 2);
  add_relation(t, {"animal", "class"}, 1, klass, 2);
  add_relation(t, {"animal", "diet"}, 1, diet, 2);
  return t;
}

TemplateTable facts() {
  TemplateTable t{"Facts", {}, {}};
  t.templates = {
      {"{body} orbits {center}.", "{body} doesn't orbit {center}."},
      {"{body} revolves around {center}.", "{body} doesn't revolve around {center}."},
      {"{body} travels in an orbit around {center}.", "{body} doesn't travel in an orbit around {center}."},
      {"{body} circles around {center}.", "{body} doesn't circle around {center}."},
      {"{body} follows a path around {center}.", "{body} doesn't follow a path around {center}."},
      {"The SI unit of {quantity} is the {unit}.", "The SI unit of {quantity} is not the {unit}."},
      {"In physics, {quantity} is measured in {units}.", "In physics, {quantity} is not measured in {units}."},
      {"{compound} is made of {parts}.", "{compound} is not made of {parts}."},
      {"{compound} is composed of {parts}.", "{compound} is not composed of {parts}."},
      {"The chemical formula of {compound_lc} is {formula}.", "The chemical formula of {compound_lc} is not {formula}."},
      {"Chemists write {compound_lc} as {formula}.", "Chemists do not write {compound_lc} as {formula}."},
      {"The main function of the {organ} is to {function}.", "The main function of the {organ} is not to {function}."},
      {"A key job of the {organ} is to {function}.", "A key job of the {organ} is not to {function}."},
      {"The {organ2} is part of the {system} system.", "The {organ2} is not part of the {system} system."},
      {"The {organ2} belongs to the {system} system.", "The {organ2} does not belong to the {system} system."},
      {"{planet} is the {ordinal} planet from the sun.", "{planet} is not the {ordinal} planet from the sun."},
      {"In order from the sun, {planet} is the {ordinal} planet.",
       "In order from the sun, {planet} is not the {ordinal} planet."},
      {"Scientists use {instrument} to measure {measured}.", "Scientists do not use {instrument} to measure {measured}."},
      {"The purpose of {instrument} is to measure {measured}.",
       "The purpose of {instrument} is not to measure {measured}."},
  };
  const std::vector<Fact> orbits = {
      {"The earth", "the sun"}, {"Mars", "the sun"}, {"Venus", "the sun"}, {"Mercury", "the sun"},
      {"Jupiter", "the sun"}, {"Saturn", "the sun"}, {"Uranus", "the sun"}, {"Neptune", "the sun"},
      {"The moon", "the earth"}, {"Io", "Jupiter"}, {"Europa", "Jupiter"}, {"Ganymede", "Jupiter"},
      {"Callisto", "Jupiter"}, {"Titan", "Saturn"}, {"Enceladus", "Saturn"}, {"Phobos", "Mars"},
      {"Deimos", "Mars"}, {"Triton", "Neptune"}, {"Miranda", "Uranus"}, {"Charon", "Pluto"},
  };
  // A moon does orbit the sun indirectly; keep such pairings out of the false rows.
  add_relation(t, {"body", "center"}, 1, orbits, 2,
               [](const Fact& key, const Fact& value) { return !(key[1] != "the sun" && value[1] == "the sun"); });
  const std::vector<Fact> units = {
      {"electric current", "ampere", "amperes"}, {"force", "newton", "newtons"}, {"energy", "joule", "joules"},
      {"power", "watt", "watts"}, {"pressure", "pascal", "pascals"},
      {"thermodynamic temperature", "kelvin", "kelvins"}, {"electrical resistance", "ohm", "ohms"},
      {"voltage", "volt", "volts"}, {"frequency", "hertz", "hertz"}, {"mass", "kilogram", "kilograms"},
      {"electric charge", "coulomb", "coulombs"}, {"capacitance", "farad", "farads"},
      {"luminous intensity", "candela", "candelas"}, {"amount of substance", "mole", "moles"},
      {"magnetic flux", "weber", "webers"}, {"inductance", "henry", "henries"}, {"length", "metre", "metres"},
      {"time", "second", "seconds"},
  };
  add_relation(t, {"quantity", "unit", "units"}, 1, units, 3);
  const std::vector<Fact> compounds = {
      {"Water", "water", "hydrogen and oxygen", "H2O"},
      {"Table salt", "table salt", "sodium and chlorine", "NaCl"},
      {"Carbon dioxide", "carbon dioxide", "carbon and oxygen", "CO2"},
      {"Methane", "methane", "carbon and hydrogen", "CH4"},
      {"Ammonia", "ammonia", "nitrogen and hydrogen", "NH3"},
      {"Rust", "rust", "iron and oxygen", "Fe2O3"},
      {"Quartz", "quartz", "silicon and oxygen", "SiO2"},
      {"Hydrogen chloride", "hydrogen chloride", "hydrogen and chlorine", "HCl"},
      {"Hydrogen sulfide", "hydrogen sulfide", "hydrogen and sulfur", "H2S"},
      {"Magnesium oxide", "magnesium oxide", "magnesium and oxygen", "MgO"},
      {"Potassium chloride", "potassium chloride", "potassium and chlorine", "KCl"},
      {"Calcium fluoride", "calcium fluoride", "calcium and fluorine", "CaF2"},
  };
  add_relation(t, {"compound", "compound_lc", "parts", "formula"}, 2, compounds, 2);
  const std::vector<Fact> functions = {
      {"heart", "pump blood through the body"}, {"lung", "exchange oxygen and carbon dioxide"},
      {"kidney", "filter waste from the blood"}, {"stomach", "break down food"},
      {"brain", "process sensory information"}, {"liver", "produce bile"},
      {"skin", "protect the body from the environment"}, {"pancreas", "produce insulin"},
      {"bladder", "store urine"}, {"small intestine", "absorb nutrients"}, {"trachea", "carry air to the lungs"},
      {"eye", "detect light"},
  };
  add_relation(t, {"organ", "function"}, 1, functions, 2);
  const std::vector<Fact> systems = {
      {"heart", "circulatory"}, {"lung", "respiratory"}, {"kidney", "urinary"}, {"stomach", "digestive"},
      {"brain", "nervous"}, {"liver", "digestive"}, {"skin", "integumentary"}, {"bladder", "urinary"},
      {"small intestine", "digestive"}, {"trachea", "respiratory"},
  };
  add_relation(t, {"organ2", "system"}, 1, systems, 2);
  const std::vector<Fact> planets = {
      {"Mercury", "first"}, {"Venus", "second"}, {"Earth", "third"}, {"Mars", "fourth"},
      {"Jupiter", "fifth"}, {"Saturn", "sixth"}, {"Uranus", "seventh"}, {"Neptune", "eighth"},
  };
  add_relation(t, {"planet", "ordinal"}, 1, planets, 3);
  const std::vector<Fact> instruments = {
      {"a thermometer", "temperature"}, {"a barometer", "atmospheric pressure"},
      {"an ammeter", "electric current"}, {"a voltmeter", "voltage"}, {"a hygrometer", "humidity"},
      {"an anemometer", "wind speed"}, {"a seismometer", "ground motion"}, {"an altimeter", "altitude"},
      {"an odometer", "distance traveled"}, {"a speedometer", "speed"}, {"an ohmmeter", "electrical resistance"},
      {"a pH meter", "acidity"},
  };
  add_relation(t, {"instrument", "measured"}, 1, instruments, 3);
  return t;
}

TemplateTable inventions() {
  TemplateTable t{"Inventions", {}, {}};
  t.templates = {
      {"{inventor} invented {invention}.", "{inventor} did not invent {invention}."},
      {"{inventor} is credited with inventing {invention}.", "{inventor} is not credited with inventing {invention}."},
      {"The inventor of {invention} was {inventor}.", "The inventor of {invention} was not {inventor}."},
      {"{inventor} was the person who invented {invention}.",
       "{inventor} was not the person who invented {invention}."},
      {"{inventor} created {invention}.", "{inventor} did not create {invention}."},
  };
  const std::vector<Fact> facts = {
      {"Ernesto Blanco", "the electric wheelchair"}, {"Alexander Graham Bell", "the telephone"},
      {"Thomas Edison", "the phonograph"}, {"Johannes Gutenberg", "the movable type printing press"},
      {"Alessandro Volta", "the electric battery"}, {"Tim Berners-Lee", "the World Wide Web"},
      {"Willis Carrier", "the modern air conditioner"}, {"Alfred Nobel", "dynamite"},
      {"Louis Braille", "the Braille writing system"}, {"Elisha Otis", "the safety elevator"},
      {"Charles Babbage", "the difference engine"}, {"Rudolf Diesel", "the diesel engine"},
      {"Nikola Tesla", "the induction motor"}, {"Eli Whitney", "the cotton gin"},
      {"Elias Howe", "the lockstitch sewing machine"}, {"George Eastman", "roll film"},
      {"Zacharias Janssen", "the compound microscope"}, {"Benjamin Franklin", "the lightning rod"},
      {"Philo Farnsworth", "the electronic television"}, {"Percy Spencer", "the microwave oven"},
      {"Garrett Morgan", "the three-position traffic signal"}, {"Mary Anderson", "the windshield wiper"},
      {"Josephine Cochrane", "the dishwasher"}, {"Stephanie Kwolek", "Kevlar"},
      {"Chester Carlson", "xerography"}, {"Robert Goddard", "the liquid-fueled rocket"},
      {"Jack Kilby", "the integrated circuit"}, {"Karl Drais", "the dandy horse"},
      {"John Boyd Dunlop", "the pneumatic tyre"}, {"Charles Goodyear", "vulcanized rubber"},
      {"Evangelista Torricelli", "the mercury barometer"}, {"Daniel Gabriel Fahrenheit", "the mercury thermometer"},
      {"Christiaan Huygens", "the pendulum clock"}, {"Blaise Pascal", "the Pascaline calculator"},
      {"Louis Daguerre", "the daguerreotype"}, {"Ole Evinrude", "the outboard motor"},
      {"Laszlo Biro", "the ballpoint pen"}, {"King Camp Gillette", "the disposable safety razor"},
      {"Walter Hunt", "the safety pin"}, {"James Naismith", "basketball"},
      {"Earl Dickson", "the adhesive bandage"}, {"Frank Whittle", "the turbojet engine"},
      {"John Harrison", "the marine chronometer"}, {"Samuel Colt", "the revolver"},
      {"Richard Gatling", "the Gatling gun"}, {"Cyrus McCormick", "the mechanical reaper"},
      {"John Deere", "the steel plow"}, {"Wallace Carothers", "nylon"}, {"Leo Baekeland", "Bakelite"},
      {"Thomas Newcomen", "the atmospheric steam engine"}, {"James Hargreaves", "the spinning jenny"},
      {"Richard Arkwright", "the water frame"}, {"Samuel Crompton", "the spinning mule"},
      {"Edmund Cartwright", "the power loom"}, {"John Kay", "the flying shuttle"},
  };
  add_relation(t, {"inventor", "invention"}, 1, facts, 3);
  return t;
}

}  // namespace

const std::vector<TemplateTable>& builtin_tables() {
  static const std::vector<TemplateTable> tables = [] {
    std::vector<TemplateTable> v{animals(), cities(), companies(), elements(), facts(), inventions()};
    for (const auto& t : v) validate(t);
    return v;
  }();
  return tables;
}

const TemplateTable& builtin_table(const std::string& dataset) {
  for (const auto& t : builtin_tables())
    if (t.dataset == dataset) return t;
  fail(ErrorKind::Key, "no built-in template table named '" + dataset + "'");
}

}  // namespace vlab
