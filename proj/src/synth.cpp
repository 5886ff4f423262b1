#include "infill/synth.hpp"

#include <algorithm>
#include <functional>

#include "infill/error.hpp"
#include "infill/masking.hpp"
#include "infill/vocab.hpp"

namespace infill {
namespace {

using Words = std::vector<std::string>;

const Words kTeams{"Toronto_Raptors", "Detroit_Pistons", "Boston_Celtics", "Miami_Heat",
                   "Utah_Jazz",       "Chicago_Bulls",   "Denver_Nuggets", "Phoenix_Suns"};
const Words kPlayers{"Kyle_Lowry",  "Andre_Drummond", "Jimmy_Butler", "Rudy_Gobert",
                     "Zach_LaVine", "Nikola_Jokic",   "Devin_Booker", "Jayson_Tatum"};
const Words kDays{"Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"};
const Words kWinVerbs{"defeated", "beat", "edged", "topped"};
const Words kStatVerbs{"scored", "added", "had"};
const Words kVenues{"at home", "on the road"};
const Words kGameTails{"in overtime", "behind a late run", "again"};
const Words kPlayerTails{"in a win", "in a loss", "off the bench"};

const Words kFoods{"burger", "pizza", "salad", "sandwich", "burrito", "omelette"};
const Words kToppings{"cheese", "bacon", "onions", "mushrooms", "peppers", "avocado"};
const Words kSizes{"small", "medium", "large"};
const Words kDrinks{"coffee", "tea", "lemonade", "soda"};
const Words kTimes{"tonight", "today", "now"};

constexpr int kScoreLo = 95, kScoreHi = 124;
constexpr int kPointsLo = 10, kPointsHi = 35;
constexpr int kReboundsLo = 2, kReboundsHi = 15;
constexpr int kMinutesLo = 20, kMinutesHi = 40;

struct Gen {
  Rng rng;
  Words out;

  const std::string& pick(const Words& w) { return w[uniform_below(rng, w.size())]; }
  int range(int lo, int hi) { return lo + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo + 1))); }
  bool coin() { return uniform_below(rng, 2) == 1; }
  void say(std::string_view phrase) {
    for (auto& t : tokenize(std::string(phrase))) out.push_back(std::move(t));
  }
  void num(int v) { out.push_back(std::to_string(v)); }
};

void nba_game(Gen& g) {
  const std::string& home = g.pick(kTeams);
  std::string away;
  do {
    away = g.pick(kTeams);
  } while (away == home);
  int a = g.range(kScoreLo, kScoreHi), b;
  do {
    b = g.range(kScoreLo, kScoreHi);
  } while (b == a);
  g.say("The");
  g.say(home);
  g.say(g.pick(kWinVerbs));
  g.say("the");
  g.say(away);
  g.num(std::max(a, b));
  g.say("-");
  g.num(std::min(a, b));
  g.say("on");
  g.say(g.pick(kDays));
  if (g.coin()) g.say(g.pick(kVenues));
  if (g.coin()) g.say(g.pick(kGameTails));
  g.say(".");
}

void nba_player(Gen& g) {
  g.say(g.pick(kPlayers));
  g.say(g.pick(kStatVerbs));
  g.num(g.range(kPointsLo, kPointsHi));
  g.say("points and");
  g.num(g.range(kReboundsLo, kReboundsHi));
  g.say("rebounds");
  if (g.coin()) {
    g.say("in");
    g.num(g.range(kMinutesLo, kMinutesHi));
    g.say("minutes");
  } else if (g.coin()) {
    g.say(g.pick(kPlayerTails));
  }
  g.say("for the");
  g.say(g.pick(kTeams));
  if (g.coin()) {
    g.say("on");
    g.say(g.pick(kDays));
  }
  g.say(".");
}

void order_sentence(Gen& g) {
  g.say(g.coin() ? "can i have a" : "i would like a");
  g.say(g.pick(kSizes));
  g.say(g.pick(kFoods));
  g.say("with");
  g.say(g.pick(kToppings));
  if (g.coin()) {
    g.say("and");
    g.say(g.pick(kToppings));
  }
  if (g.coin()) {
    g.say("and a");
    g.say(g.pick(kDrinks));
  }
  g.say(", please ,");
  g.say(g.pick(kTimes));
  g.say(".");
}

using Production = std::function<void(Gen&)>;

std::vector<Production> productions(std::string_view preset) {
  if (preset == "nba") return {nba_game, nba_player};
  if (preset == "order") return {order_sentence};
  throw ConfigError("unknown synthetic preset '" + std::string(preset) + "' (expected nba or order)");
}

void add_all(std::set<std::string>& lex, const Words& phrases) {
  for (const auto& p : phrases) {
    for (auto& t : tokenize(p)) lex.insert(std::move(t));
  }
}

void add_numbers(std::set<std::string>& lex, int lo, int hi) {
  for (int v = lo; v <= hi; ++v) lex.insert(std::to_string(v));
}

}  // namespace

std::vector<std::string_view> synth_presets() { return {"nba", "order"}; }

std::vector<std::string> gen_synth(std::string_view preset, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("gen-synth needs n >= 1");
  const auto prods = productions(preset);
  Gen g{Rng(seed), {}};
  std::vector<std::string> lines;
  lines.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.out.clear();
    prods[uniform_below(g.rng, prods.size())](g);
    lines.push_back(join_tokens(g.out));
  }
  return lines;
}

std::set<std::string> synth_lexicon(std::string_view preset) {
  productions(preset);
  std::set<std::string> lex;
  if (preset == "nba") {
    add_all(lex, kTeams);
    add_all(lex, kPlayers);
    add_all(lex, kDays);
    add_all(lex, kWinVerbs);
    add_all(lex, kStatVerbs);
    add_all(lex, kVenues);
    add_all(lex, kGameTails);
    add_all(lex, kPlayerTails);
    add_all(lex, {"The the - on . points and rebounds in minutes for"});
    add_numbers(lex, kScoreLo, kScoreHi);
    add_numbers(lex, kPointsLo, kPointsHi);
    add_numbers(lex, kReboundsLo, kReboundsHi);
    add_numbers(lex, kMinutesLo, kMinutesHi);
  } else {
    add_all(lex, kFoods);
    add_all(lex, kToppings);
    add_all(lex, kSizes);
    add_all(lex, kDrinks);
    add_all(lex, kTimes);
    add_all(lex, {"can i have a would like with and , please ."});
  }
  return lex;
}

}  // namespace infill
