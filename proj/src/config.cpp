#include "infill/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "infill/error.hpp"
#include "infill/parallel.hpp"

namespace infill {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  const ModelSpec spec;
  for (const auto& [k, v] : spec.to_map()) {
    if (k != "model.vocab_size") values_[k] = v;
  }
  values_.insert({
      {"run.seed", "0"},
      {"run.out", "."},
      {"run.checkpoint", ""},
      {"run.resume", ""},
      {"run.logprobs", "false"},
      {"synth.preset", "nba"},
      {"synth.n", "1000"},
      {"data.corpus", ""},
      {"data.vocab", ""},
      {"data.train", ""},
      {"data.valid", ""},
      {"data.test", ""},
      {"data.templates", ""},
      {"data.min_len", "10"},
      {"data.max_len", "18"},
      {"data.lowercase", "false"},
      {"data.vocab_max_size", "0"},
      {"data.min_freq", "1"},
      {"data.valid_fraction", "0.1"},
      {"data.test_fraction", "0.1"},
      {"mask.strategy", "random"},
      {"mask.rate", "0.3"},
      {"mask.blanks", "1"},
      {"mask.anchor_numbers", "true"},
      {"mask.anchor_entity", "true"},
      {"mask.annotations", ""},
      {"mask.words", ""},
      {"train.epochs", "150"},
      {"train.batch_size", "200"},
      {"train.max_steps", "0"},
      {"train.val_every", "0"},
      {"train.lr_constant", "0.3"},
      {"train.warmup_steps", "10000"},
      {"train.beta1", "0.9"},
      {"train.beta2", "0.997"},
      {"train.eps", "1e-9"},
      {"train.precision", "f32"},
      {"decode.mode", "greedy"},
      {"decode.temperature", "1.0"},
      {"decode.max_blank_len", "20"},
  });
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

std::uint64_t RunConfig::u64(const std::string& key) const {
  const auto& s = str(key);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError(key + " must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::size_t RunConfig::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

double RunConfig::real(const std::string& key) const {
  const auto& s = str(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(key + " must be a number, got '" + s + "'");
  }
}

bool RunConfig::flag(const std::string& key) const {
  const auto& s = str(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + " must be true or false, got '" + s + "'");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_text();
}

Precision RunConfig::precision() const {
  const auto& s = str("train.precision");
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("train.precision must be f32 or f64, got '" + s + "'");
}

ModelSpec RunConfig::model_spec(std::size_t vocab_size) const {
  ConfigMap m;
  for (const auto& [k, v] : values_) {
    if (k.rfind("model.", 0) == 0 || k.rfind("position.", 0) == 0) m.emplace(k, v);
  }
  m["model.vocab_size"] = std::to_string(vocab_size);
  return ModelSpec::from_map(m);
}

MaskSpec RunConfig::mask_spec() const {
  MaskSpec s;
  s.strategy = parse_mask_strategy(str("mask.strategy"));
  s.mask_rate = real("mask.rate");
  s.num_blanks = count("mask.blanks");
  s.anchors.numbers = flag("mask.anchor_numbers");
  s.anchors.entity = flag("mask.anchor_entity");
  if (const auto words = split_words(str("mask.words")); !words.empty()) s.word_list = {words.begin(), words.end()};
  s.seed = seed();
  s.validate();
  return s;
}

TrainOptions RunConfig::train_options(const ModelSpec& spec) const {
  TrainOptions o;
  o.epochs = count("train.epochs");
  o.batch_size = count("train.batch_size");
  o.max_steps = count("train.max_steps");
  o.val_every = count("train.val_every");
  o.schedule.constant = real("train.lr_constant");
  o.schedule.warmup_steps = count("train.warmup_steps");
  o.schedule.d_model = spec.kind == ModelKind::self_attn ? spec.d_model : spec.num_units;
  o.adam.beta1 = real("train.beta1");
  o.adam.beta2 = real("train.beta2");
  o.adam.eps = real("train.eps");
  o.seed = seed();
  o.threads = worker_threads();
  o.schedule.validate();
  if (o.batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  return o;
}

DecodeOptions RunConfig::decode_options() const {
  DecodeOptions d;
  d.mode = parse_decode_mode(str("decode.mode"));
  d.temperature = real("decode.temperature");
  d.max_blank_len = count("decode.max_blank_len");
  d.seed = seed();
  d.validate();
  return d;
}

void RunConfig::validate() const {
  seed();
  precision();
  flag("run.logprobs");
  if (count("synth.n") < 1) throw ConfigError("synth.n must be at least 1");
  count("data.min_len");
  count("data.max_len");
  if (count("data.min_len") > count("data.max_len")) throw ConfigError("data.min_len exceeds data.max_len");
  flag("data.lowercase");
  count("data.vocab_max_size");
  count("data.min_freq");
  for (const char* k : {"data.valid_fraction", "data.test_fraction"}) {
    const double f = real(k);
    if (f < 0.0 || f >= 1.0) throw ConfigError(std::string(k) + " must lie in [0, 1)");
  }
  if (real("data.valid_fraction") + real("data.test_fraction") >= 1.0) {
    throw ConfigError("data.valid_fraction + data.test_fraction must stay below 1");
  }
  mask_spec();
  const ModelSpec spec = model_spec(special::count + 1);
  train_options(spec);
  decode_options();
}

}  // namespace infill
