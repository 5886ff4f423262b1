#pragma once

// Layered run configuration: built-in defaults, then a `key = value` file,
// then command-line overrides. Keys are dotted (`train.batch_size`).

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "infill/evaluation.hpp"
#include "infill/masking.hpp"
#include "infill/model.hpp"
#include "infill/training.hpp"

namespace infill {

enum class Precision { f32, f64 };

class RunConfig {
 public:
  RunConfig();

  /// Throws ConfigError for keys without a default.
  void set(const std::string& key, const std::string& value);
  /// `key=value` form, as given to --set.
  void set_assignment(const std::string& assignment);
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<config>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& str(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;

  /// Every key, sorted, as `key = value` lines.
  std::string to_text() const;
  void write(const std::filesystem::path& path) const;

  /// Parses every typed value so bad settings fail before any work starts.
  void validate() const;

  std::uint64_t seed() const { return u64("run.seed"); }
  Precision precision() const;
  ModelSpec model_spec(std::size_t vocab_size) const;
  MaskSpec mask_spec() const;
  TrainOptions train_options(const ModelSpec& spec) const;
  DecodeOptions decode_options() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace infill
