#pragma once

// Small probabilistic grammars that stand in for real corpora in demos and
// tests. Output is one tokenized sentence per line.

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace infill {

/// Available presets: "nba" (game reports) and "order" (restaurant orders).
std::vector<std::string_view> synth_presets();

/// `n` sentences of 10 to 18 tokens, deterministic in `seed`.
std::vector<std::string> gen_synth(std::string_view preset, std::size_t n, std::uint64_t seed);

/// Every token the preset's grammar can emit.
std::set<std::string> synth_lexicon(std::string_view preset);

}  // namespace infill
