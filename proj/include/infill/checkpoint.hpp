#pragma once

// Binary checkpoint: magic "TIFC0001", u64 manifest length, manifest text
// (`key=value` lines), then per parameter: u64 name length, name bytes,
// u64 rank, u64 dims, little-endian f32 values. Integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "infill/model.hpp"

namespace infill {

struct Checkpoint {
  ConfigMap manifest;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  std::uint64_t vocab_hash() const;
  std::size_t step() const;
  ModelSpec model_spec() const;
};

/// Manifest for `spec` plus `vocab.hash` (16 hex digits) and `train.step`.
ConfigMap make_manifest(const ModelSpec& spec, std::uint64_t vocab_hash, std::size_t step);

template <class T>
std::string serialize_checkpoint(const ConfigMap& manifest, const ParamStore<T>& params);
Checkpoint parse_checkpoint(std::string_view bytes);

/// Writes through a temporary file and renames it into place.
template <class T>
void save_checkpoint(const std::filesystem::path& path, const ConfigMap& manifest, const ParamStore<T>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint tensors into `params` after checking every name and
/// shape; on error `params` is left unchanged.
template <class T>
void load_params(ParamStore<T>& params, const Checkpoint& ckpt);

/// Rebuilds the model a checkpoint describes. Throws DataError when
/// `expected_kind` or `vocab_hash` disagree with the manifest.
template <class T>
std::unique_ptr<InfillModel<T>> restore_model(const Checkpoint& ckpt, std::uint64_t vocab_hash,
                                              std::optional<ModelKind> expected_kind = std::nullopt);

std::string hash_hex(std::uint64_t h);

}  // namespace infill
