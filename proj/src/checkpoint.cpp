#include "infill/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "infill/error.hpp"

namespace infill {
namespace {

constexpr std::string_view kMagic = "TIFC0001";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  const auto v = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : b_(bytes) {}

  bool at_end() const { return pos_ == b_.size(); }

  std::string_view take(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) {
      throw DataError("checkpoint truncated while reading " + std::string(what) + " at byte " + std::to_string(pos_));
    }
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint64_t u64(const char* what) {
    const auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }

  float f32() {
    const auto s = take(4, "tensor data");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return std::bit_cast<float>(v);
  }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

const std::string& manifest_field(const ConfigMap& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw DataError("checkpoint manifest lacks '" + key + "'");
  return it->second;
}

}  // namespace

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t Checkpoint::vocab_hash() const {
  const auto& s = manifest_field(manifest, "vocab.hash");
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 16);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw DataError("checkpoint manifest field 'vocab.hash' is not hexadecimal: '" + s + "'");
  }
}

std::size_t Checkpoint::step() const {
  const auto& s = manifest_field(manifest, "train.step");
  try {
    return static_cast<std::size_t>(std::stoull(s));
  } catch (const std::logic_error&) {
    throw DataError("checkpoint manifest field 'train.step' is not an integer: '" + s + "'");
  }
}

ModelSpec Checkpoint::model_spec() const {
  ConfigMap m;
  for (const auto& [k, v] : manifest) {
    if (k.rfind("model.", 0) == 0 || k.rfind("position.", 0) == 0) m.emplace(k, v);
  }
  try {
    return ModelSpec::from_map(m);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  }
}

ConfigMap make_manifest(const ModelSpec& spec, std::uint64_t vocab_hash, std::size_t step) {
  ConfigMap m = spec.to_map();
  m["vocab.hash"] = hash_hex(vocab_hash);
  m["train.step"] = std::to_string(step);
  return m;
}

template <class T>
std::string serialize_checkpoint(const ConfigMap& manifest, const ParamStore<T>& params) {
  std::string text;
  for (const auto& [k, v] : manifest) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractError("manifest entry '" + k + "' cannot be serialized");
    }
    text += k + "=" + v + "\n";
  }
  std::string out(kMagic);
  put_u64(out, text.size());
  out += text;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    const auto& t = params.tensor(i);
    put_u64(out, name.size());
    out += name;
    put_u64(out, t.rank());
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (std::size_t k = 0; k < t.size(); ++k) put_f32(out, static_cast<float>(t[k]));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kMagic.size(), "magic") != kMagic) throw DataError("not a checkpoint file (bad magic)");
  const auto len = r.u64("manifest length");
  std::istringstream text{std::string(r.take(len, "manifest"))};
  Checkpoint ck;
  std::string line;
  while (std::getline(text, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed manifest line '" + line + "'");
    ck.manifest[line.substr(0, eq)] = line.substr(eq + 1);
  }
  while (!r.at_end()) {
    std::string name(r.take(r.u64("name length"), "parameter name"));
    const auto rank = r.u64("rank");
    if (rank > 8) throw DataError("parameter '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(r.u64("dimensions"));
    std::vector<float> data(shape_size(shape));
    for (auto& x : data) x = r.f32();
    ck.tensors.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
  }
  return ck;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ConfigMap& manifest, const ParamStore<T>& params) {
  const auto bytes = serialize_checkpoint(manifest, params);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

template <class T>
void load_params(ParamStore<T>& params, const Checkpoint& ckpt) {
  if (ckpt.tensors.size() != params.size()) {
    throw DataError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " parameters, model expects " +
                    std::to_string(params.size()));
  }
  std::vector<std::size_t> slot(params.size());
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    const auto& [name, t] = ckpt.tensors[i];
    const auto idx = params.find(name);
    if (!idx) throw DataError("checkpoint parameter '" + name + "' is unknown to the model");
    if (params.tensor(*idx).shape() != t.shape()) {
      throw DataError("parameter '" + name + "': checkpoint shape " + shape_string(t.shape()) + ", model shape " +
                      shape_string(params.tensor(*idx).shape()));
    }
    slot[i] = *idx;
  }
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) params.tensor(slot[i]) = ckpt.tensors[i].second.template cast<T>();
}

template <class T>
std::unique_ptr<InfillModel<T>> restore_model(const Checkpoint& ckpt, std::uint64_t vocab_hash,
                                              std::optional<ModelKind> expected_kind) {
  const ModelSpec spec = ckpt.model_spec();
  if (expected_kind && spec.kind != *expected_kind) {
    throw DataError("model.kind: checkpoint is '" + std::string(model_kind_name(spec.kind)) + "', expected '" +
                    std::string(model_kind_name(*expected_kind)) + "'");
  }
  if (ckpt.vocab_hash() != vocab_hash) {
    throw DataError("vocab.hash: checkpoint has " + hash_hex(ckpt.vocab_hash()) + ", vocabulary has " +
                    hash_hex(vocab_hash));
  }
  auto model = make_model<T>(spec, 0);
  load_params(model->params(), ckpt);
  return model;
}

#define INFILL_CKPT_INSTANTIATE(T)                                                                         \
  template std::string serialize_checkpoint(const ConfigMap&, const ParamStore<T>&);                       \
  template void save_checkpoint(const std::filesystem::path&, const ConfigMap&, const ParamStore<T>&);     \
  template void load_params(ParamStore<T>&, const Checkpoint&);                                            \
  template std::unique_ptr<InfillModel<T>> restore_model(const Checkpoint&, std::uint64_t, std::optional<ModelKind>);

INFILL_CKPT_INSTANTIATE(float)
INFILL_CKPT_INSTANTIATE(double)

}  // namespace infill
