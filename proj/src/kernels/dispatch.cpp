#include <atomic>
#include <cstdlib>
#include <string>

#include "infill/error.hpp"
#include "infill/kernels.hpp"

namespace infill::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  const char* env = std::getenv("INFILL_SIMD");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return Isa::scalar;
  if (want == "avx2" && !isa_supported(Isa::avx2)) {
    throw ConfigError("INFILL_SIMD=avx2 requested but AVX2/FMA is unavailable");
  }
  if (want != "auto" && want != "avx2") {
    throw ConfigError("INFILL_SIMD must be scalar, avx2 or auto, got '" + want + "'");
  }
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<int>& current() {
  static std::atomic<int> isa{static_cast<int>(detect())};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool isa_supported(Isa isa) {
  if (isa == Isa::scalar) return true;
  static const bool avx2 = cpu_has_avx2() && avx2_table<float>() != nullptr;
  return avx2;
}

Isa active_isa() {
  return static_cast<Isa>(current().load(std::memory_order_relaxed));
}

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw ConfigError("kernel variant " + std::string(isa_name(isa)) + " is not available here");
  }
  current().store(static_cast<int>(isa), std::memory_order_relaxed);
}

template <class T>
const Table<T>& table(Isa isa) {
  if (isa == Isa::avx2 && isa_supported(Isa::avx2)) return *avx2_table<T>();
  return scalar_table<T>();
}

template const Table<float>& table<float>(Isa);
template const Table<double>& table<double>(Isa);

}  // namespace infill::kernels
