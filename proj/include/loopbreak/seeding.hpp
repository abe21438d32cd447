#pragma once

#include <cstdint>

namespace loopbreak {

/// One splitmix64 output step.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for trial `trial` under stream `stream`. Stream 0 is the model
/// stream shared by every decoder configuration, so runs pair up by trial.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t trial,
                                    std::uint64_t stream = 0) noexcept {
  return splitmix64(splitmix64(splitmix64(base) ^ trial) ^ stream);
}

}  // namespace loopbreak
