#pragma once

#include <array>
#include <cstdint>

namespace kmfg {

// Philox4x32-10 (Salmon et al., SC'11). Counter-based: the output depends only
// on (counter, key), so any (path, step) substream can be regenerated in
// isolation and in any order.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter ctr, Key key);
};

std::uint64_t splitmix64(std::uint64_t x);

// Mixes a user seed with a domain tag so that unrelated uses of the same seed
// (SDE noise, particle coins, bridge uniforms, ...) never share a stream.
std::uint64_t derive_key(std::uint64_t seed, std::uint64_t domain);

// Stream of variates keyed by (key, stream id, step). Counter layout:
// word 0 = block index within the step, word 1 = step, words 2-3 = stream id.
class Stream {
 public:
  Stream(std::uint64_t key, std::uint64_t stream_id, std::uint32_t step);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // 53-bit uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  // Standard normal by Box-Muller; the second variate of each pair is cached.
  double normal();

 private:
  void refill();

  Philox4x32::Key key_;
  Philox4x32::Counter ctr_;
  Philox4x32::Counter buf_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Domain tags used by the library.
enum class Domain : std::uint64_t {
  kSdeNoise = 1,
  kConditioningNoise = 2,
  kBridge = 3,
  kIdiosyncratic = 4,
  kCommon = 5,
  kInitial = 6,
  kRotation = 7,
};

inline std::uint64_t derive_key(std::uint64_t seed, Domain d) {
  return derive_key(seed, static_cast<std::uint64_t>(d));
}

}  // namespace kmfg
