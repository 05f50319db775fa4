#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace cbo {

// Philox4x32-10 counter-based generator. A draw is a
// pure function of (key, counter), so any stream position can be addressed
// directly without advancing shared state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit constexpr Philox4x32(Key key) : key_(key) {}

  constexpr Counter operator()(Counter ctr) const {
    Key k = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, k);
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  Key key_;
};

/// Independent sub-streams derived from one user seed. Schemes that must
/// share randomness (CBO runs differing only in lambda) use the same tag;
/// schemes that must not share it use different tags.
enum class StreamTag : std::uint32_t {
  kInitialEnsemble = 1,
  kStartPoint = 2,
  kCboNoise = 3,
  kHoppingSamples = 4,
  kLangevin = 5,
  kLaplaceSamples = 6,
  kAssumptionChecks = 7,
  kBootstrap = 8,
  kTesting = 9,
};

/// Counter-addressed Gaussian/uniform source keyed by (seed, tag). Every
/// value is a deterministic function of (seed, tag, step, index, salt,
/// component), independent of call order and thread count.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, StreamTag tag);

  /// Fills `out` with i.i.d. standard normals addressed by (step, index, salt).
  void standard_normal(std::uint64_t step, std::uint64_t index, std::span<double> out,
                       std::uint32_t salt = 0) const;

  /// Fills `out` with i.i.d. uniforms on the open interval (0, 1).
  void uniform(std::uint64_t step, std::uint64_t index, std::span<double> out,
               std::uint32_t salt = 0) const;

  std::uint64_t seed() const { return seed_; }
  StreamTag tag() const { return tag_; }

 private:
  Philox4x32::Counter block(std::uint64_t step, std::uint64_t index, std::uint32_t salt,
                            std::uint32_t block_index) const;

  std::uint64_t seed_;
  StreamTag tag_;
  Philox4x32 engine_;
};

/// SplitMix64 finalizer; used for key derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace cbo
