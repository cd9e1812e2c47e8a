#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace rbsde {

/// Philox4x32-10 block cipher (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
/// Pure function of (counter, key); no internal state.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block counter, Key key) {
    for (int round = 0; round < 10; ++round) {
      counter = single_round(counter, key);
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    return counter;
  }

 private:
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static Block single_round(const Block& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Random stream addressed by (seed, stream id). Draw j is a pure function of (seed, stream, j),
/// so streams can be consumed in any order or in parallel and still reproduce bit-for-bit.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

  std::uint64_t stream_id() const { return stream_; }

  /// Two uniforms in the open interval (0, 1), 53-bit resolution, from block `index`.
  std::array<double, 2> uniform_pair(std::uint64_t index) const {
    const auto block = Philox4x32::generate(
        {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
         static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
        key_);
    const std::uint64_t a = (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(block[2]) << 32) | block[3];
    return {to_open_unit(a), to_open_unit(b)};
  }

  double uniform(std::uint64_t index) const { return uniform_pair(index / 2)[index % 2]; }

  /// Standard normal number `index` of this stream (Box-Muller on block index/2).
  double normal(std::uint64_t index) const {
    const auto u = uniform_pair(index / 2);
    const double radius = std::sqrt(-2.0 * std::log(u[0]));
    const double angle = 2.0 * M_PI * u[1];
    return (index % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
  }

 private:
  static double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
};

/// One independent stream per path, keyed by (seed, path index).
inline std::vector<RandomStream> spawn_streams(std::uint64_t seed, std::size_t n_paths) {
  std::vector<RandomStream> streams;
  streams.reserve(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) streams.emplace_back(seed, p);
  return streams;
}

}  // namespace rbsde
