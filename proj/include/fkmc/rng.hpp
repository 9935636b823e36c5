#pragma once

// Counter-based random number generation (Philox4x32-10).
//
// Every normal increment consumed by a path is addressed by (seed, path index,
// step index, block index) and nothing else.  Two consequences we rely on:
//   * a path's noise stream is identical no matter which worker simulates it,
//     so ensemble results are bit-for-bit independent of the worker count;
//   * refinement runs (different dt, hence different step count) draw fresh,
//     decorrelated increments without any stream bookkeeping.

#include <array>
#include <cmath>
#include <cstdint>

namespace fkmc {

// One Philox4x32 round + the standard 10-round network.  Constants are the
// reference ones (Salmon et al.): multipliers 0xD2511F53 / 0xCD9E8D57 and
// Weyl key increments 0x9E3779B9 / 0xBB67AE85.
namespace detail {

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         const std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
  const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

inline std::array<std::uint32_t, 4> philox4x32_10(
    std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    detail::philox_round(ctr, key);
    key[0] += 0x9E3779B9u;
    key[1] += 0xBB67AE85u;
  }
  return ctr;
}

// Maps a 4x32 block to two doubles strictly inside (0, 1).  52 mantissa bits
// plus a half-ulp offset: 2⁵²−1+0.5 is still exactly representable, so the
// largest output is 1 − 2⁻⁵³ < 1 (with 53 bits the all-ones block would
// round to exactly 1.0 and Box–Muller would see log 1 = 0 / cos 2π).
inline std::array<double, 2> block_to_uniforms(
    const std::array<std::uint32_t, 4>& blk) {
  const std::uint64_t a =
      (std::uint64_t{blk[1]} << 32) | std::uint64_t{blk[0]};
  const std::uint64_t b =
      (std::uint64_t{blk[3]} << 32) | std::uint64_t{blk[2]};
  constexpr double scale = 0x1.0p-52;
  return {(static_cast<double>(a >> 12) + 0.5) * scale,
          (static_cast<double>(b >> 12) + 0.5) * scale};
}

// Standard-normal draws for one (path, step) cell.  Blocks within a cell are
// indexed by the low counter word; Box–Muller turns each block's two uniforms
// into two normals.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path_index)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        path_lo_(static_cast<std::uint32_t>(path_index)),
        path_hi_(static_cast<std::uint32_t>(path_index >> 32)) {}

  // Fills out[0..n) with independent N(0,1) samples for the given step.
  void normals(std::uint32_t step_index, double* out, int n) const {
    int produced = 0;
    std::uint32_t block = 0;
    while (produced < n) {
      const auto blk =
          philox4x32_10({block, step_index, path_lo_, path_hi_}, key_);
      const auto u = block_to_uniforms(blk);
      const double r = std::sqrt(-2.0 * std::log(u[0]));
      const double phi = 2.0 * M_PI * u[1];
      out[produced++] = r * std::cos(phi);
      if (produced < n) out[produced++] = r * std::sin(phi);
      ++block;
    }
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t path_lo_, path_hi_;
};

}  // namespace fkmc
