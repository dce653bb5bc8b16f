#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace cyclematch {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A stream is identified by (seed, stream_id). The 64-bit seed is the key;
/// the 128-bit counter is (index_lo, index_hi, stream_lo, stream_hi), so any
/// block of any stream can be computed directly without replaying the
/// sequence. Reimplementations in other languages reproduce the same draws by
/// following the conversions documented on each member.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;  // (hi << 32) | lo, hi drawn first

  /// Uniform in [0, 1): top 53 bits of next_u64() times 2^-53.
  double uniform() noexcept;
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller, cosine branch only (two uniforms per draw).
  double normal() noexcept;
  /// Uniform integer in [0, n): floor(uniform() * n).
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Fisher-Yates shuffle of [0, n) drawing below(i + 1) for i = n-1 .. 1.
  std::vector<int> permutation(int n) noexcept;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int used_ = 4;
};

/// Derives an independent 64-bit seed from (seed, stream, index); used to give
/// every training step and every held-out graph its own generator seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept;

}  // namespace cyclematch
