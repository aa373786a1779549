#ifndef ADFS_RNG_HPP
#define ADFS_RNG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "error.hpp"

namespace adfs {

/// PCG64 (XSL-RR 128/64) generator.
///
/// Stream semantics follow the reference `pcg64` engine: a 128-bit LCG state
/// advanced by the default multiplier with an odd per-stream increment. The
/// 64-bit user seed is expanded to (initstate, initseq) with splitmix64, and
/// seeding uses the reference `srandom_r` procedure. Output is bit-identical
/// on every platform with `unsigned __int128`.
class Pcg64 {
 public:
  using result_type = std::uint64_t;
  using u128 = unsigned __int128;

  explicit Pcg64(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t sm = seed;
    const u128 initstate = (u128(splitmix(sm)) << 64) | splitmix(sm);
    std::uint64_t sm2 = stream ^ 0xda3e39cb94b95bdbULL;
    const u128 initseq = (u128(splitmix(sm2)) << 64) | splitmix(sm2);
    state_ = 0;
    inc_ = (initseq << 1) | 1u;
    step();
    state_ += initstate;
    step();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    step();
    const auto hi = static_cast<std::uint64_t>(state_ >> 64);
    const auto lo = static_cast<std::uint64_t>(state_);
    const unsigned rot = static_cast<unsigned>(state_ >> 122);
    const std::uint64_t x = hi ^ lo;
    return (x >> rot) | (x << ((64u - rot) & 63u));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (second variate cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, bound) by rejection (unbiased).
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = (*this)();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  static constexpr u128 kMultiplier =
      (u128(0x2360ED051FC65DA4ULL) << 64) | 0x4385DF649FCCF645ULL;

  static std::uint64_t splitmix(std::uint64_t &x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  void step() { state_ = state_ * kMultiplier + inc_; }

  u128 state_{};
  u128 inc_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Inverse-CDF sampler over a fixed finite distribution.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;

  explicit DiscreteSampler(std::span<const double> weights) {
    detail::require(!weights.empty(), "sampler needs at least one outcome");
    cdf_.reserve(weights.size());
    double acc = 0.0;
    for (double w : weights) {
      detail::require(std::isfinite(w) && w >= 0.0,
                      "sampling weights must be finite and nonnegative");
      acc += w;
      cdf_.push_back(acc);
    }
    detail::require(acc > 0.0, "sampling weights sum to zero");
    for (double &c : cdf_) c /= acc;
    cdf_.back() = 1.0;
  }

  std::size_t size() const { return cdf_.size(); }

  std::size_t operator()(Pcg64 &rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = static_cast<std::size_t>(it - cdf_.begin());
    return std::min(idx, cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace adfs

#endif
