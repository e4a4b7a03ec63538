// Deterministic, serializable random number generator (xoshiro256++).
//
// std::mt19937 plus the standard distributions would be deterministic only
// per standard-library implementation; this generator and the explicit
// bit-to-real transforms below make every random draw in the project
// reproducible from four u64 words of state.
#pragma once

#include "reverie/core/common.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace reverie {

namespace detail {
inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace detail

class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed) {
    uint64_t s = seed;
    for (auto& w : state_) w = detail::splitmix64(s);
  }

  // Derives an independent stream, e.g. rng.fork(2) for the mask stream.
  Rng fork(uint64_t stream) const {
    uint64_t s = state_[0] ^ detail::rotl(state_[2], 17) ^ (stream * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL);
    return Rng(detail::splitmix64(s));
  }

  uint64_t next_u64() {
    const uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire's multiply-shift reduction.
  uint64_t uniform_int(uint64_t n) {
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    uint64_t lo = static_cast<uint64_t>(m);
    if (lo < n) {
      uint64_t threshold = (0ULL - n) % n;
      while (lo < threshold) {
        m = static_cast<__uint128_t>(next_u64()) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller. Stateless (no cached spare), so the
  // stream position is always a pure function of the number of calls.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <class T>
  void fill_normal(Mat<T>& m, double scale = 1.0) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(normal() * scale);
  }

  template <class T>
  void fill_uniform(Mat<T>& m, double lo, double hi) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(uniform(lo, hi));
  }

  // Partial Fisher-Yates: k distinct indices drawn uniformly from [0, n).
  std::vector<Index> sample_without_replacement(Index n, Index k) {
    std::vector<Index> pool(n);
    for (Index i = 0; i < n; ++i) pool[i] = i;
    std::vector<Index> out(k);
    for (Index i = 0; i < k; ++i) {
      Index j = i + static_cast<Index>(uniform_int(static_cast<uint64_t>(n - i)));
      std::swap(pool[i], pool[j]);
      out[i] = pool[i];
    }
    return out;
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  std::array<uint64_t, 4> state_{};
};

}  // namespace reverie
