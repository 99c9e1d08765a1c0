#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace cdpnes {

// Every random draw in a run comes from a stream keyed by
// (master seed, agent, iteration, purpose). Streams are independent of the
// order agents are processed in, so a run is reproducible bit-for-bit no
// matter how the per-agent work is scheduled.
enum class StreamPurpose : std::uint64_t {
  kNoise = 1,
  kCompress = 2,
  kInit = 3,
  kEstimate = 4,
  kGraph = 5,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic generator with explicit floating-point conversions.
// std::* distributions are implementation-defined, which would break
// byte-identical traces across toolchains, so the few conversions we
// need are spelled out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // (0, 1), never returns an endpoint
  double uniform_open() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via Box-Muller; pairs are cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  // Laplace(0, theta) by inverse CDF: theta * sign(u) * ln(1 - 2|u|),
  // u uniform on (-1/2, 1/2). Mean 0, variance 2 theta^2.
  // theta == 0 is the noiseless mode and yields exactly 0.
  double laplace(double theta) {
    if (theta < 0.0) throw std::invalid_argument("laplace: theta must be >= 0");
    if (theta == 0.0) {
      gen_();  // keep stream alignment identical across noise levels
      return 0.0;
    }
    const double u = uniform_open() - 0.5;
    const double sign = u >= 0.0 ? 1.0 : -1.0;
    return theta * sign * std::log(1.0 - 2.0 * std::abs(u));
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Rng derive_stream(std::uint64_t master_seed, std::uint64_t agent,
                         std::uint64_t iteration, StreamPurpose purpose) {
  std::uint64_t s = master_seed;
  std::uint64_t key = detail::splitmix64(s);
  s ^= 0x6a09e667f3bcc909ULL + agent;
  key ^= detail::splitmix64(s);
  s ^= 0xbb67ae8584caa73bULL + iteration;
  key ^= detail::splitmix64(s);
  s ^= 0x3c6ef372fe94f82bULL + static_cast<std::uint64_t>(purpose);
  key ^= detail::splitmix64(s);
  return Rng(key);
}

}  // namespace cdpnes
