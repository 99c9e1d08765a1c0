#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdpnes/rng.hpp"

namespace cdpnes {

// (C, delta, r): relative second-moment bound E||C(x)-x||^2 <= C||x||^2 and
// contractiveness of the r-scaled output, E||C(x)/r - x||^2 <= (1-delta)||x||^2.
struct CompressorContract {
  double C = 0.0;
  double delta = 1.0;
  double r = 1.0;
};

struct CompressedMessage {
  std::vector<std::uint8_t> payload;  // what actually goes on the wire
  Eigen::VectorXd decoded;            // what every receiver reconstructs
  std::int64_t bits = 0;              // information payload in the bit model
};

enum class CompressorKind : std::uint8_t {
  kIdentity = 0,
  kStochasticQuantize = 1,
  kTopK = 2,
  kNormSign = 3,
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back((v >> s) & 0xff);
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  for (int s = 0; s < 64; s += 8) out.push_back((u >> s) & 0xff);
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(p[s]) << (8 * s);
  return v;
}

inline double get_f64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int s = 0; s < 8; ++s) v |= static_cast<std::uint64_t>(p[s]) << (8 * s);
  return std::bit_cast<double>(v);
}

inline int ceil_log2(int m) {
  int bits = 0;
  while ((1 << bits) < m) ++bits;
  return bits;
}

}  // namespace detail

// Reconstructs the dense vector from a serialized message. Receivers only see
// the payload, so compress() routes its own decoded field through here as well.
inline Eigen::VectorXd decode(const std::vector<std::uint8_t>& payload) {
  if (payload.size() < 5) throw std::invalid_argument("decode: short payload");
  const auto kind = static_cast<CompressorKind>(payload[0]);
  const int m = static_cast<int>(detail::get_u32(&payload[1]));
  const std::uint8_t* p = payload.data() + 5;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  switch (kind) {
    case CompressorKind::kIdentity:
      for (int j = 0; j < m; ++j) x(j) = detail::get_f64(p + 8 * j);
      return x;
    case CompressorKind::kStochasticQuantize: {
      const int b = *p++;
      const double s = detail::get_f64(p);
      p += 8;
      if (s == 0.0) return x;
      const double tau = static_cast<double>(1 << (b - 1));
      for (int j = 0; j < m; ++j) {
        const std::uint8_t byte = p[j];
        const double sign = (byte & 0x80) ? -1.0 : 1.0;
        const double level = byte & 0x7f;
        x(j) = sign * s * level / tau;
      }
      return x;
    }
    case CompressorKind::kTopK: {
      const int k = static_cast<int>(detail::get_u32(p));
      p += 4;
      for (int t = 0; t < k; ++t) {
        const int idx = static_cast<int>(detail::get_u32(p));
        p += 4;
        x(idx) = detail::get_f64(p);
        p += 8;
      }
      return x;
    }
    case CompressorKind::kNormSign: {
      const double s = detail::get_f64(p);
      p += 8;
      if (s == 0.0) return x;
      for (int j = 0; j < m; ++j) {
        const bool positive = (p[j / 8] >> (j % 8)) & 1;
        x(j) = (positive ? 1.0 : -1.0) * s / 2.0;
      }
      return x;
    }
  }
  throw std::invalid_argument("decode: unknown kind tag");
}

// Randomized compressors used for the broadcast messages. A Compressor is a
// stateless value; all randomness comes from the caller's stream, so agents
// can compress concurrently as long as each owns its stream.
class Compressor {
 public:
  static Compressor identity() { return Compressor(CompressorKind::kIdentity); }

  // Unbiased infinity-norm stochastic quantizer: scale by s = ||x||_inf, per
  // coordinate transmit a sign and a stochastic rounding of 2^{b-1}|x_j|/s to
  // one of 2^{b-1}+1 levels; decoded value is s*sign*level/2^{b-1}.
  static Compressor stochastic_quantize(int b) {
    if (b < 1 || b > 6)
      throw std::invalid_argument("stochastic_quantize: b must be in [1,6]");
    Compressor c(CompressorKind::kStochasticQuantize);
    c.b_ = b;
    return c;
  }

  // Keeps the k largest-magnitude coordinates, ties broken by lowest index.
  static Compressor top_k(int k) {
    if (k < 1) throw std::invalid_argument("top_k: k must be >= 1");
    Compressor c(CompressorKind::kTopK);
    c.k_ = k;
    return c;
  }

  // decoded = (||x||_inf / 2) * sign(x); one sign bit per coordinate.
  static Compressor norm_sign() { return Compressor(CompressorKind::kNormSign); }

  // "identity", "quantize:b=2", "top_k:k=3", "norm_sign"
  static Compressor parse(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    int b = -1, k = -1;
    if (colon != std::string::npos) {
      std::stringstream ss(spec.substr(colon + 1));
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
          throw std::invalid_argument("compressor spec: expected key=value in '" +
                                      spec + "'");
        const std::string key = item.substr(0, eq);
        const int val = std::stoi(item.substr(eq + 1));
        if (key == "b")
          b = val;
        else if (key == "k")
          k = val;
        else
          throw std::invalid_argument("compressor spec: unknown key '" + key +
                                      "'");
      }
    }
    if (name == "identity") return identity();
    if (name == "quantize") {
      if (b < 0) throw std::invalid_argument("quantize spec: missing b");
      return stochastic_quantize(b);
    }
    if (name == "top_k") {
      if (k < 0) throw std::invalid_argument("top_k spec: missing k");
      return top_k(k);
    }
    if (name == "norm_sign") return norm_sign();
    throw std::invalid_argument("unknown compressor kind '" + name + "'");
  }

  CompressorKind kind() const { return kind_; }
  int quantize_bits() const { return b_; }
  int keep_count() const { return k_; }

  std::string name() const {
    switch (kind_) {
      case CompressorKind::kIdentity:
        return "identity";
      case CompressorKind::kStochasticQuantize:
        return "quantize:b=" + std::to_string(b_);
      case CompressorKind::kTopK:
        return "top_k:k=" + std::to_string(k_);
      case CompressorKind::kNormSign:
        return "norm_sign";
    }
    return "?";
  }

  // Declared (C, delta, r) at a given message dimension.
  CompressorContract contract(int dim) const {
    CompressorContract c;
    switch (kind_) {
      case CompressorKind::kIdentity:
        return c;  // C=0, delta=1, r=1
      case CompressorKind::kStochasticQuantize: {
        // The max-magnitude coordinate lands on an exact level, so at most
        // dim-1 coordinates carry rounding variance <= s^2/(4 tau^2).
        const double tau2 = std::pow(4.0, b_ - 1);
        c.C = dim > 0 ? (dim - 1) / (4.0 * tau2) : 0.0;
        c.r = 1.0 + c.C;  // unbiased, so the scaled form contracts at 1/(1+C)
        c.delta = 1.0 / c.r;
        return c;
      }
      case CompressorKind::kTopK: {
        const int keep = std::min(k_, dim);
        c.delta = dim > 0 ? static_cast<double>(keep) / dim : 1.0;
        c.r = 1.0;
        c.C = 1.0 - c.delta;
        return c;
      }
      case CompressorKind::kNormSign:
        c.C = dim / 4.0;
        c.r = dim / 2.0;
        c.delta = 1.0 / dim;
        return c;
    }
    return c;
  }

  // Information bits of one (nonzero) message of dimension m when a scalar
  // costs l bits: identity ml, quantizer (b+1)m + l, top-k k(l + ceil log2 m),
  // norm-sign m + l. Framing bytes in the payload are not counted.
  std::int64_t message_bits(int m, int l) const {
    switch (kind_) {
      case CompressorKind::kIdentity:
        return static_cast<std::int64_t>(m) * l;
      case CompressorKind::kStochasticQuantize:
        return static_cast<std::int64_t>(b_ + 1) * m + l;
      case CompressorKind::kTopK:
        return m == 0 ? 0
                      : static_cast<std::int64_t>(std::min(k_, m)) *
                            (l + detail::ceil_log2(m));
      case CompressorKind::kNormSign:
        return m + l;
    }
    return 0;
  }

  CompressedMessage compress(const Eigen::VectorXd& x, Rng& rng) const {
    const int m = static_cast<int>(x.size());
    CompressedMessage msg;
    msg.payload.push_back(static_cast<std::uint8_t>(kind_));
    detail::put_u32(msg.payload, static_cast<std::uint32_t>(m));
    const int l_default = 32;  // bits field uses the configured l at call sites
    switch (kind_) {
      case CompressorKind::kIdentity: {
        for (int j = 0; j < m; ++j) detail::put_f64(msg.payload, x(j));
        msg.bits = message_bits(m, l_default);
        break;
      }
      case CompressorKind::kStochasticQuantize: {
        msg.payload.push_back(static_cast<std::uint8_t>(b_));
        const double s = m > 0 ? x.cwiseAbs().maxCoeff() : 0.0;
        detail::put_f64(msg.payload, s);
        if (s == 0.0) {
          msg.bits = l_default;  // canonical zero message: header only
          break;
        }
        const double tau = static_cast<double>(1 << (b_ - 1));
        for (int j = 0; j < m; ++j) {
          const double y = std::abs(x(j)) / s * tau;
          const double lo = std::floor(y);
          const double frac = y - lo;
          const int level =
              static_cast<int>(lo) + (rng.uniform01() < frac ? 1 : 0);
          std::uint8_t byte = static_cast<std::uint8_t>(level);
          if (x(j) < 0.0) byte |= 0x80;
          msg.payload.push_back(byte);
        }
        msg.bits = message_bits(m, l_default);
        break;
      }
      case CompressorKind::kTopK: {
        const int keep = std::min(k_, m);
        std::vector<int> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        std::partial_sort(idx.begin(), idx.begin() + keep, idx.end(),
                          [&x](int a, int b) {
                            const double fa = std::abs(x(a)), fb = std::abs(x(b));
                            return fa != fb ? fa > fb : a < b;
                          });
        std::sort(idx.begin(), idx.begin() + keep);
        detail::put_u32(msg.payload, static_cast<std::uint32_t>(keep));
        for (int t = 0; t < keep; ++t) {
          detail::put_u32(msg.payload, static_cast<std::uint32_t>(idx[t]));
          detail::put_f64(msg.payload, x(idx[t]));
        }
        msg.bits = message_bits(m, l_default);
        break;
      }
      case CompressorKind::kNormSign: {
        const double s = m > 0 ? x.cwiseAbs().maxCoeff() : 0.0;
        detail::put_f64(msg.payload, s);
        if (s == 0.0) {
          msg.bits = l_default;
          break;
        }
        std::vector<std::uint8_t> bitsbuf((m + 7) / 8, 0);
        for (int j = 0; j < m; ++j)
          if (x(j) >= 0.0) bitsbuf[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
        msg.payload.insert(msg.payload.end(), bitsbuf.begin(), bitsbuf.end());
        msg.bits = message_bits(m, l_default);
        break;
      }
    }
    msg.decoded = decode(msg.payload);
    return msg;
  }

  // Same as compress() but accounts the information bits with a caller-chosen
  // per-scalar width l.
  CompressedMessage compress(const Eigen::VectorXd& x, Rng& rng, int l) const {
    CompressedMessage msg = compress(x, rng);
    const int m = static_cast<int>(x.size());
    const bool zero_msg =
        (kind_ == CompressorKind::kStochasticQuantize ||
         kind_ == CompressorKind::kNormSign) &&
        (m == 0 || x.cwiseAbs().maxCoeff() == 0.0);
    msg.bits = zero_msg ? l : message_bits(m, l);
    return msg;
  }

 private:
  explicit Compressor(CompressorKind kind) : kind_(kind) {}

  CompressorKind kind_;
  int b_ = 0;
  int k_ = 0;
};

// Aggregate payload bits broadcast per round: one message of dimension m from
// each of n_agents.
inline std::int64_t bits_per_round(const Compressor& c, int m, int n_agents,
                                   int l) {
  if (l < 1) throw std::invalid_argument("bits_per_round: l must be >= 1");
  return static_cast<std::int64_t>(n_agents) * c.message_bits(m, l);
}

struct ContractEstimate {
  CompressorContract declared;
  double c_hat = 0.0;       // mean of ||C(x)-x||^2 over unit directions
  double c_se = 0.0;
  double r_hat = 1.0;       // grid r minimizing the scaled mismatch
  double delta_hat = 1.0;   // 1 - min mean scaled mismatch
  double ratio_at_declared_r = 0.0;
  double ratio_se = 0.0;
  int trials = 0;
  bool pass = false;

  std::string describe() const {
    std::ostringstream os;
    os << "declared (C=" << declared.C << ", delta=" << declared.delta
       << ", r=" << declared.r << "); estimated C_hat=" << c_hat << " (se "
       << c_se << "), best r=" << r_hat << " -> delta_hat=" << delta_hat
       << ", scaled mismatch at declared r=" << ratio_at_declared_r << " (se "
       << ratio_se << "), trials=" << trials << ", "
       << (pass ? "PASS" : "VIOLATION");
    return os.str();
  }
};

// Monte-Carlo check that the declared contract dominates the measured one on
// random unit directions. The declared values bound a supremum, so the sample
// means must sit below them up to 3 standard errors.
inline ContractEstimate estimate_contract(const Compressor& comp, int dim,
                                          int n_trials, std::uint64_t seed) {
  if (n_trials < 1000)
    throw std::invalid_argument("estimate_contract: need n_trials >= 1000");
  if (dim < 1) throw std::invalid_argument("estimate_contract: dim >= 1");

  ContractEstimate est;
  est.declared = comp.contract(dim);
  est.trials = n_trials;

  // grid of candidate scalings around the declared r, plus r = 1
  std::vector<double> grid;
  for (int g = -20; g <= 20; ++g)
    grid.push_back(est.declared.r * std::pow(2.0, g / 10.0));
  grid.push_back(1.0);
  grid.push_back(est.declared.r);

  std::vector<double> err_sq(n_trials);
  std::vector<double> declared_ratio(n_trials);
  std::vector<double> grid_mean(grid.size(), 0.0);
  for (int t = 0; t < n_trials; ++t) {
    Rng rng = derive_stream(seed, 0, static_cast<std::uint64_t>(t),
                            StreamPurpose::kEstimate);
    Eigen::VectorXd x(dim);
    for (int j = 0; j < dim; ++j) x(j) = rng.normal();
    const double nrm = x.norm();
    if (nrm == 0.0) {
      x.setZero();
      x(0) = 1.0;
    } else {
      x /= nrm;
    }
    const CompressedMessage msg = comp.compress(x, rng);
    err_sq[t] = (msg.decoded - x).squaredNorm();
    for (std::size_t g = 0; g < grid.size(); ++g)
      grid_mean[g] += (msg.decoded / grid[g] - x).squaredNorm();
    declared_ratio[t] = (msg.decoded / est.declared.r - x).squaredNorm();
  }
  for (double& v : grid_mean) v /= n_trials;

  auto mean_se = [](const std::vector<double>& v) {
    const double mean =
        std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / (static_cast<double>(v.size()) - 1) : 0.0;
    return std::pair<double, double>(mean,
                                     std::sqrt(var / static_cast<double>(v.size())));
  };

  std::tie(est.c_hat, est.c_se) = mean_se(err_sq);
  std::tie(est.ratio_at_declared_r, est.ratio_se) = mean_se(declared_ratio);
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (grid_mean[g] < grid_mean[best]) best = g;
  est.r_hat = grid[best];
  est.delta_hat = 1.0 - grid_mean[best];

  const bool c_ok = est.c_hat <= est.declared.C + 3.0 * est.c_se + 1e-12;
  const bool scaled_ok = est.ratio_at_declared_r <=
                         (1.0 - est.declared.delta) + 3.0 * est.ratio_se + 1e-12;
  est.pass = c_ok && scaled_ok;
  return est;
}

}  // namespace cdpnes
