#pragma once

// Counter-based Gaussian streams. A variate is a pure function of
// (seed, stream_id, index), so replicates can be generated in any order and on
// any number of threads with identical results.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace lecam {

namespace detail {

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Philox4x32-10 block cipher used as a counter-based generator.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo32(kM0, ctr[0], hi0, lo0);
    detail::mulhilo32(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Standard normal quantile, Wichura's AS 241 (PPND16); relative accuracy ~1e-16.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -HUGE_VAL;
    if (p == 1.0) return HUGE_VAL;
    throw std::domain_error("normal_quantile: p outside [0, 1]");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

/// Purposes for derived streams. Each purpose yields a stream independent of
/// the parent's fine-grid increments.
enum class StreamPurpose : std::uint64_t {
  euler_innovations = 1,
  kernel_extension = 2,
  reference_sample = 3,
};

/// Source of Brownian increments on a uniform grid of step dt.
///
/// Increment k is sqrt(dt) * Z_k with Z_k the k-th standard normal of the
/// (seed, stream_id) stream. Coarser grids are served by summing consecutive
/// increments, so refined and coarse simulations see the same Brownian path.
struct BrownianDriver {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  double dt = 1.0;

  /// Uniform in (0, 1) with 53 random bits; never returns 0 or 1.
  double uniform(std::uint64_t index) const {
    const auto block = philox_block(index / 2);
    const std::uint64_t bits = (index % 2 == 0)
                                   ? (static_cast<std::uint64_t>(block[0]) << 32) | block[1]
                                   : (static_cast<std::uint64_t>(block[2]) << 32) | block[3];
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(std::uint64_t index) const { return normal_quantile(uniform(index)); }

  void fill_normals(std::uint64_t first, std::span<double> out) const {
    std::size_t i = 0;
    std::uint64_t idx = first;
    if (idx % 2 == 1 && i < out.size()) {
      out[i++] = normal(idx++);
    }
    for (; i + 1 < out.size(); i += 2, idx += 2) {
      const auto block = philox_block(idx / 2);
      const std::uint64_t b0 = (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
      const std::uint64_t b1 = (static_cast<std::uint64_t>(block[2]) << 32) | block[3];
      out[i] = normal_quantile((static_cast<double>(b0 >> 11) + 0.5) * 0x1.0p-53);
      out[i + 1] = normal_quantile((static_cast<double>(b1 >> 11) + 0.5) * 0x1.0p-53);
    }
    if (i < out.size()) out[i] = normal(idx);
  }

  /// out[j] = W((first + (j+1)*factor) dt) - W((first + j*factor) dt).
  void fill_increments(std::uint64_t first, std::span<double> out, std::size_t factor = 1) const {
    if (factor == 0) throw std::invalid_argument("fill_increments: factor must be >= 1");
    const double scale = std::sqrt(dt);
    if (factor == 1) {
      fill_normals(first, out);
      for (double& z : out) z *= scale;
      return;
    }
    std::vector<double> buf(factor);
    for (std::size_t j = 0; j < out.size(); ++j) {
      fill_normals(first + j * factor, buf);
      double s = 0.0;
      for (double z : buf) s += z;
      out[j] = s * scale;
    }
  }

  std::vector<double> increments(std::size_t count, std::size_t factor = 1) const {
    std::vector<double> out(count);
    fill_increments(0, out, factor);
    return out;
  }

  BrownianDriver substream(StreamPurpose purpose) const {
    const auto p = static_cast<std::uint64_t>(purpose);
    return BrownianDriver{seed, detail::splitmix64(stream_id ^ detail::splitmix64(p << 56 | p)),
                          dt};
  }

  BrownianDriver with_dt(double new_dt) const { return BrownianDriver{seed, stream_id, new_dt}; }

 private:
  std::array<std::uint32_t, 4> philox_block(std::uint64_t block) const {
    return philox4x32({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                       static_cast<std::uint32_t>(stream_id),
                       static_cast<std::uint32_t>(stream_id >> 32)},
                      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  }
};

/// Number of driver steps per simulation step; grid_dt must be driver_dt times
/// a power of two.
inline std::size_t refinement_factor(double grid_dt, double driver_dt) {
  const double ratio = grid_dt / driver_dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
    throw std::invalid_argument("driver dt must divide the simulation step");
  }
  const auto f = static_cast<std::size_t>(rounded);
  if ((f & (f - 1)) != 0) {
    throw std::invalid_argument("simulation step / driver dt must be a power of two");
  }
  return f;
}

}  // namespace lecam
