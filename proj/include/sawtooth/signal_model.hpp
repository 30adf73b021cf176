/**
 * @brief Sawtooth round-trip-time signal model.
 *
 * Parameter types for the generic sawtooth model
 *
 *     Y[n] = alpha + W[n] + psi * mod1(beta * n + gamma + V[n])
 *
 * and for its physical (clock + ranging) parameterization, the mappings
 * between the two, and seeded simulators for both the wrapped model and
 * the phase-unwrapped linear model.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sawtooth {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s, vacuum
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Fractional part, x - floor(x). Always in [0, 1), also for negative x.
inline double mod1(double x) {
  const double r = x - std::floor(x);
  // x slightly below an integer rounds r up to exactly 1.
  return r >= 1.0 ? 0.0 : r;
}

/// Reduces a normalized frequency into [-1/2, 1/2).
inline double reduce_frequency(double beta) { return mod1(beta + 0.5) - 0.5; }

/// Wraps an angle into [-pi, pi].
inline double wrap_angle(double rad) {
  return kTwoPi * (mod1(rad / kTwoPi + 0.5) - 0.5);
}

/// Sawtooth phase mod1(beta * n + gamma) for sample index n.
///
/// beta * n is reduced before gamma is added so that all routes through
/// the library (simulation, objective, grid kernel) make the same wrap
/// decision for the same (beta, gamma, n).
inline double sawtooth_phase(double beta, double gamma, std::size_t n) {
  return mod1(mod1(beta * static_cast<double>(n)) + gamma);
}

/// Generic sawtooth model parameters.
struct SawtoothParams {
  double alpha = 0.0;  ///< offset [s]
  double beta = 0.0;   ///< normalized frequency [cycles/sample], in [-1/2, 1/2)
  double gamma = 0.0;  ///< phase [cycles], in [0, 1)
  double psi = 0.0;    ///< amplitude [s]
};

/// Physical clock-synchronization and ranging parameters.
///
/// The master clock phase is fixed to zero; path delays are symmetric.
struct PhysicalParams {
  double delta0 = 5e-6;      ///< deliberate response delay [s]
  double t_master = 10e-9;   ///< master clock period [s]
  double f_d = 73.0;         ///< 1/T_S - 1/T_M [Hz]
  double phi_s = 0.75 * std::numbers::pi;  ///< slave clock phase [rad], in [0, 2pi)
  double rho = 2.0;          ///< range [m]
  double c = kSpeedOfLight;  ///< propagation speed [m/s]
  std::int64_t k_factor = 10'000;  ///< sampling period T = K * T_M

  double sampling_period() const { return static_cast<double>(k_factor) * t_master; }
  double slave_period() const { return t_master / (t_master * f_d + 1.0); }
  double round_trip_delay() const { return 2.0 * rho / c; }
  double one_way_delay() const { return rho / c; }

  void validate() const {
    if (!(t_master > 0.0) || !std::isfinite(t_master))
      throw std::invalid_argument("t_master_seconds must be positive");
    if (k_factor < 1) throw std::invalid_argument("k_factor must be >= 1");
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw std::invalid_argument("rho_m must be >= 0");
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("c_m_per_s must be positive");
    if (!std::isfinite(delta0)) throw std::invalid_argument("delta0_seconds must be finite");
    if (!std::isfinite(f_d) || !(t_master * f_d > -1.0))
      throw std::invalid_argument(
          "t_master_seconds * f_d_hz must be > -1 (slave clock period must be positive)");
    if (!(phi_s >= 0.0 && phi_s < kTwoPi)) throw std::invalid_argument("phi_s_rad must be in [0, 2pi)");
  }
};

/// Noise standard deviations: sigma_v on the phase [cycles], sigma_w additive [s].
struct NoiseParams {
  double sigma_v = 0.0;
  double sigma_w = 0.0;

  /// From SNR_in = 1/sigma_v^2 and SNR_out = psi^2/sigma_w^2, both in dB.
  static NoiseParams from_snr_db(double snr_in_db, double snr_out_db, double psi) {
    return {std::pow(10.0, -snr_in_db / 20.0), std::abs(psi) * std::pow(10.0, -snr_out_db / 20.0)};
  }

  void validate() const {
    if (!(sigma_v >= 0.0) || !std::isfinite(sigma_v)) throw std::invalid_argument("sigma_v must be >= 0");
    if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w))
      throw std::invalid_argument("sigma_w_seconds must be >= 0");
  }
};

/// Linear model with slope-dependent noise power:
/// Z[n] = alpha_tilde + beta_tilde * n + U[n],
/// U ~ N(0, sigma0^2 + (sigma1 + beta_tilde * sigma2)^2).
struct LinearModelSpec {
  double alpha_tilde = 0.0;  ///< [s]
  double beta_tilde = 0.0;   ///< [s/sample]
  double sigma0 = 0.0;       ///< [s]
  double sigma1 = 0.0;       ///< [s]
  double sigma2 = 0.0;       ///< [s]
  std::size_t n_samples = 2;

  double noise_variance() const {
    const double slope_term = sigma1 + beta_tilde * sigma2;
    return sigma0 * sigma0 + slope_term * slope_term;
  }

  void validate() const {
    if (!(sigma0 >= 0.0 && sigma1 >= 0.0 && sigma2 >= 0.0))
      throw std::invalid_argument("sigma0, sigma1, sigma2 must be >= 0");
    if (!(noise_variance() > 0.0) || !std::isfinite(noise_variance()))
      throw std::invalid_argument("noise variance sigma^2 must be positive and finite");
    if (n_samples < 2) throw std::invalid_argument("n_samples must be >= 2");
  }

  /// Unwrapped-model quantities for the given physical operating point.
  static LinearModelSpec from_physical(const PhysicalParams& p, const NoiseParams& noise,
                                       std::size_t n) {
    p.validate();
    noise.validate();
    const double ts = p.slave_period();
    const double k = static_cast<double>(p.k_factor);
    LinearModelSpec spec;
    spec.alpha_tilde = p.delta0 + p.round_trip_delay() / 2.0 + ts * (1.0 - p.phi_s / kTwoPi);
    spec.beta_tilde = -ts * p.sampling_period() * p.f_d;
    spec.sigma0 = noise.sigma_w;
    spec.sigma1 = p.t_master * noise.sigma_v;
    spec.sigma2 = noise.sigma_v / k;
    spec.n_samples = n;
    return spec;
  }
};

enum class TraceOrigin { wrapped, unwrapped };

inline std::string to_string(TraceOrigin o) {
  return o == TraceOrigin::wrapped ? "wrapped" : "unwrapped";
}

/// A sequence of RTT measurements [s].
struct RttTrace {
  std::vector<double> samples;
  std::uint64_t seed = 0;
  TraceOrigin origin = TraceOrigin::wrapped;

  std::size_t size() const { return samples.size(); }
  std::span<const double> view() const { return samples; }
};

/// Maps physical parameters onto the generic sawtooth model.
///
/// beta = T * f_d is reduced into [-1/2, 1/2); frequencies with
/// |T * f_d| >= 1/2 alias and do not survive the inverse mapping.
inline SawtoothParams physical_to_generic(const PhysicalParams& p) {
  p.validate();
  const double ts = p.slave_period();
  SawtoothParams s;
  s.alpha = p.round_trip_delay() + p.delta0 + ts;
  s.beta = reduce_frequency(p.sampling_period() * p.f_d);
  s.gamma = mod1(p.one_way_delay() / ts + p.phi_s / kTwoPi);
  s.psi = -ts;
  return s;
}

/// Physical parameters recovered from a generic estimate.
struct PhysicalRecovery {
  PhysicalParams physical;
  /// The recovered range is negative: a sign of estimation error upstream.
  bool negative_range = false;
};

/// Inverse of physical_to_generic given the quantities known to the master
/// node (delta0, T_M, K, c). The slave period is read from psi.
inline PhysicalRecovery generic_to_physical(const SawtoothParams& s, double delta0,
                                            double t_master, std::int64_t k_factor,
                                            double c = kSpeedOfLight) {
  if (!(s.psi < 0.0)) throw std::invalid_argument("psi must be negative (psi = -T_S)");
  if (!(t_master > 0.0)) throw std::invalid_argument("t_master_seconds must be positive");
  if (k_factor < 1) throw std::invalid_argument("k_factor must be >= 1");
  if (!(c > 0.0)) throw std::invalid_argument("c_m_per_s must be positive");

  const double ts = -s.psi;
  PhysicalRecovery out;
  PhysicalParams& p = out.physical;
  p.delta0 = delta0;
  p.t_master = t_master;
  p.k_factor = k_factor;
  p.c = c;
  p.f_d = s.beta / (static_cast<double>(k_factor) * t_master);
  const double round_trip = s.alpha - delta0 - ts;
  p.rho = c * round_trip / 2.0;
  p.phi_s = kTwoPi * mod1(s.gamma - (round_trip / 2.0) / ts);
  if (p.phi_s >= kTwoPi) p.phi_s = 0.0;
  out.negative_range = p.rho < 0.0;
  return out;
}

/// SplitMix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for repetition `rep` at sample size `n`: base ^ hash(n, rep).
/// Adding sample sizes to a sweep leaves existing (n, rep) seeds unchanged.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t n, std::uint64_t rep) {
  return base_seed ^ splitmix64(splitmix64(n) ^ rep);
}

/// Simulates the wrapped sawtooth model with white Gaussian V and W.
///
/// Draws (V[n], W[n]) in that order from a mt19937_64 stream seeded with
/// `seed`; the trace is deterministic for fixed (params, noise, n, seed).
inline RttTrace simulate_sawtooth(const SawtoothParams& s, const NoiseParams& noise,
                                  std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n_samples must be >= 1");
  noise.validate();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  const double gamma = mod1(s.gamma);

  RttTrace trace{std::vector<double>(n), seed, TraceOrigin::wrapped};
  for (std::size_t i = 0; i < n; ++i) {
    const double v = noise.sigma_v * normal(gen);
    const double w = noise.sigma_w * normal(gen);
    const double phase = mod1(mod1(s.beta * static_cast<double>(i)) + gamma + v);
    trace.samples[i] = s.alpha + w + s.psi * phase;
  }
  return trace;
}

/// Simulates the unwrapped linear model Z[n] = alpha_tilde + beta_tilde n + U[n].
inline RttTrace simulate_unwrapped(const LinearModelSpec& spec, std::uint64_t seed) {
  if (!(spec.sigma0 >= 0.0 && spec.sigma1 >= 0.0 && spec.sigma2 >= 0.0))
    throw std::invalid_argument("sigma0, sigma1, sigma2 must be >= 0");
  if (spec.n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  const double sigma = std::sqrt(spec.noise_variance());

  RttTrace trace{std::vector<double>(spec.n_samples), seed, TraceOrigin::unwrapped};
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    trace.samples[i] =
        spec.alpha_tilde + spec.beta_tilde * static_cast<double>(i) + sigma * normal(gen);
  }
  return trace;
}

}  // namespace sawtooth
