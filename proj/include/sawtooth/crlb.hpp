/**
 * @brief Cramer-Rao lower bounds for the unwrapped (linear) RTT model.
 *
 * The bounds are derived for Z = [1, n] omega + U with omega =
 * (alpha_tilde, beta_tilde) and a noise variance that depends on the
 * slope. They are references for the wrapped sawtooth model, not bounds
 * on it: the wrapped likelihood is not differentiable everywhere.
 *
 * phi_S and the round-trip delay are not jointly identifiable in the
 * unwrapped model. Their bounds are therefore conditional: crlb_phi
 * assumes the delay is known and crlb_delta assumes the phase is known.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "sawtooth/signal_model.hpp"

namespace sawtooth {

using Matrix2 = std::array<std::array<double, 2>, 2>;
using Vector2 = std::array<double, 2>;

/// Largest sample count accepted by the bound computations (N^3 terms).
inline constexpr std::size_t kMaxBoundSamples = 100'000'000;

/// Fisher information of (alpha_tilde, beta_tilde).
struct FisherMatrix {
  Matrix2 entries{};
  std::size_t n_samples = 0;
  double sigma_sq = 0.0;
  /// 2 sigma2^2 (sigma1 + beta_tilde sigma2)^2 / sigma^2: the slope
  /// information carried by the noise variance, per sample.
  double slope_noise_info = 0.0;
};

struct CrlbReport {
  double crlb_fd = 0.0;     ///< [Hz^2]
  double crlb_phi = 0.0;    ///< [rad^2], round-trip delay known
  double crlb_delta = 0.0;  ///< [s^2], slave phase known
  double crlb_rho = 0.0;    ///< [m^2]
  std::size_t n_samples = 0;
};

inline FisherMatrix fisher_matrix(const LinearModelSpec& spec) {
  spec.validate();
  if (spec.n_samples > kMaxBoundSamples) throw std::invalid_argument("n_samples exceeds 1e8");

  const double n = static_cast<double>(spec.n_samples);
  const double sigma_sq = spec.noise_variance();
  const double slope_term = spec.sigma1 + spec.beta_tilde * spec.sigma2;
  const double q = 2.0 * spec.sigma2 * spec.sigma2 * slope_term * slope_term / sigma_sq;
  const double scale = n / sigma_sq;

  FisherMatrix fm;
  fm.n_samples = spec.n_samples;
  fm.sigma_sq = sigma_sq;
  fm.slope_noise_info = q;
  fm.entries[0][0] = scale;
  fm.entries[0][1] = scale * (n - 1.0) / 2.0;
  fm.entries[1][0] = fm.entries[0][1];
  fm.entries[1][1] = scale * ((n - 1.0) * (2.0 * n - 1.0) / 6.0 + q);
  return fm;
}

/// Closed-form inverse of fisher_matrix().
inline Matrix2 inverse_fisher(const FisherMatrix& fm) {
  const auto& f = fm.entries;
  const double det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
  if (!(f[0][0] > 0.0) || !(det > 0.0) || f[0][1] != f[1][0] || fm.n_samples < 2 ||
      !(fm.sigma_sq > 0.0))
    throw std::invalid_argument("Fisher matrix is not positive definite");

  const double n = static_cast<double>(fm.n_samples);
  const double q_per = fm.slope_noise_info / (n - 1.0);
  const double scale = (fm.sigma_sq / n) / ((n + 1.0) / 12.0 + q_per);

  Matrix2 inv;
  inv[0][0] = scale * ((2.0 * n - 1.0) / 6.0 + q_per);
  inv[0][1] = -scale / 2.0;
  inv[1][0] = inv[0][1];
  inv[1][1] = scale / (n - 1.0);
  return inv;
}

/// g^T M g
inline double quadratic_form(const Matrix2& m, const Vector2& g) {
  return g[0] * (m[0][0] * g[0] + m[0][1] * g[1]) + g[1] * (m[1][0] * g[0] + m[1][1] * g[1]);
}

/// Bounds for f_d, phi_S (delay known), round-trip delay (phase known) and range.
inline CrlbReport crlb_report(const PhysicalParams& p, const NoiseParams& noise, std::size_t n) {
  const LinearModelSpec spec = LinearModelSpec::from_physical(p, noise, n);
  const Matrix2 inv = inverse_fisher(fisher_matrix(spec));

  const double ts = p.slave_period();
  const double k = static_cast<double>(p.k_factor);
  const double slope_weight = (p.phi_s / kTwoPi - 1.0) / k;

  const Vector2 grad_fd{0.0, -1.0 / (ts * ts * k)};
  const Vector2 grad_delta{2.0, 2.0 * slope_weight};
  const Vector2 grad_phi{-kTwoPi / ts, -kTwoPi / ts * slope_weight};

  CrlbReport r;
  r.n_samples = n;
  r.crlb_fd = quadratic_form(inv, grad_fd);
  r.crlb_delta = quadratic_form(inv, grad_delta);
  r.crlb_phi = quadratic_form(inv, grad_phi);
  r.crlb_rho = (p.c / 2.0) * (p.c / 2.0) * r.crlb_delta;
  return r;
}

}  // namespace sawtooth
