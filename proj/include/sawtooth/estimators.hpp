/**
 * @brief Estimators for the sawtooth RTT model.
 *
 * PCP (periodogram and correlation peaks) is a three-step heuristic:
 * a zero-padded periodogram gives |beta|, circular correlation of the
 * first data period against two reference ramps gives sign(beta) and
 * gamma, and the offset follows in closed form. LGS/GGS minimize the
 * prediction MSE over a uniform (beta, gamma) grid, with alpha and psi
 * concentrated out.
 *
 * All estimators assume sign(psi) is known, and psi is tied to beta
 * through psi = -K T_M / (beta + K).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sawtooth/fft.hpp"
#include "sawtooth/signal_model.hpp"

namespace sawtooth {

/// An estimator could not produce an estimate from the given data.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { pcp, lgs, ggs };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::pcp: return "PCP";
    case Method::lgs: return "LGS";
    case Method::ggs: return "GGS";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "PCP" || s == "pcp") return Method::pcp;
  if (s == "LGS" || s == "lgs") return Method::lgs;
  if (s == "GGS" || s == "ggs") return Method::ggs;
  throw std::invalid_argument("unknown method '" + s + "' (expected PCP, LGS or GGS)");
}

struct PcpConfig {
  int zero_pad_factor = 5;
  int psi_sign = -1;
  double t_master = 10e-9;
  std::int64_t k_factor = 10'000;

  void validate() const {
    if (zero_pad_factor < 1) throw std::invalid_argument("zero_pad_factor must be >= 1");
    if (psi_sign != -1 && psi_sign != 1) throw std::invalid_argument("psi_sign must be -1 or +1");
    if (!(t_master > 0.0)) throw std::invalid_argument("t_master_seconds must be positive");
    if (k_factor < 1) throw std::invalid_argument("k_factor must be >= 1");
  }

  static PcpConfig for_physical(const PhysicalParams& p, int zero_pad_factor = 5) {
    return {zero_pad_factor, -1, p.t_master, p.k_factor};
  }
};

/// Interval sampled by a grid axis: [lo, hi] when closed, [lo, hi) otherwise.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool closed = true;

  /// Uniformly spaced points; a closed range includes both endpoints.
  std::vector<double> points(std::size_t count) const {
    std::vector<double> out(count);
    if (count == 1) {
      out[0] = lo;
      return out;
    }
    const double step = (hi - lo) / static_cast<double>(closed ? count - 1 : count);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
    if (closed) out.back() = hi;
    return out;
  }
};

struct GridConfig {
  Range beta{1e-4, 1e-2, true};
  Range gamma{0.0, 1.0, false};
  std::size_t n_beta = 1000;
  std::size_t n_gamma = 1000;

  void validate() const {
    if (n_beta < 1 || n_gamma < 1) throw std::invalid_argument("grid point counts must be >= 1");
    for (const Range* r : {&beta, &gamma}) {
      if (!std::isfinite(r->lo) || !std::isfinite(r->hi))
        throw std::invalid_argument("grid ranges must be finite");
      if (r->closed ? !(r->lo <= r->hi) : !(r->lo < r->hi))
        throw std::invalid_argument("grid ranges must be non-empty");
    }
  }

  std::vector<double> betas() const { return beta.points(n_beta); }

  /// Gamma grid points wrapped into [0, 1).
  std::vector<double> gammas() const {
    auto g = gamma.points(n_gamma);
    for (auto& v : g) v = mod1(v);
    return g;
  }
};

/// Neighborhood searched by LGS around a PCP estimate.
struct LgsWindow {
  double beta_half_width = 5e-4;
  double gamma_half_width = 28e-3;
  std::size_t n_beta = 100;
  std::size_t n_gamma = 1000;

  GridConfig around(double beta, double gamma) const {
    return {{beta - beta_half_width, beta + beta_half_width, true},
            {gamma - gamma_half_width, gamma + gamma_half_width, true},
            n_beta,
            n_gamma};
  }
};

struct EstimateResult {
  SawtoothParams params;
  double pmse = 0.0;  ///< [s^2]
  Method method = Method::pcp;
};

/// Amplitude implied by beta in the clock model, -K T_M / (beta + K).
inline double amplitude_from_beta(double beta, double t_master, std::int64_t k_factor) {
  const double k = static_cast<double>(k_factor);
  if (!(beta > -k)) throw std::invalid_argument("beta must be > -k_factor");
  return -k * t_master / (beta + k);
}

/// amplitude_from_beta with the sign declared in the config.
inline double implied_amplitude(double beta, const PcpConfig& cfg) {
  return cfg.psi_sign * std::abs(amplitude_from_beta(beta, cfg.t_master, cfg.k_factor));
}

namespace detail {

inline double mean(std::span<const double> y) {
  return std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
}

inline bool is_constant(std::span<const double> y) {
  return std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
}

// Subtract the mean, then scale by the largest magnitude.
inline std::vector<double> center_and_normalize(std::span<const double> x) {
  const double m = mean(x);
  std::vector<double> out(x.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] - m;
    peak = std::max(peak, std::abs(out[i]));
  }
  if (peak > 0.0)
    for (auto& v : out) v /= peak;
  return out;
}

// IDFT(DFT(ref) * conj(DFT(data))), real part. Entry m is sum_n ref[n+m] data[n].
inline std::vector<double> circular_correlation(std::span<const double> ref,
                                                std::span<const double> data) {
  const auto ref_f = fft::forward(ref);
  const auto data_f = fft::forward(data);
  std::vector<std::complex<double>> prod(ref_f.size());
  for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = ref_f[k] * std::conj(data_f[k]);
  const auto c = fft::inverse(prod);

  std::vector<double> out(c.size());
  double peak = 0.0, residue = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    out[i] = c[i].real();
    peak = std::max(peak, std::abs(c[i]));
    residue = std::max(residue, std::abs(c[i].imag()));
  }
  if (residue > 1e-9 * peak) throw std::logic_error("circular correlation is not real");
  return out;
}

}  // namespace detail

/// Unsigned frequency from the periodogram of the centered, zero-padded data.
///
/// Returns k*/(N L) for the strongest bin k* in 1..floor(N L / 2). The DC
/// bin is skipped; ties go to the lower bin.
inline double periodogram_beta_abs(std::span<const double> y, const PcpConfig& cfg) {
  cfg.validate();
  if (y.size() < 2) throw std::invalid_argument("periodogram needs at least 2 samples");
  if (detail::is_constant(y)) throw EstimationError("constant data has no spectral peak");

  const std::size_t padded = y.size() * static_cast<std::size_t>(cfg.zero_pad_factor);
  std::vector<double> buf(padded, 0.0);
  const double m = detail::mean(y);
  for (std::size_t i = 0; i < y.size(); ++i) buf[i] = y[i] - m;

  const auto spectrum = fft::real_forward(buf);
  std::size_t best = 1;
  double best_power = -1.0;
  for (std::size_t k = 1; k <= padded / 2; ++k) {
    const double power = std::norm(spectrum[k]);
    if (power > best_power) {
      best_power = power;
      best = k;
    }
  }
  return static_cast<double>(best) / static_cast<double>(padded);
}

struct SignPhase {
  double beta = 0.0;   ///< signed frequency
  double gamma = 0.0;  ///< in [0, 1)
  std::size_t lag = 0;
  double peak_plus = 0.0;
  double peak_minus = 0.0;
};

/// Sign of beta and gamma from the first estimated period of the data.
inline SignPhase correlation_sign_phase(std::span<const double> y, double beta_abs,
                                        const PcpConfig& cfg) {
  cfg.validate();
  if (!(beta_abs > 0.0)) throw std::invalid_argument("beta_abs must be positive");
  const double period_f = std::floor(1.0 / beta_abs);
  if (period_f < 2.0) throw EstimationError("estimated period shorter than 2 samples");
  if (period_f > static_cast<double>(y.size()))
    throw EstimationError("estimated period longer than the record");
  const auto period = static_cast<std::size_t>(period_f);

  std::vector<double> plus(period), minus(period);
  for (std::size_t i = 0; i < period; ++i) {
    const double n = static_cast<double>(i);
    plus[i] = cfg.psi_sign * mod1(beta_abs * n);
    minus[i] = cfg.psi_sign * mod1(-beta_abs * n);
  }
  const auto first = y.first(period);
  if (detail::is_constant(first)) throw EstimationError("first period of the data is constant");

  const auto data = detail::center_and_normalize(first);
  const auto corr_plus = detail::circular_correlation(detail::center_and_normalize(plus), data);
  const auto corr_minus = detail::circular_correlation(detail::center_and_normalize(minus), data);

  const auto arg_plus = std::max_element(corr_plus.begin(), corr_plus.end());
  const auto arg_minus = std::max_element(corr_minus.begin(), corr_minus.end());

  SignPhase out;
  out.peak_plus = *arg_plus;
  out.peak_minus = *arg_minus;
  if (out.peak_plus >= out.peak_minus) {
    out.beta = beta_abs;
    out.lag = static_cast<std::size_t>(arg_plus - corr_plus.begin());
  } else {
    out.beta = -beta_abs;
    out.lag = static_cast<std::size_t>(arg_minus - corr_minus.begin());
  }
  out.gamma = mod1(out.beta * static_cast<double>(out.lag));
  return out;
}

/// Offset minimizing the prediction MSE for fixed (beta, gamma, psi):
/// mean(y) - psi * mean(mod1(beta n + gamma)).
inline double concentrated_alpha(std::span<const double> y, double beta, double gamma,
                                 double psi) {
  if (y.empty()) throw std::invalid_argument("concentrated_alpha needs at least 1 sample");
  const double g = mod1(gamma);
  double ramp = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ramp += sawtooth_phase(beta, g, i);
  return detail::mean(y) - psi * ramp / static_cast<double>(y.size());
}

/// Prediction MSE [s^2] at (beta, gamma) with alpha and psi concentrated out.
inline double pmse(std::span<const double> y, double beta, double gamma, const PcpConfig& cfg) {
  if (y.empty()) throw std::invalid_argument("pmse needs at least 1 sample");
  const double psi = implied_amplitude(beta, cfg);
  const double g = mod1(gamma);
  const double alpha = concentrated_alpha(y, beta, g, psi);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - alpha - psi * sawtooth_phase(beta, g, i);
    acc += r * r;
  }
  return acc / static_cast<double>(y.size());
}

/// Evaluates the PMSE over many gamma values for one beta at O(log N) each.
///
/// For fixed beta the phases f_n = mod1(beta n) are sorted once; a given
/// gamma wraps exactly the suffix with f_n + gamma >= 1, so all sums the
/// objective needs follow from prefix sums over that order.
class PmseRowEvaluator {
 public:
  explicit PmseRowEvaluator(std::span<const double> y) : centered_(y.size()) {
    if (y.empty()) throw std::invalid_argument("pmse needs at least 1 sample");
    const double m = detail::mean(y);
    for (std::size_t i = 0; i < y.size(); ++i) {
      centered_[i] = y[i] - m;
      sum_yy_ += centered_[i] * centered_[i];
      sum_y_ += centered_[i];
    }
    order_.resize(y.size());
    suffix_f_.resize(y.size() + 1);
    suffix_y_.resize(y.size() + 1);
  }

  std::size_t size() const { return centered_.size(); }

  /// out[j] = PMSE at (beta, gammas[j]) for amplitude psi; gammas in [0, 1).
  void evaluate(double beta, double psi, std::span<const double> gammas, std::span<double> out) {
    const std::size_t n = centered_.size();
    const double nd = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      order_[i] = {mod1(beta * static_cast<double>(i)), centered_[i]};
    std::sort(order_.begin(), order_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    double f1 = 0.0, f2 = 0.0, yf = 0.0;
    for (const auto& [f, yc] : order_) {
      f1 += f;
      f2 += f * f;
      yf += yc * f;
    }
    suffix_f_[n] = 0.0;
    suffix_y_[n] = 0.0;
    for (std::size_t i = n; i-- > 0;) {
      suffix_f_[i] = suffix_f_[i + 1] + order_[i].first;
      suffix_y_[i] = suffix_y_[i + 1] + order_[i].second;
    }

    for (std::size_t j = 0; j < gammas.size(); ++j) {
      const double g = gammas[j];
      const auto split = std::partition_point(order_.begin(), order_.end(),
                                              [g](const auto& e) { return e.first + g < 1.0; });
      const auto idx = static_cast<std::size_t>(split - order_.begin());
      const double wrapped = static_cast<double>(n - idx);
      const double s1 = f1 + nd * g - wrapped;
      const double s2 =
          f2 + 2.0 * g * f1 + nd * g * g - 2.0 * (suffix_f_[idx] + wrapped * g) + wrapped;
      const double sy = yf + g * sum_y_ - suffix_y_[idx];
      const double mean_s = s1 / nd;
      const double sse =
          sum_yy_ - 2.0 * psi * (sy - mean_s * sum_y_) + psi * psi * (s2 - s1 * mean_s);
      out[j] = std::max(sse, 0.0) / nd;
    }
  }

 private:
  std::vector<double> centered_;
  double sum_yy_ = 0.0;
  double sum_y_ = 0.0;
  std::vector<std::pair<double, double>> order_;  // (mod1(beta n), centered y[n])
  std::vector<double> suffix_f_;
  std::vector<double> suffix_y_;
};

/// PMSE on every grid point, row-major over (beta, gamma).
struct PmseSurface {
  std::vector<double> betas;
  std::vector<double> gammas;  ///< wrapped into [0, 1)
  std::vector<double> values;  ///< values[i * gammas.size() + j]
  std::size_t argmin = 0;

  double at(std::size_t i, std::size_t j) const { return values[i * gammas.size() + j]; }
  double argmin_beta() const { return betas[argmin / gammas.size()]; }
  double argmin_gamma() const { return gammas[argmin % gammas.size()]; }
};

namespace detail {

inline void check_grid_betas(std::span<const double> betas, const PcpConfig& cfg) {
  const double k = static_cast<double>(cfg.k_factor);
  for (double b : betas)
    if (!(b > -k)) throw std::invalid_argument("grid beta values must be > -k_factor");
}

// Lexicographic (pmse, beta, gamma) order.
inline bool better(double v, double b, double g, double best_v, double best_b, double best_g) {
  if (v != best_v) return v < best_v;
  if (b != best_b) return b < best_b;
  return g < best_g;
}

}  // namespace detail

inline PmseSurface pmse_surface(std::span<const double> y, const GridConfig& grid,
                                const PcpConfig& cfg) {
  cfg.validate();
  grid.validate();
  PmseSurface s{grid.betas(), grid.gammas(), {}, 0};
  detail::check_grid_betas(s.betas, cfg);
  s.values.resize(s.betas.size() * s.gammas.size());

  PmseRowEvaluator rows(y);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.betas.size(); ++i) {
    std::span<double> row(s.values.data() + i * s.gammas.size(), s.gammas.size());
    rows.evaluate(s.betas[i], implied_amplitude(s.betas[i], cfg), s.gammas, row);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const std::size_t cur = s.argmin;
      if (detail::better(row[j], s.betas[i], s.gammas[j], best, s.betas[cur / s.gammas.size()],
                         s.gammas[cur % s.gammas.size()])) {
        best = row[j];
        s.argmin = i * s.gammas.size() + j;
      }
    }
  }
  return s;
}

/// Grid-search minimizer of the PMSE. Ties go to the smallest beta, then
/// the smallest (wrapped) gamma.
inline EstimateResult grid_search_estimate(std::span<const double> y, const GridConfig& grid,
                                           const PcpConfig& cfg, Method method = Method::ggs) {
  cfg.validate();
  grid.validate();
  const auto betas = grid.betas();
  const auto gammas = grid.gammas();
  detail::check_grid_betas(betas, cfg);

  PmseRowEvaluator rows(y);
  std::vector<double> row(gammas.size());
  double best = std::numeric_limits<double>::infinity();
  double best_beta = betas.front(), best_gamma = gammas.front();
  for (double b : betas) {
    rows.evaluate(b, implied_amplitude(b, cfg), gammas, row);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (detail::better(row[j], b, gammas[j], best, best_beta, best_gamma)) {
        best = row[j];
        best_beta = b;
        best_gamma = gammas[j];
      }
    }
  }

  EstimateResult r;
  r.method = method;
  r.params.beta = best_beta;
  r.params.gamma = best_gamma;
  r.params.psi = implied_amplitude(best_beta, cfg);
  r.params.alpha = concentrated_alpha(y, best_beta, best_gamma, r.params.psi);
  r.pmse = pmse(y, best_beta, best_gamma, cfg);
  return r;
}

/// Periodogram and correlation peaks.
inline EstimateResult pcp_estimate(std::span<const double> y, const PcpConfig& cfg) {
  const double beta_abs = periodogram_beta_abs(y, cfg);
  const SignPhase sp = correlation_sign_phase(y, beta_abs, cfg);

  EstimateResult r;
  r.method = Method::pcp;
  r.params.beta = sp.beta;
  r.params.gamma = mod1(sp.gamma);
  r.params.psi = implied_amplitude(sp.beta, cfg);
  r.params.alpha = concentrated_alpha(y, sp.beta, r.params.gamma, r.params.psi);
  r.pmse = pmse(y, sp.beta, r.params.gamma, cfg);
  return r;
}

/// Local grid search seeded by a PCP estimate.
inline EstimateResult lgs_estimate(std::span<const double> y, const EstimateResult& pcp,
                                   const LgsWindow& window, const PcpConfig& cfg) {
  return grid_search_estimate(y, window.around(pcp.params.beta, pcp.params.gamma), cfg,
                              Method::lgs);
}

inline EstimateResult lgs_estimate(std::span<const double> y, const LgsWindow& window,
                                   const PcpConfig& cfg) {
  return lgs_estimate(y, pcp_estimate(y, cfg), window, cfg);
}

}  // namespace sawtooth
