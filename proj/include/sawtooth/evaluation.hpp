/**
 * @brief Seeded Monte Carlo harness: MSE of range, frequency and phase
 * estimates versus sample size, with unwrapped-model CRLBs for reference.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sawtooth/crlb.hpp"
#include "sawtooth/estimators.hpp"
#include "sawtooth/signal_model.hpp"

namespace sawtooth {

struct McConfig {
  PhysicalParams physical;
  NoiseParams noise;
  std::vector<std::size_t> n_grid{500, 1000, 1500, 2000};
  std::size_t repetitions = 300;
  std::uint64_t base_seed = 1;
  std::vector<Method> methods{Method::pcp, Method::lgs};
  PcpConfig pcp;
  LgsWindow lgs;
  GridConfig ggs;
  /// Largest tolerated share of failed repetitions per (method, N).
  double max_failure_rate = 0.05;

  /// Operating point with noise given as SNR_in / SNR_out [dB].
  static McConfig with_snr(const PhysicalParams& p, double snr_in_db, double snr_out_db) {
    McConfig cfg;
    cfg.physical = p;
    cfg.noise = NoiseParams::from_snr_db(snr_in_db, snr_out_db, -p.slave_period());
    cfg.pcp = PcpConfig::for_physical(p);
    return cfg;
  }

  void validate() const {
    physical.validate();
    noise.validate();
    pcp.validate();
    ggs.validate();
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (n_grid.empty()) throw std::invalid_argument("n_grid must not be empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] < 2) throw std::invalid_argument("n_grid values must be >= 2");
      if (i > 0 && n_grid[i] <= n_grid[i - 1])
        throw std::invalid_argument("n_grid must be strictly increasing");
    }
    if (methods.empty()) throw std::invalid_argument("methods must not be empty");
    for (std::size_t i = 0; i < methods.size(); ++i)
      for (std::size_t j = i + 1; j < methods.size(); ++j)
        if (methods[i] == methods[j]) throw std::invalid_argument("methods must not repeat");
    if (pcp.t_master != physical.t_master || pcp.k_factor != physical.k_factor)
      throw std::invalid_argument("estimator t_master/k_factor must match the physical parameters");
  }
};

struct McRecord {
  Method method = Method::pcp;
  std::size_t n_samples = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double rho_err_m = 0.0;
  double fd_err_hz = 0.0;
  double phi_err_raw_rad = 0.0;
  double phi_err_wrapped_rad = 0.0;  ///< in [-pi, pi]
  bool failed = false;
};

struct McSummaryRow {
  Method method = Method::pcp;
  std::size_t n_samples = 0;
  double mse_rho_m2 = 0.0;
  double mse_fd_hz2 = 0.0;
  double mse_phi_rad2 = 0.0;
  double mse_phi_wrapped_rad2 = 0.0;
  std::size_t reps_ok = 0;
  std::size_t reps_failed = 0;
};

struct McResult {
  std::vector<McRecord> records;  ///< sorted by (method, N, rep)
  std::vector<McSummaryRow> summary;

  const McSummaryRow* find(Method m, std::size_t n) const {
    for (const auto& row : summary)
      if (row.method == m && row.n_samples == n) return &row;
    return nullptr;
  }
};

/// Thrown when too many repetitions failed; carries the full result.
class FailureRateExceeded : public std::runtime_error {
 public:
  FailureRateExceeded(const std::string& what, McResult result)
      : std::runtime_error(what), result_(std::move(result)) {}
  const McResult& result() const { return result_; }

 private:
  McResult result_;
};

/// Mean squared errors over the non-failed records of each (method, N).
inline std::vector<McSummaryRow> summarize(const std::vector<McRecord>& records) {
  std::map<std::pair<Method, std::size_t>, McSummaryRow> cells;
  for (const auto& r : records) {
    auto& row = cells[{r.method, r.n_samples}];
    row.method = r.method;
    row.n_samples = r.n_samples;
    if (r.failed) {
      ++row.reps_failed;
      continue;
    }
    ++row.reps_ok;
    row.mse_rho_m2 += r.rho_err_m * r.rho_err_m;
    row.mse_fd_hz2 += r.fd_err_hz * r.fd_err_hz;
    row.mse_phi_rad2 += r.phi_err_raw_rad * r.phi_err_raw_rad;
    row.mse_phi_wrapped_rad2 += r.phi_err_wrapped_rad * r.phi_err_wrapped_rad;
  }
  std::vector<McSummaryRow> out;
  for (auto& [key, row] : cells) {
    const double k = row.reps_ok > 0 ? 1.0 / static_cast<double>(row.reps_ok)
                                     : std::numeric_limits<double>::quiet_NaN();
    row.mse_rho_m2 *= k;
    row.mse_fd_hz2 *= k;
    row.mse_phi_rad2 *= k;
    row.mse_phi_wrapped_rad2 *= k;
    out.push_back(row);
  }
  return out;
}

namespace detail {

inline McRecord score(Method m, std::size_t n, std::size_t rep, std::uint64_t seed,
                      const EstimateResult& est, const PhysicalParams& truth) {
  const PhysicalParams got =
      generic_to_physical(est.params, truth.delta0, truth.t_master, truth.k_factor, truth.c)
          .physical;
  McRecord r;
  r.method = m;
  r.n_samples = n;
  r.rep = rep;
  r.seed = seed;
  r.rho_err_m = got.rho - truth.rho;
  r.fd_err_hz = got.f_d - truth.f_d;
  r.phi_err_raw_rad = got.phi_s - truth.phi_s;
  r.phi_err_wrapped_rad = wrap_angle(r.phi_err_raw_rad);
  return r;
}

inline McRecord failed_record(Method m, std::size_t n, std::size_t rep, std::uint64_t seed) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {m, n, rep, seed, nan, nan, nan, nan, true};
}

}  // namespace detail

/// Runs every method on every (N, repetition) trace.
///
/// Estimators know delta0, T_M, K, c and sign(psi); range, frequency
/// difference and slave phase are estimated. A repetition whose estimator
/// throws is recorded as failed and left out of the MSEs.
inline McResult run_monte_carlo(const McConfig& cfg) {
  cfg.validate();
  const SawtoothParams truth = physical_to_generic(cfg.physical);

  // One bucket per configured method, in configuration order.
  std::vector<std::vector<McRecord>> per_method(cfg.methods.size());
  for (std::size_t n : cfg.n_grid) {
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
      const std::uint64_t seed = derive_seed(cfg.base_seed, n, rep);
      const RttTrace trace = simulate_sawtooth(truth, cfg.noise, n, seed);
      const auto y = trace.view();

      std::optional<EstimateResult> pcp;
      bool pcp_failed = false;
      auto get_pcp = [&]() -> const EstimateResult& {
        if (!pcp && !pcp_failed) {
          try {
            pcp = pcp_estimate(y, cfg.pcp);
          } catch (const EstimationError&) {
            pcp_failed = true;
          }
        }
        if (!pcp) throw EstimationError("PCP failed");
        return *pcp;
      };

      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const Method m = cfg.methods[mi];
        try {
          EstimateResult est;
          switch (m) {
            case Method::pcp: est = get_pcp(); break;
            case Method::lgs: est = lgs_estimate(y, get_pcp(), cfg.lgs, cfg.pcp); break;
            case Method::ggs: est = grid_search_estimate(y, cfg.ggs, cfg.pcp, Method::ggs); break;
          }
          per_method[mi].push_back(detail::score(m, n, rep, seed, est, cfg.physical));
        } catch (const EstimationError&) {
          per_method[mi].push_back(detail::failed_record(m, n, rep, seed));
        }
      }
    }
  }

  McResult result;
  for (auto& bucket : per_method)
    result.records.insert(result.records.end(), bucket.begin(), bucket.end());
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const McRecord& a, const McRecord& b) {
                     if (a.method != b.method) return a.method < b.method;
                     if (a.n_samples != b.n_samples) return a.n_samples < b.n_samples;
                     return a.rep < b.rep;
                   });
  result.summary = summarize(result.records);

  for (const auto& row : result.summary) {
    const double rate = static_cast<double>(row.reps_failed) /
                        static_cast<double>(row.reps_failed + row.reps_ok);
    if (rate > cfg.max_failure_rate) {
      const std::string what = to_string(row.method) + " failed on " +
                               std::to_string(row.reps_failed) + " repetitions at N=" +
                               std::to_string(row.n_samples);
      throw FailureRateExceeded(what, std::move(result));
    }
  }
  return result;
}

/// CRLB rows for every N of the sweep, shaped like summary rows.
inline std::vector<CrlbReport> crlb_overlay(const McConfig& cfg) {
  std::vector<CrlbReport> out;
  out.reserve(cfg.n_grid.size());
  for (std::size_t n : cfg.n_grid) out.push_back(crlb_report(cfg.physical, cfg.noise, n));
  return out;
}

}  // namespace sawtooth
