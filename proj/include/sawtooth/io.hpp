// CSV and JSON serialization. Units are part of every key and column name.
#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sawtooth/crlb.hpp"
#include "sawtooth/estimators.hpp"
#include "sawtooth/evaluation.hpp"
#include "sawtooth/signal_model.hpp"

namespace sawtooth::io {

using json = nlohmann::json;

/// Shortest text that round-trips the double exactly.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// ---- traces ---------------------------------------------------------------

inline void write_trace_csv(std::ostream& os, const RttTrace& trace) {
  os << "n,y_seconds\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    os << i << ',' << format_double(trace.samples[i]) << '\n';
}

inline RttTrace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("trace CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "n,y_seconds") throw std::invalid_argument("trace CSV header must be 'n,y_seconds'");
  RttTrace trace;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw std::invalid_argument("trace CSV rows need 2 columns: " + line);
    if (cells[0] != std::to_string(trace.size()))
      throw std::invalid_argument("trace CSV rows must be numbered 0, 1, ...: " + line);
    const double y = parse_double(cells[1]);
    if (!std::isfinite(y)) throw std::invalid_argument("trace values must be finite: " + line);
    trace.samples.push_back(y);
  }
  if (trace.samples.empty()) throw std::invalid_argument("trace CSV has no samples");
  return trace;
}

// ---- JSON helpers ----------------------------------------------------------

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline json to_json(const PhysicalParams& p) {
  return {{"delta0_seconds", p.delta0}, {"t_master_seconds", p.t_master}, {"f_d_hz", p.f_d},
          {"phi_s_rad", p.phi_s},       {"rho_m", p.rho},                  {"c_m_per_s", p.c},
          {"k_factor", p.k_factor}};
}

inline PhysicalParams physical_from_json(const json& j) {
  detail::check_keys(j,
                     {"delta0_seconds", "t_master_seconds", "f_d_hz", "phi_s_rad", "rho_m",
                      "c_m_per_s", "k_factor"},
                     "physical");
  PhysicalParams p;
  detail::read(j, "delta0_seconds", p.delta0);
  detail::read(j, "t_master_seconds", p.t_master);
  detail::read(j, "f_d_hz", p.f_d);
  detail::read(j, "phi_s_rad", p.phi_s);
  detail::read(j, "rho_m", p.rho);
  detail::read(j, "c_m_per_s", p.c);
  detail::read(j, "k_factor", p.k_factor);
  p.validate();
  return p;
}

inline json to_json(const SawtoothParams& s) {
  return {{"alpha_seconds", s.alpha}, {"beta", s.beta}, {"gamma", s.gamma}, {"psi_seconds", s.psi}};
}

inline SawtoothParams generic_from_json(const json& j) {
  detail::check_keys(j, {"alpha_seconds", "beta", "gamma", "psi_seconds"}, "generic");
  SawtoothParams s;
  detail::read(j, "alpha_seconds", s.alpha);
  detail::read(j, "beta", s.beta);
  detail::read(j, "gamma", s.gamma);
  detail::read(j, "psi_seconds", s.psi);
  if (!(s.gamma >= 0.0 && s.gamma < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
  if (!(s.beta >= -0.5 && s.beta < 0.5)) throw std::invalid_argument("beta must be in [-1/2, 1/2)");
  return s;
}

inline json to_json(const NoiseParams& n) {
  return {{"sigma_v", n.sigma_v}, {"sigma_w_seconds", n.sigma_w}};
}

/// Noise given either as standard deviations or as SNR_in/SNR_out [dB];
/// the SNR form needs the signal amplitude psi.
inline NoiseParams noise_from_json(const json& j, double psi) {
  detail::check_keys(j, {"sigma_v", "sigma_w_seconds", "snr_in_db", "snr_out_db"}, "noise");
  const bool by_sigma = j.contains("sigma_v") || j.contains("sigma_w_seconds");
  const bool by_snr = j.contains("snr_in_db") || j.contains("snr_out_db");
  if (by_sigma && by_snr)
    throw std::invalid_argument("noise: give either sigma_v/sigma_w_seconds or snr_in_db/snr_out_db");
  NoiseParams n;
  if (by_snr) {
    double snr_in = 40.0, snr_out = 20.0;
    detail::read(j, "snr_in_db", snr_in);
    detail::read(j, "snr_out_db", snr_out);
    n = NoiseParams::from_snr_db(snr_in, snr_out, psi);
  } else {
    detail::read(j, "sigma_v", n.sigma_v);
    detail::read(j, "sigma_w_seconds", n.sigma_w);
  }
  n.validate();
  return n;
}

inline json to_json(const LinearModelSpec& s) {
  return {{"alpha_tilde_seconds", s.alpha_tilde}, {"beta_tilde_seconds", s.beta_tilde},
          {"sigma0_seconds", s.sigma0},           {"sigma1_seconds", s.sigma1},
          {"sigma2_seconds", s.sigma2},           {"n_samples", s.n_samples}};
}

inline LinearModelSpec unwrapped_from_json(const json& j) {
  detail::check_keys(j,
                     {"alpha_tilde_seconds", "beta_tilde_seconds", "sigma0_seconds",
                      "sigma1_seconds", "sigma2_seconds", "n_samples"},
                     "unwrapped");
  LinearModelSpec s;
  detail::read(j, "alpha_tilde_seconds", s.alpha_tilde);
  detail::read(j, "beta_tilde_seconds", s.beta_tilde);
  detail::read(j, "sigma0_seconds", s.sigma0);
  detail::read(j, "sigma1_seconds", s.sigma1);
  detail::read(j, "sigma2_seconds", s.sigma2);
  detail::read(j, "n_samples", s.n_samples);
  if (!(s.sigma0 >= 0.0 && s.sigma1 >= 0.0 && s.sigma2 >= 0.0))
    throw std::invalid_argument("sigma0, sigma1, sigma2 must be >= 0");
  return s;
}

inline json to_json(const PcpConfig& c) {
  return {{"zero_pad_factor", c.zero_pad_factor}, {"psi_sign", c.psi_sign}};
}

/// Only L and sign(psi) are configurable; T_M and K come from the physical block.
inline PcpConfig pcp_from_json(const json& j, const PhysicalParams& p) {
  detail::check_keys(j, {"zero_pad_factor", "psi_sign"}, "pcp");
  PcpConfig c = PcpConfig::for_physical(p);
  detail::read(j, "zero_pad_factor", c.zero_pad_factor);
  detail::read(j, "psi_sign", c.psi_sign);
  c.validate();
  return c;
}

inline json to_json(const GridConfig& g) {
  return {{"beta_min", g.beta.lo},          {"beta_max", g.beta.hi},
          {"beta_closed", g.beta.closed},   {"gamma_min", g.gamma.lo},
          {"gamma_max", g.gamma.hi},        {"gamma_closed", g.gamma.closed},
          {"n_beta", g.n_beta},             {"n_gamma", g.n_gamma}};
}

inline GridConfig grid_from_json(const json& j, GridConfig g = {}) {
  detail::check_keys(j,
                     {"beta_min", "beta_max", "beta_closed", "gamma_min", "gamma_max",
                      "gamma_closed", "n_beta", "n_gamma"},
                     "grid");
  detail::read(j, "beta_min", g.beta.lo);
  detail::read(j, "beta_max", g.beta.hi);
  detail::read(j, "beta_closed", g.beta.closed);
  detail::read(j, "gamma_min", g.gamma.lo);
  detail::read(j, "gamma_max", g.gamma.hi);
  detail::read(j, "gamma_closed", g.gamma.closed);
  detail::read(j, "n_beta", g.n_beta);
  detail::read(j, "n_gamma", g.n_gamma);
  g.validate();
  return g;
}

inline json to_json(const LgsWindow& w) {
  return {{"beta_half_width", w.beta_half_width},
          {"gamma_half_width", w.gamma_half_width},
          {"n_beta", w.n_beta},
          {"n_gamma", w.n_gamma}};
}

inline LgsWindow lgs_from_json(const json& j) {
  detail::check_keys(j, {"beta_half_width", "gamma_half_width", "n_beta", "n_gamma"}, "lgs");
  LgsWindow w;
  detail::read(j, "beta_half_width", w.beta_half_width);
  detail::read(j, "gamma_half_width", w.gamma_half_width);
  detail::read(j, "n_beta", w.n_beta);
  detail::read(j, "n_gamma", w.n_gamma);
  if (!(w.beta_half_width >= 0.0 && w.gamma_half_width >= 0.0) || w.n_beta < 1 || w.n_gamma < 1)
    throw std::invalid_argument("lgs: half widths must be >= 0 and counts >= 1");
  return w;
}

inline json to_json(const EstimateResult& r) {
  return {{"method", to_string(r.method)}, {"params", to_json(r.params)}, {"pmse_s2", r.pmse}};
}

inline json to_json(const CrlbReport& r) {
  return {{"n", r.n_samples},
          {"crlb_rho_m2", r.crlb_rho},
          {"crlb_fd_hz2", r.crlb_fd},
          {"crlb_phi_rad2", r.crlb_phi},
          {"crlb_delta_s2", r.crlb_delta}};
}

// ---- result tables ---------------------------------------------------------

inline void write_crlb_csv(std::ostream& os, const std::vector<CrlbReport>& rows) {
  os << "n,crlb_rho_m2,crlb_fd_hz2,crlb_phi_rad2,crlb_delta_s2\n";
  for (const auto& r : rows)
    os << r.n_samples << ',' << format_double(r.crlb_rho) << ',' << format_double(r.crlb_fd) << ','
       << format_double(r.crlb_phi) << ',' << format_double(r.crlb_delta) << '\n';
}

inline constexpr const char* kRecordsHeader =
    "method,n,rep,seed,rho_err_m,fd_err_hz,phi_err_raw_rad,phi_err_wrapped_rad,failed";
inline constexpr const char* kSummaryHeader =
    "method,n,mse_rho_m2,mse_fd_hz2,mse_phi_rad2,mse_phi_wrapped_rad2,reps_ok";

inline void write_records_csv(std::ostream& os, const std::vector<McRecord>& records) {
  os << kRecordsHeader << '\n';
  for (const auto& r : records)
    os << to_string(r.method) << ',' << r.n_samples << ',' << r.rep << ',' << r.seed << ','
       << format_double(r.rho_err_m) << ',' << format_double(r.fd_err_hz) << ','
       << format_double(r.phi_err_raw_rad) << ',' << format_double(r.phi_err_wrapped_rad) << ','
       << (r.failed ? 1 : 0) << '\n';
}

inline std::vector<McRecord> read_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kRecordsHeader)
    throw std::invalid_argument(std::string("records CSV header must be '") + kRecordsHeader + "'");
  std::vector<McRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 9) throw std::invalid_argument("records CSV rows need 9 columns: " + line);
    McRecord r;
    r.method = method_from_string(c[0]);
    r.n_samples = std::stoull(c[1]);
    r.rep = std::stoull(c[2]);
    r.seed = std::stoull(c[3]);
    r.rho_err_m = parse_double(c[4]);
    r.fd_err_hz = parse_double(c[5]);
    r.phi_err_raw_rad = parse_double(c[6]);
    r.phi_err_wrapped_rad = parse_double(c[7]);
    r.failed = c[8] == "1";
    out.push_back(r);
  }
  return out;
}

inline void write_summary_csv(std::ostream& os, const std::vector<McSummaryRow>& rows) {
  os << kSummaryHeader << '\n';
  for (const auto& r : rows)
    os << to_string(r.method) << ',' << r.n_samples << ',' << format_double(r.mse_rho_m2) << ','
       << format_double(r.mse_fd_hz2) << ',' << format_double(r.mse_phi_rad2) << ','
       << format_double(r.mse_phi_wrapped_rad2) << ',' << r.reps_ok << '\n';
}

/// CRLB rows in the summary schema, method "CRLB". The phase bound fills
/// both phase columns; reps_ok is 0.
inline void write_crlb_overlay_csv(std::ostream& os, const std::vector<CrlbReport>& rows) {
  os << kSummaryHeader << '\n';
  for (const auto& r : rows)
    os << "CRLB," << r.n_samples << ',' << format_double(r.crlb_rho) << ','
       << format_double(r.crlb_fd) << ',' << format_double(r.crlb_phi) << ','
       << format_double(r.crlb_phi) << ",0\n";
}

inline void write_surface_csv(std::ostream& os, const PmseSurface& s) {
  os << "beta,gamma,pmse,is_argmin\n";
  for (std::size_t i = 0; i < s.betas.size(); ++i)
    for (std::size_t j = 0; j < s.gammas.size(); ++j) {
      const std::size_t idx = i * s.gammas.size() + j;
      os << format_double(s.betas[i]) << ',' << format_double(s.gammas[j]) << ','
         << format_double(s.values[idx]) << ',' << (idx == s.argmin ? 1 : 0) << '\n';
    }
}

}  // namespace sawtooth::io
