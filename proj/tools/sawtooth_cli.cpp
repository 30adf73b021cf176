// sawtooth: simulate, estimate, crlb, montecarlo and pmse-surface over JSON
// configs and CSV artifacts.
//
// Exit codes: 0 ok, 1 I/O failure, 2 invalid configuration,
// 3 estimator failure (or failure rate exceeded).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sawtooth/crlb.hpp"
#include "sawtooth/estimators.hpp"
#include "sawtooth/evaluation.hpp"
#include "sawtooth/io.hpp"
#include "sawtooth/signal_model.hpp"

namespace fs = std::filesystem;
using sawtooth::io::json;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitEstimator = 3;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kConfigKeys = R"(Config keys (JSON, all optional; defaults reproduce the reference operating point):
  model                 simulate/pmse-surface: "physical" | "generic" | "unwrapped"
  physical              {delta0_seconds, t_master_seconds, f_d_hz, phi_s_rad, rho_m,
                         c_m_per_s, k_factor}
  generic               {alpha_seconds, beta [cycles/sample], gamma [cycles], psi_seconds}
  unwrapped             {alpha_tilde_seconds, beta_tilde_seconds, sigma0_seconds,
                         sigma1_seconds, sigma2_seconds, n_samples}
  noise                 {sigma_v [cycles], sigma_w_seconds} or {snr_in_db, snr_out_db}
  n_samples             trace length N
  seed                  RNG seed (simulate, pmse-surface)
  trace_csv             estimate: input trace with header n,y_seconds
  method                estimate: "PCP" | "LGS" | "GGS"
  pcp                   {zero_pad_factor, psi_sign}
  lgs                   {beta_half_width [cycles/sample], gamma_half_width [cycles],
                         n_beta, n_gamma}
  grid                  GGS and pmse-surface grid: {beta_min, beta_max, beta_closed,
                         gamma_min, gamma_max, gamma_closed, n_beta, n_gamma}
  n_grid                crlb/montecarlo: strictly increasing sample sizes
  repetitions           montecarlo repetitions per N
  base_seed             montecarlo base seed
  methods               montecarlo: subset of ["PCP", "LGS", "GGS"]
  crlb_overlay          montecarlo: also write crlb_overlay.csv (bool)
  max_failure_rate      montecarlo: tolerated share of failed repetitions per cell
)";

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::optional<std::string> method;
  std::string trace_path;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config '" + path + "' is not valid JSON: " + e.what());
  }
  sawtooth::io::detail::check_keys(
      j,
      {"model", "physical", "generic", "unwrapped", "noise", "n_samples", "seed", "trace_csv",
       "method", "pcp", "lgs", "grid", "n_grid", "repetitions", "base_seed", "methods",
       "crlb_overlay", "max_failure_rate"},
      "config");
  return j;
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  T out = fallback;
  sawtooth::io::detail::read(j, key, out);
  return out;
}

json sub(const json& j, const char* key) { return j.contains(key) ? j.at(key) : json::object(); }

std::ofstream open_out(const Options& opt, const std::string& name) {
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  const fs::path path = fs::path(opt.out_dir) / name;
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  return os;
}

void finish(std::ofstream& os, const std::string& name) {
  os.flush();
  if (!os) throw IoError("write to '" + name + "' failed");
}

void echo_config(const Options& opt, const std::string& command, const json& resolved) {
  auto os = open_out(opt, command + "_config.json");
  os << resolved.dump(2) << '\n';
  finish(os, command + "_config.json");
}

std::vector<std::size_t> n_grid_from(const json& cfg, const Options& opt,
                                     std::vector<std::size_t> fallback) {
  if (opt.n) return {*opt.n};
  return value_or(cfg, "n_grid", fallback);
}

// A trace generated per the config's model block, plus the resolved blocks.
struct Simulation {
  sawtooth::RttTrace trace;
  json resolved;
  json echo;
};

Simulation simulate_from(const json& cfg, const Options& opt) {
  const std::string model = value_or<std::string>(cfg, "model", "physical");
  const std::size_t n = opt.n.value_or(value_or<std::size_t>(cfg, "n_samples", 500));
  const std::uint64_t seed = opt.seed.value_or(value_or<std::uint64_t>(cfg, "seed", 1));

  Simulation sim;
  sim.resolved = {{"model", model}, {"n_samples", n}, {"seed", seed}};
  if (model == "physical" || model == "generic") {
    sawtooth::SawtoothParams generic;
    if (model == "physical") {
      const auto p = sawtooth::io::physical_from_json(sub(cfg, "physical"));
      generic = sawtooth::physical_to_generic(p);
      sim.resolved["physical"] = sawtooth::io::to_json(p);
    } else {
      generic = sawtooth::io::generic_from_json(sub(cfg, "generic"));
    }
    json noise_cfg = cfg.contains("noise") ? cfg.at("noise") : json{{"snr_in_db", 40.0}, {"snr_out_db", 20.0}};
    const auto noise = sawtooth::io::noise_from_json(noise_cfg, generic.psi);
    sim.trace = sawtooth::simulate_sawtooth(generic, noise, n, seed);
    sim.resolved["generic"] = sawtooth::io::to_json(generic);
    sim.resolved["noise"] = sawtooth::io::to_json(noise);
    sim.echo = sawtooth::io::to_json(generic);
  } else if (model == "unwrapped") {
    auto spec = sawtooth::io::unwrapped_from_json(sub(cfg, "unwrapped"));
    if (opt.n || cfg.contains("n_samples")) spec.n_samples = n;
    sim.trace = sawtooth::simulate_unwrapped(spec, seed);
    sim.resolved["unwrapped"] = sawtooth::io::to_json(spec);
    sim.resolved["n_samples"] = spec.n_samples;
    sim.echo = sawtooth::io::to_json(spec);
  } else {
    throw std::invalid_argument("model must be 'physical', 'generic' or 'unwrapped'");
  }
  return sim;
}

int cmd_simulate(const Options& opt) {
  const json cfg = load_config(opt.config_path);
  const Simulation sim = simulate_from(cfg, opt);
  auto os = open_out(opt, "trace.csv");
  sawtooth::io::write_trace_csv(os, sim.trace);
  finish(os, "trace.csv");
  echo_config(opt, "simulate", sim.resolved);
  std::cout << sim.echo.dump(2) << '\n';
  return 0;
}

int cmd_estimate(const Options& opt) {
  const json cfg = load_config(opt.config_path);
  const std::string trace_path =
      opt.trace_path.empty() ? value_or<std::string>(cfg, "trace_csv", "") : opt.trace_path;
  if (trace_path.empty()) throw std::invalid_argument("estimate needs --trace or trace_csv");
  const auto method =
      sawtooth::method_from_string(opt.method.value_or(value_or<std::string>(cfg, "method", "LGS")));
  const auto p = sawtooth::io::physical_from_json(sub(cfg, "physical"));
  const auto pcp = sawtooth::io::pcp_from_json(sub(cfg, "pcp"), p);
  const auto lgs = sawtooth::io::lgs_from_json(sub(cfg, "lgs"));
  const auto grid = sawtooth::io::grid_from_json(sub(cfg, "grid"));

  std::ifstream in(trace_path);
  if (!in) throw IoError("cannot open trace '" + trace_path + "'");
  const auto trace = sawtooth::io::read_trace_csv(in);

  sawtooth::EstimateResult est;
  switch (method) {
    case sawtooth::Method::pcp: est = sawtooth::pcp_estimate(trace.view(), pcp); break;
    case sawtooth::Method::lgs: est = sawtooth::lgs_estimate(trace.view(), lgs, pcp); break;
    case sawtooth::Method::ggs:
      est = sawtooth::grid_search_estimate(trace.view(), grid, pcp, sawtooth::Method::ggs);
      break;
  }
  const auto rec = sawtooth::generic_to_physical(est.params, p.delta0, p.t_master, p.k_factor, p.c);

  json out = sawtooth::io::to_json(est);
  out["physical"] = {{"rho_m", rec.physical.rho},
                     {"f_d_hz", rec.physical.f_d},
                     {"phi_s_rad", rec.physical.phi_s}};
  out["negative_range"] = rec.negative_range;
  out["n_samples"] = trace.size();

  auto os = open_out(opt, "estimate.json");
  os << out.dump(2) << '\n';
  finish(os, "estimate.json");
  echo_config(opt, "estimate",
              {{"trace_csv", trace_path},
               {"method", sawtooth::to_string(method)},
               {"physical", sawtooth::io::to_json(p)},
               {"pcp", sawtooth::io::to_json(pcp)},
               {"lgs", sawtooth::io::to_json(lgs)},
               {"grid", sawtooth::io::to_json(grid)}});
  std::cout << out.dump(2) << '\n';
  return 0;
}

std::vector<std::size_t> default_crlb_grid() {
  std::vector<std::size_t> g;
  for (std::size_t n = 100; n <= 2000; n += 100) g.push_back(n);
  return g;
}

int cmd_crlb(const Options& opt) {
  const json cfg = load_config(opt.config_path);
  sawtooth::McConfig mc;
  mc.physical = sawtooth::io::physical_from_json(sub(cfg, "physical"));
  json noise_cfg = cfg.contains("noise") ? cfg.at("noise") : json{{"snr_in_db", 40.0}, {"snr_out_db", 20.0}};
  mc.noise = sawtooth::io::noise_from_json(noise_cfg, -mc.physical.slave_period());
  mc.n_grid = n_grid_from(cfg, opt, default_crlb_grid());
  mc.pcp = sawtooth::PcpConfig::for_physical(mc.physical);
  mc.validate();

  const auto rows = sawtooth::crlb_overlay(mc);
  auto os = open_out(opt, "crlb.csv");
  sawtooth::io::write_crlb_csv(os, rows);
  finish(os, "crlb.csv");
  echo_config(opt, "crlb",
              {{"physical", sawtooth::io::to_json(mc.physical)},
               {"noise", sawtooth::io::to_json(mc.noise)},
               {"n_grid", mc.n_grid}});
  return 0;
}

int cmd_montecarlo(const Options& opt) {
  const json cfg = load_config(opt.config_path);
  sawtooth::McConfig mc;
  mc.physical = sawtooth::io::physical_from_json(sub(cfg, "physical"));
  json noise_cfg = cfg.contains("noise") ? cfg.at("noise") : json{{"snr_in_db", 40.0}, {"snr_out_db", 20.0}};
  mc.noise = sawtooth::io::noise_from_json(noise_cfg, -mc.physical.slave_period());
  mc.n_grid = n_grid_from(cfg, opt, mc.n_grid);
  mc.repetitions = value_or(cfg, "repetitions", mc.repetitions);
  mc.base_seed = opt.seed.value_or(value_or(cfg, "base_seed", mc.base_seed));
  mc.max_failure_rate = value_or(cfg, "max_failure_rate", mc.max_failure_rate);
  if (opt.method) {
    mc.methods = {sawtooth::method_from_string(*opt.method)};
  } else if (cfg.contains("methods")) {
    mc.methods.clear();
    for (const auto& m : value_or<std::vector<std::string>>(cfg, "methods", {}))
      mc.methods.push_back(sawtooth::method_from_string(m));
  }
  mc.pcp = sawtooth::io::pcp_from_json(sub(cfg, "pcp"), mc.physical);
  mc.lgs = sawtooth::io::lgs_from_json(sub(cfg, "lgs"));
  mc.ggs = sawtooth::io::grid_from_json(sub(cfg, "grid"));
  const bool overlay = value_or(cfg, "crlb_overlay", true);
  mc.validate();

  std::vector<std::string> method_names;
  for (auto m : mc.methods) method_names.push_back(sawtooth::to_string(m));
  echo_config(opt, "montecarlo",
              {{"physical", sawtooth::io::to_json(mc.physical)},
               {"noise", sawtooth::io::to_json(mc.noise)},
               {"n_grid", mc.n_grid},
               {"repetitions", mc.repetitions},
               {"base_seed", mc.base_seed},
               {"methods", method_names},
               {"pcp", sawtooth::io::to_json(mc.pcp)},
               {"lgs", sawtooth::io::to_json(mc.lgs)},
               {"grid", sawtooth::io::to_json(mc.ggs)},
               {"crlb_overlay", overlay},
               {"max_failure_rate", mc.max_failure_rate}});

  auto write = [&](const sawtooth::McResult& result) {
    auto rec = open_out(opt, "records.csv");
    sawtooth::io::write_records_csv(rec, result.records);
    finish(rec, "records.csv");
    auto sum = open_out(opt, "summary.csv");
    sawtooth::io::write_summary_csv(sum, result.summary);
    finish(sum, "summary.csv");
    if (overlay) {
      auto os = open_out(opt, "crlb_overlay.csv");
      sawtooth::io::write_crlb_overlay_csv(os, sawtooth::crlb_overlay(mc));
      finish(os, "crlb_overlay.csv");
    }
  };

  try {
    write(sawtooth::run_monte_carlo(mc));
  } catch (const sawtooth::FailureRateExceeded& e) {
    write(e.result());
    std::cerr << "error: " << e.what() << '\n';
    return kExitEstimator;
  }
  return 0;
}

int cmd_pmse_surface(const Options& opt) {
  const json cfg = load_config(opt.config_path);
  const Simulation sim = simulate_from(cfg, opt);
  if (sim.trace.origin != sawtooth::TraceOrigin::wrapped)
    throw std::invalid_argument("pmse-surface needs a physical or generic model");
  const auto p = sawtooth::io::physical_from_json(sub(cfg, "physical"));
  const auto pcp = sawtooth::io::pcp_from_json(sub(cfg, "pcp"), p);
  sawtooth::GridConfig fig_grid;
  fig_grid.beta = {0.0, 1e-2, true};
  const auto grid = sawtooth::io::grid_from_json(sub(cfg, "grid"), fig_grid);

  const auto surface = sawtooth::pmse_surface(sim.trace.view(), grid, pcp);
  auto os = open_out(opt, "surface.csv");
  sawtooth::io::write_surface_csv(os, surface);
  finish(os, "surface.csv");

  json resolved = sim.resolved;
  resolved["physical"] = sawtooth::io::to_json(p);
  resolved["pcp"] = sawtooth::io::to_json(pcp);
  resolved["grid"] = sawtooth::io::to_json(grid);
  echo_config(opt, "pmse-surface", resolved);
  std::cout << json{{"argmin_beta", surface.argmin_beta()},
                    {"argmin_gamma", surface.argmin_gamma()},
                    {"argmin_pmse_s2", surface.values[surface.argmin]}}
                   .dump(2)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sawtooth RTT simulation, estimation and bound analysis"};
  app.footer(kConfigKeys);
  app.require_subcommand(1, 1);

  Options opt;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::string method;
  app.add_option("--config", opt.config_path, "JSON config file");
  app.add_option("--out", opt.out_dir, "Output directory (created if missing)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the seed (u64)");
  auto* n_opt = app.add_option("--n", n, "Override the sample size");
  auto* method_opt = app.add_option("--method", method, "Override the method (PCP, LGS, GGS)");
  app.fallthrough();

  auto* simulate = app.add_subcommand("simulate", "Simulate a trace -> trace.csv");
  auto* estimate = app.add_subcommand("estimate", "Estimate parameters from a trace -> estimate.json");
  estimate->add_option("--trace", opt.trace_path, "Trace CSV (n,y_seconds)");
  auto* crlb = app.add_subcommand("crlb", "Unwrapped-model CRLBs over an N grid -> crlb.csv");
  auto* montecarlo = app.add_subcommand(
      "montecarlo", "Monte Carlo MSE sweep -> records.csv, summary.csv, crlb_overlay.csv");
  auto* surface = app.add_subcommand("pmse-surface", "PMSE over a (beta, gamma) grid -> surface.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (*seed_opt) opt.seed = seed;
  if (*n_opt) opt.n = n;
  if (*method_opt) opt.method = method;

  try {
    if (*simulate) return cmd_simulate(opt);
    if (*estimate) return cmd_estimate(opt);
    if (*crlb) return cmd_crlb(opt);
    if (*montecarlo) return cmd_montecarlo(opt);
    if (*surface) return cmd_pmse_surface(opt);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const sawtooth::EstimationError& e) {
    std::cerr << "estimation failed: " << e.what() << '\n';
    return kExitEstimator;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
