#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sawtooth/estimators.hpp"
#include "test_support.hpp"

namespace sawtooth {
namespace {

const PhysicalParams kPoint;
const PcpConfig kCfg = PcpConfig::for_physical(kPoint);

std::vector<double> noiseless(const SawtoothParams& s, std::size_t n) {
  return simulate_sawtooth(s, {}, n, 0).samples;
}

// ---- amplitude --------------------------------------------------------------

TEST(AmplitudeFromBeta, Examples) {
  EXPECT_DOUBLE_EQ(amplitude_from_beta(0.0, 10e-9, 10000), -10e-9);
  // -K T_M / (beta + K) evaluated with 40 digits
  EXPECT_NEAR(amplitude_from_beta(7.3e-3, 10e-9, 10000), -9.999992700005328996e-9, 1e-23);
}

TEST(AmplitudeFromBeta, IncreasingInBeta) {
  double prev = amplitude_from_beta(-0.5, 10e-9, 10000);
  for (double b = -0.49; b < 0.5; b += 0.01) {
    const double a = amplitude_from_beta(b, 10e-9, 10000);
    ASSERT_GT(a, prev);
    prev = a;
  }
}

TEST(AmplitudeFromBeta, RejectsPole) {
  EXPECT_THROW(amplitude_from_beta(-10000.0, 1e-8, 10000), std::invalid_argument);
  EXPECT_THROW(amplitude_from_beta(-20000.0, 1e-8, 10000), std::invalid_argument);
  EXPECT_NO_THROW(amplitude_from_beta(-0.5, 1e-8, 1));
}

// ---- periodogram ----------------------------------------------------------

TEST(Periodogram, OnGridFrequencyIsExact) {
  // Without padding a whole number of periods puts the line on a bin.
  const PcpConfig cfg{1, -1, 1e-8, 10000};
  const auto y = noiseless({1e-6, 4.0 / 128.0, 0.0, -1e-8}, 128);
  EXPECT_EQ(periodogram_beta_abs(y, cfg), 0.03125);
}

TEST(Periodogram, PaddedPeakWithinOneFineBin) {
  // The mirrored line and the harmonics leak into the interpolated bins.
  const PcpConfig cfg{4, -1, 1e-8, 10000};
  const auto y = noiseless({1e-6, 16.0 / 512.0, 0.0, -1e-8}, 128);
  EXPECT_LE(std::abs(periodogram_beta_abs(y, cfg) - 0.03125), 1.0 / 512.0 + 1e-15);
}

TEST(Periodogram, OperatingPointWithinOneBin) {
  const auto truth = physical_to_generic(kPoint);
  const auto y = noiseless(truth, 500);

  // Dense PMSE scan over beta (gamma scanned too) confirms the true frequency.
  double best = 1e300, best_beta = 0;
  for (int i = 0; i <= 400; ++i) {
    const double b = 0.0070 + i * 1e-6;
    for (int j = 0; j < 200; ++j) {
      const double v = testing::brute_pmse(y, b, j / 200.0 + truth.gamma - std::floor(j / 200.0 + truth.gamma), implied_amplitude(b, kCfg));
      if (v < best) {
        best = v;
        best_beta = b;
      }
    }
  }
  EXPECT_NEAR(best_beta, 7.3e-3, 1e-6);
  EXPECT_LE(std::abs(periodogram_beta_abs(y, kCfg) - best_beta), 1.0 / 2500.0);
}

TEST(Periodogram, IgnoresConstantOffset) {
  const auto truth = physical_to_generic(kPoint);
  auto y = simulate_sawtooth(truth, NoiseParams::from_snr_db(40, 20, truth.psi), 600, 3).samples;
  const double a = periodogram_beta_abs(y, kCfg);
  for (auto& v : y) v += 1e-3;
  EXPECT_EQ(periodogram_beta_abs(y, kCfg), a);
}

TEST(Periodogram, RejectsConstantAndShortInput) {
  const std::vector<double> flat(100, 5e-6);
  EXPECT_THROW(periodogram_beta_abs(flat, kCfg), EstimationError);
  const std::vector<double> one{1.0};
  EXPECT_THROW(periodogram_beta_abs(one, kCfg), std::invalid_argument);
}

// ---- correlation ------------------------------------------------------------

// Lag maximizing sum_n ref[(n + m) mod P] data[n], by direct summation.
std::size_t brute_force_lag(const std::vector<double>& ref, const std::vector<double>& data) {
  const std::size_t p = ref.size();
  std::size_t best = 0;
  double best_v = -1e300;
  for (std::size_t m = 0; m < p; ++m) {
    double acc = 0;
    for (std::size_t n = 0; n < p; ++n) acc += ref[(n + m) % p] * data[n];
    if (acc > best_v) {
      best_v = acc;
      best = m;
    }
  }
  return best;
}

TEST(CorrelationSignPhase, AlignedAtZeroLag) {
  const auto y = noiseless({5e-6, 0.02, 0.0, -1e-8}, 500);
  const auto sp = correlation_sign_phase(y, 0.02, kCfg);
  EXPECT_EQ(sp.beta, 0.02);
  EXPECT_EQ(sp.lag, 0u);
  EXPECT_EQ(sp.gamma, 0.0);
  EXPECT_GT(sp.peak_plus, sp.peak_minus);
}

TEST(CorrelationSignPhase, HalfCyclePhase) {
  const auto y = noiseless({5e-6, 0.02, 0.5, -1e-8}, 500);
  const auto sp = correlation_sign_phase(y, 0.02, kCfg);
  const std::size_t period = 50;
  EXPECT_EQ(sp.beta, 0.02);
  EXPECT_NEAR(sp.gamma, 0.5, 1.0 / period);

  // Same lag by direct summation over all circular lags.
  std::vector<double> ref(period), data(y.begin(), y.begin() + period);
  for (std::size_t i = 0; i < period; ++i) ref[i] = -mod1(0.02 * i);
  const double m = std::accumulate(data.begin(), data.end(), 0.0) / period;
  const double mr = std::accumulate(ref.begin(), ref.end(), 0.0) / period;
  for (auto& v : data) v -= m;
  for (auto& v : ref) v -= mr;
  EXPECT_EQ(sp.lag, brute_force_lag(ref, data));
}

TEST(CorrelationSignPhase, MirroredFrequency) {
  for (double g : {0.0, 0.3, 0.8}) {
    const auto pos = correlation_sign_phase(noiseless({5e-6, 0.02, g, -1e-8}, 500), 0.02, kCfg);
    const auto neg = correlation_sign_phase(noiseless({5e-6, -0.02, g, -1e-8}, 500), 0.02, kCfg);
    EXPECT_EQ(pos.beta, 0.02);
    EXPECT_EQ(neg.beta, -0.02);
    EXPECT_NEAR(neg.peak_minus, pos.peak_plus, 1e-9);
  }
}

TEST(CorrelationSignPhase, RejectsUnobservablePeriod) {
  const auto y = noiseless({5e-6, 0.02, 0.0, -1e-8}, 30);
  EXPECT_THROW(correlation_sign_phase(y, 0.02, kCfg), EstimationError);  // P = 50 > N
  EXPECT_THROW(correlation_sign_phase(y, 0.6, kCfg), EstimationError);   // P = 1
  EXPECT_THROW(correlation_sign_phase(y, 0.0, kCfg), std::invalid_argument);
}

// ---- concentrated offset ------------------------------------------------------

TEST(ConcentratedAlpha, ExactOnNoiselessData) {
  const auto truth = physical_to_generic(kPoint);
  const auto y = noiseless(truth, 500);
  EXPECT_NEAR(concentrated_alpha(y, truth.beta, truth.gamma, truth.psi) / truth.alpha, 1.0, 1e-12);
}

TEST(ConcentratedAlpha, DirectEvaluation) {
  const std::vector<double> y(4, 0.0);
  EXPECT_DOUBLE_EQ(concentrated_alpha(y, 0.25, 0.0, 1.0), -0.375);
}

TEST(ConcentratedAlpha, MatchesLineSearchOracle) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 20 + static_cast<std::size_t>(u(gen) * 300);
    std::vector<double> y(n);
    for (auto& v : y) v = 3.0 + u(gen);
    const double beta = u(gen) - 0.5, gamma = u(gen), psi = 2.0 * u(gen) - 1.0;
    auto sse = [&](double a) {
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = beta * i + gamma;
        const double r = y[i] - a - psi * (x - std::floor(x));
        acc += r * r;
      }
      return acc;
    };
    // bisection on the sign of d sse / d alpha
    auto slope = [&](double a) {
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = beta * i + gamma;
        acc -= y[i] - a - psi * (x - std::floor(x));
      }
      return acc;
    };
    double lo = 0.0, hi = 6.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = (lo + hi) / 2;
      (slope(mid) < 0 ? lo : hi) = mid;
    }
    const double oracle = (lo + hi) / 2;
    const double got = concentrated_alpha(y, beta, gamma, psi);
    ASSERT_NEAR(got / oracle, 1.0, 1e-10);
    ASSERT_LT(sse(got), sse(got + 1e-4));
    ASSERT_LT(sse(got), sse(got - 1e-4));
  }
}

// ---- PMSE -------------------------------------------------------------------

TEST(Pmse, ZeroAtTruthOnNoiselessData) {
  const auto truth = physical_to_generic(kPoint);
  const auto y = noiseless(truth, 500);
  EXPECT_LE(pmse(y, truth.beta, truth.gamma, kCfg), 1e-20);
}

TEST(Pmse, NonNegativeAndNearNoiseFloor) {
  const auto truth = physical_to_generic(kPoint);
  const auto noise = NoiseParams::from_snr_db(40, 20, truth.psi);
  const auto y = simulate_sawtooth(truth, noise, 2000, 12).samples;
  const double v = pmse(y, truth.beta, truth.gamma, kCfg);
  EXPECT_GE(v, 0.0);
  const double floor = noise.sigma_w * noise.sigma_w + truth.psi * truth.psi * noise.sigma_v * noise.sigma_v;
  // wrap flips add psi^2-sized outliers on a few percent of the samples
  EXPECT_GT(v, 0.8 * floor);
  EXPECT_LT(v, 0.05 * truth.psi * truth.psi + floor);
}

TEST(Pmse, GammaWrapInvariance) {
  const auto truth = physical_to_generic(kPoint);
  const auto y = simulate_sawtooth(truth, NoiseParams::from_snr_db(40, 20, truth.psi), 500, 2).samples;
  for (double g : {0.0, 0.125, 0.37, 0.9}) {
    const double a = pmse(y, 0.0071, g, kCfg);
    EXPECT_NEAR(pmse(y, 0.0071, g + 1.0, kCfg), a, 1e-12 * a);
    EXPECT_NEAR(pmse(y, 0.0071, g - 3.0, kCfg), a, 1e-12 * a);
  }
}

TEST(Pmse, AgreesWithDefinition) {
  const auto truth = physical_to_generic(kPoint);
  const auto y = simulate_sawtooth(truth, NoiseParams::from_snr_db(40, 20, truth.psi), 700, 4).samples;
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double b = 0.02 * u(gen), g = u(gen);
    const double want = testing::brute_pmse(y, b, g, implied_amplitude(b, kCfg));
    EXPECT_NEAR(pmse(y, b, g, kCfg), want, 1e-9 * want);
  }
}

TEST(PmseRowEvaluator, MatchesDirectEvaluation) {
  const auto truth = physical_to_generic(kPoint);
  const auto y = simulate_sawtooth(truth, NoiseParams::from_snr_db(40, 20, truth.psi), 900, 6).samples;
  PmseRowEvaluator rows(y);
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> gammas(64), out(64);
  for (int t = 0; t < 50; ++t) {
    const double b = (u(gen) - 0.5) * 0.1;
    for (auto& g : gammas) g = u(gen);
    gammas[0] = 0.0;
    rows.evaluate(b, implied_amplitude(b, kCfg), gammas, out);
    for (std::size_t j = 0; j < gammas.size(); ++j) {
      const double want = pmse(y, b, gammas[j], kCfg);
      ASSERT_NEAR(out[j], want, 1e-9 * want) << b << " " << gammas[j];
    }
  }
}

TEST(PmseRowEvaluator, ZeroAtTruthOnNoiselessData) {
  const auto truth = physical_to_generic(kPoint);
  const auto y = noiseless(truth, 500);
  PmseRowEvaluator rows(y);
  const std::vector<double> g{truth.gamma};
  std::vector<double> out(1);
  rows.evaluate(truth.beta, implied_amplitude(truth.beta, kCfg), g, out);
  EXPECT_LE(out[0], 1e-20);
}

// ---- PCP --------------------------------------------------------------------

TEST(Pcp, NoiselessOnGridRecovery) {
  const PcpConfig cfg{1, -1, 1e-8, 10000};
  const double beta = 4.0 / 128.0;
  for (double g : {0.0, 0.25, 0.6}) {
    const SawtoothParams truth{5e-6, beta, g, amplitude_from_beta(beta, 1e-8, 10000)};
    const auto est = pcp_estimate(noiseless(truth, 128), cfg);
    EXPECT_EQ(est.params.beta, beta);
    EXPECT_NEAR(est.params.gamma, g, 1.0 / 32.0);
    EXPECT_GE(est.params.gamma, 0.0);
    EXPECT_LT(est.params.gamma, 1.0);
    EXPECT_EQ(est.method, Method::pcp);
    if (g == 0.0 || g == 0.25) {
      // gamma on the lag grid: the fit is exact
      EXPECT_EQ(est.params.gamma, g);
      EXPECT_NEAR(est.params.alpha / truth.alpha, 1.0, 1e-12);
      EXPECT_LE(est.pmse, 1e-20);
    }
  }
}

TEST(Pcp, ShiftEquivariantInOffset) {
  const auto truth = physical_to_generic(kPoint);
  auto y = simulate_sawtooth(truth, NoiseParams::from_snr_db(40, 20, truth.psi), 1000, 21).samples;
  const auto a = pcp_estimate(y, kCfg);
  for (auto& v : y) v += 2.5e-7;
  const auto b = pcp_estimate(y, kCfg);
  EXPECT_EQ(a.params.beta, b.params.beta);
  EXPECT_EQ(a.params.gamma, b.params.gamma);
  EXPECT_NEAR(b.params.alpha - a.params.alpha, 2.5e-7, 1e-18);
}

TEST(Pcp, MisdeclaredAmplitudeSignFlipsFrequencySign) {
  // Data generated with psi > 0 but estimated assuming psi < 0: the mirrored
  // reference ramp wins the correlation.
  const double beta = 0.0073;
  const SawtoothParams flipped{5e-6, beta, 0.2, 1e-8};
  const auto y = noiseless(flipped, 1000);
  const auto est = pcp_estimate(y, kCfg);
  EXPECT_LT(est.params.beta, 0.0);

  PcpConfig right = kCfg;
  right.psi_sign = +1;
  EXPECT_GT(pcp_estimate(y, right).params.beta, 0.0);
}

// ---- grid search ------------------------------------------------------------

TEST(GridSearch, FindsTruthOnGrid) {
  const double beta = 0.0075, gamma = 0.25;
  const SawtoothParams truth{5e-6, beta, gamma, implied_amplitude(beta, kCfg)};
  const auto y = noiseless(truth, 500);
  // betas 0.0070 + 0.0001 i, gammas 0.05 j
  const GridConfig grid{{0.0070, 0.0080, true}, {0.0, 1.0, false}, 11, 20};
  const auto est = grid_search_estimate(y, grid, kCfg);
  EXPECT_NEAR(est.params.beta, beta, 1e-15);
  EXPECT_NEAR(est.params.gamma, gamma, 1e-15);
  EXPECT_LE(est.pmse, 1e-20);
  EXPECT_NEAR(est.params.alpha / truth.alpha, 1.0, 1e-12);
  EXPECT_EQ(est.method, Method::ggs);
}

TEST(GridSearch, SinglePoint) {
  const auto y = noiseless(physical_to_generic(kPoint), 300);
  const GridConfig grid{{0.004, 0.004, true}, {0.9, 0.9, true}, 1, 1};
  const auto est = grid_search_estimate(y, grid, kCfg, Method::lgs);
  EXPECT_EQ(est.params.beta, 0.004);
  EXPECT_EQ(est.params.gamma, 0.9);
  EXPECT_EQ(est.method, Method::lgs);
  EXPECT_NEAR(est.pmse, pmse(y, 0.004, 0.9, kCfg), 1e-30);
}

TEST(GridSearch, MinimalOverExhaustiveRecheck) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto truth = physical_to_generic(kPoint);
  for (int t = 0; t < 30; ++t) {
    const auto y = simulate_sawtooth(truth, NoiseParams::from_snr_db(40, 20, truth.psi), 300, 100 + t).samples;
    const double b0 = 0.02 * u(gen), g0 = u(gen);
    const GridConfig grid{{b0, b0 + 0.01 * u(gen), true}, {g0, g0 + u(gen), t % 2 == 0}, 10, 10};
    const auto est = grid_search_estimate(y, grid, kCfg);
    double best = 1e300;
    for (double b : grid.betas())
      for (double g : grid.gammas()) best = std::min(best, pmse(y, b, g, kCfg));
    ASSERT_LE(est.pmse, best * (1 + 1e-9));
  }
}

TEST(GridSearch, TiesGoToSmallestWrappedGamma) {
  // beta = 0 makes the ramp constant, so every gamma has the same PMSE.
  std::vector<double> y{1.0, 2.0, 0.5, 3.0};
  const GridConfig grid{{0.0, 0.0, true}, {0.5, 1.5, false}, 1, 4};  // 0.5, 0.75, 0, 0.25
  const auto est = grid_search_estimate(y, grid, kCfg);
  EXPECT_EQ(est.params.gamma, 0.0);
}

TEST(GridSearch, RejectsPoleInBetaRange) {
  const std::vector<double> y{1.0, 2.0, 3.0};
  const GridConfig grid{{-2e4, 0.0, true}, {0.0, 1.0, false}, 3, 3};
  EXPECT_THROW(grid_search_estimate(y, grid, kCfg), std::invalid_argument);
  const GridConfig empty{{0.0, 0.1, true}, {0.5, 0.5, false}, 3, 3};
  EXPECT_THROW(grid_search_estimate(y, empty, kCfg), std::invalid_argument);
}

TEST(GridSearch, LgsNeverWorseThanPcpOnNoiselessData) {
  const auto truth = physical_to_generic(kPoint);
  for (std::size_t n : {500u, 1000u, 1500u}) {
    const auto y = noiseless(truth, n);
    const auto pcp = pcp_estimate(y, kCfg);
    const auto lgs = lgs_estimate(y, pcp, LgsWindow{}, kCfg);
    EXPECT_LE(lgs.pmse, pcp.pmse) << n;
    EXPECT_NEAR(lgs.params.beta, truth.beta, 1.1e-5);
  }
}

TEST(GridConfig, RangePoints) {
  const auto closed = Range{0.0, 1.0, true}.points(5);
  EXPECT_EQ(closed, (std::vector<double>{0, 0.25, 0.5, 0.75, 1.0}));
  const auto open = Range{0.0, 1.0, false}.points(4);
  EXPECT_EQ(open, (std::vector<double>{0, 0.25, 0.5, 0.75}));
  const GridConfig wrap{{0, 0, true}, {-0.25, 0.25, true}, 1, 3};
  EXPECT_EQ(wrap.gammas(), (std::vector<double>{0.75, 0.0, 0.25}));
}

TEST(PmseSurface, ArgminConsistentWithGridSearch) {
  const auto truth = physical_to_generic(kPoint);
  const auto y = simulate_sawtooth(truth, NoiseParams::from_snr_db(40, 20, truth.psi), 500, 1).samples;
  const GridConfig grid{{0.0, 1e-2, true}, {0.0, 1.0, false}, 101, 100};
  const auto surface = pmse_surface(y, grid, kCfg);
  const auto est = grid_search_estimate(y, grid, kCfg);
  EXPECT_EQ(surface.values.size(), 101u * 100u);
  EXPECT_EQ(surface.argmin_beta(), est.params.beta);
  EXPECT_EQ(surface.argmin_gamma(), est.params.gamma);
  EXPECT_EQ(*std::min_element(surface.values.begin(), surface.values.end()),
            surface.values[surface.argmin]);
}

}  // namespace
}  // namespace sawtooth
