// Thin RAII layer over FFTW for the transforms the estimators need.
#pragma once

#include <fftw3.h>

#include <complex>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace sawtooth::fft {

namespace detail {

// The FFTW planner is not thread-safe; execution is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {
    if (!plan_) throw std::runtime_error("FFTW plan creation failed");
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

inline fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

/// Unnormalized DFT of a real sequence; returns bins 0..n/2.
inline std::vector<std::complex<double>> real_forward(std::span<const double> in) {
  const int n = static_cast<int>(in.size());
  std::vector<double> buf(in.begin(), in.end());
  std::vector<std::complex<double>> out(in.size() / 2 + 1);
  std::unique_ptr<detail::Plan> plan;
  {
    std::lock_guard lock(detail::planner_mutex());
    plan = std::make_unique<detail::Plan>(fftw_plan_dft_r2c_1d(
        n, buf.data(), detail::as_fftw(out.data()), FFTW_ESTIMATE | FFTW_UNALIGNED));
  }
  plan->execute();
  return out;
}

/// Unnormalized complex DFT. sign = FFTW_FORWARD (-1) or FFTW_BACKWARD (+1).
inline std::vector<std::complex<double>> complex_transform(std::span<const std::complex<double>> in,
                                                           int sign) {
  const int n = static_cast<int>(in.size());
  std::vector<std::complex<double>> buf(in.begin(), in.end());
  std::vector<std::complex<double>> out(in.size());
  std::unique_ptr<detail::Plan> plan;
  {
    std::lock_guard lock(detail::planner_mutex());
    plan = std::make_unique<detail::Plan>(fftw_plan_dft_1d(n, detail::as_fftw(buf.data()),
                                                           detail::as_fftw(out.data()), sign,
                                                           FFTW_ESTIMATE | FFTW_UNALIGNED));
  }
  plan->execute();
  return out;
}

inline std::vector<std::complex<double>> forward(std::span<const double> in) {
  std::vector<std::complex<double>> c(in.begin(), in.end());
  return complex_transform(c, FFTW_FORWARD);
}

/// Inverse DFT including the 1/n factor.
inline std::vector<std::complex<double>> inverse(std::span<const std::complex<double>> in) {
  auto out = complex_transform(in, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(in.size());
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace sawtooth::fft
