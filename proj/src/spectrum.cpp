#include "ratio_forge/spectrum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <memory>
#include <mutex>

namespace ratio_forge {

namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

std::vector<double> power_spectrum(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> power(n, 0.0);
  if (n == 0) return power;

  const std::size_t bins = n / 2 + 1;
  std::unique_ptr<double, FftwDeleter> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, FftwDeleter> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));

  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  }
  std::copy(x.begin(), x.end(), in.get());
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  // Real input: X_{n-k} = conj(X_k).
  for (std::size_t k = 0; k < bins; ++k) {
    const double re = out.get()[k][0];
    const double im = out.get()[k][1];
    power[k] = re * re + im * im;
    if (k != 0 && n - k != k) power[n - k] = power[k];
  }
  return power;
}

}  // namespace ratio_forge
