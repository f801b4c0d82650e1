#pragma once

#include <span>
#include <vector>

namespace ratio_forge {

// Periodogram |X_k|^2 of the unnormalized DFT X_k = sum_t x_t exp(-2 pi i k t / T),
// for k = 0..T-1. Backed by FFTW.
std::vector<double> power_spectrum(std::span<const double> x);

}  // namespace ratio_forge
