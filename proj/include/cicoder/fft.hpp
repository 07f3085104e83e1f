#pragma once

#include <complex>
#include <span>
#include <vector>

namespace cicoder {

// In-place iterative radix-2 FFT. Size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& data);

// Returns bins 0..n/2 of the DFT of `input` zero-padded (or truncated) to n.
std::vector<std::complex<double>> rfft(std::span<const double> input,
                                       std::size_t n);

bool is_power_of_two(std::size_t n);

}  // namespace cicoder
