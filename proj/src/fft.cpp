#include "cicoder/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "cicoder/error.hpp"

namespace cicoder {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw Error("fft: size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles computed directly rather than by recurrence to keep rounding
      // independent of transform size.
      const std::complex<double> w(std::cos(angle * k), std::sin(angle * k));
      for (std::size_t i = 0; i < n; i += len) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

std::vector<std::complex<double>> rfft(std::span<const double> input, std::size_t n) {
  std::vector<std::complex<double>> buf(n);
  const std::size_t m = std::min(n, input.size());
  for (std::size_t i = 0; i < m; ++i) buf[i] = input[i];
  fft_inplace(buf);
  buf.resize(n / 2 + 1);
  return buf;
}

}  // namespace cicoder
