#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace gcnn::dsp {

/// In-place iterative radix-2 FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& x, bool inverse);

std::size_t next_pow2(std::size_t n);

/// Symmetric Hamming window of length n.
std::vector<double> hamming(std::size_t n);

/// Periodic Hann window of length n.
std::vector<double> hann_periodic(std::size_t n);

}  // namespace gcnn::dsp
