#ifndef CWELD_FFT_HPP_
#define CWELD_FFT_HPP_

#include <span>
#include <vector>

#include "cweld/common.hpp"

// Thin RAII layer over FFTW. Plans are created once per (kind, shape) under a
// mutex and executed with the new-array interface, so every function here is
// safe to call from concurrent workers.
//
// Sign conventions (all transforms unnormalized):
//   forward:  X[k] = sum_i x[i] exp(-2 pi i k i / n)
//   backward: x[i] = sum_k X[k] exp(+2 pi i k i / n)
namespace cweld::fft {

void forward(std::span<const Complex> in, std::span<Complex> out);
void backward(std::span<const Complex> in, std::span<Complex> out);

/// Real input of length n -> half spectrum of length n/2 + 1.
void forward_real(std::span<const double> in, std::span<Complex> out);

/// Half spectrum of length n/2 + 1 -> real output of length n. Hermitian
/// symmetry of the implied full spectrum is assumed.
void backward_real(std::span<const Complex> in, std::span<double> out);

/// Row-major 2-D transforms on an ny x nx array.
void forward_2d(int ny, int nx, std::span<const Complex> in, std::span<Complex> out);
void backward_2d(int ny, int nx, std::span<const Complex> in, std::span<Complex> out);

/// Signed frequency of bin k in an n-point transform, in [-n/2, n/2).
inline int signed_frequency(int k, int n) { return k < n / 2 ? k : k - n; }

}  // namespace cweld::fft

#endif  // CWELD_FFT_HPP_
