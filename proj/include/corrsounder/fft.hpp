#pragma once

#include "corrsounder/types.hpp"

#include <unsupported/Eigen/FFT>

#include <cstdint>
#include <numbers>

namespace corrsounder {

// Forward is unscaled; inverse scales by 1/N. Lengths with a prime factor
// above kBluesteinPrimeLimit use Bluestein's chirp-z algorithm on a
// power-of-two grid.

namespace detail {

inline long largest_prime_factor(long n) {
  long largest = 1;
  for (long p = 2; p * p <= n; ++p) {
    while (n % p == 0) {
      largest = p;
      n /= p;
    }
  }
  return n > 1 ? n : largest;
}

inline constexpr long kBluesteinPrimeLimit = 512;

template <typename T>
struct BluesteinPlan {
  long n = 0;
  long m = 0;
  ComplexVector<T> chirp;     // exp(-j pi k^2 / n)
  ComplexVector<T> kernel;    // spectrum of the conjugate chirp, wrapped
};

template <typename T>
const BluesteinPlan<T>& bluestein_plan(long n, Eigen::FFT<T>& engine) {
  thread_local BluesteinPlan<T> plan;
  if (plan.n == n) return plan;
  long m = 1;
  while (m < 2 * n - 1) m <<= 1;
  plan.n = n;
  plan.m = m;
  plan.chirp.resize(n);
  const auto two_n = static_cast<std::uint64_t>(2 * n);
  for (long k = 0; k < n; ++k) {
    // k^2 mod 2n in integers keeps the phase exact for large k.
    const std::uint64_t q = (static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(k)) % two_n;
    const double phase = -std::numbers::pi * static_cast<double>(q) / static_cast<double>(n);
    plan.chirp(k) = std::complex<T>(static_cast<T>(std::cos(phase)), static_cast<T>(std::sin(phase)));
  }
  ComplexVector<T> b = ComplexVector<T>::Zero(m);
  b(0) = std::conj(plan.chirp(0));
  for (long k = 1; k < n; ++k) {
    b(k) = std::conj(plan.chirp(k));
    b(m - k) = b(k);
  }
  plan.kernel.resize(m);
  engine.fwd(plan.kernel.data(), b.data(), static_cast<int>(m));
  return plan;
}

template <typename T>
void bluestein_forward(std::complex<T>* out, const std::complex<T>* in, long n, Eigen::FFT<T>& engine) {
  const BluesteinPlan<T>& plan = bluestein_plan<T>(n, engine);
  ComplexVector<T> a = ComplexVector<T>::Zero(plan.m);
  for (long k = 0; k < n; ++k) a(k) = in[k] * plan.chirp(k);
  ComplexVector<T> spec(plan.m);
  engine.fwd(spec.data(), a.data(), static_cast<int>(plan.m));
  spec = spec.cwiseProduct(plan.kernel);
  engine.inv(a.data(), spec.data(), static_cast<int>(plan.m));
  for (long k = 0; k < n; ++k) out[k] = a(k) * plan.chirp(k);
}

}  // namespace detail

template <typename T>
ComplexVector<T> fft(const ComplexVector<T>& x) {
  thread_local Eigen::FFT<T> engine;
  const long n = static_cast<long>(x.size());
  ComplexVector<T> out(n);
  if (n <= 1) return x;
  if (detail::largest_prime_factor(n) > detail::kBluesteinPrimeLimit) {
    detail::bluestein_forward(out.data(), x.data(), n, engine);
  } else {
    engine.fwd(out.data(), x.data(), static_cast<int>(n));
  }
  return out;
}

template <typename T>
ComplexVector<T> ifft(const ComplexVector<T>& x) {
  thread_local Eigen::FFT<T> engine;
  const long n = static_cast<long>(x.size());
  ComplexVector<T> out(n);
  if (n <= 1) return x;
  if (detail::largest_prime_factor(n) > detail::kBluesteinPrimeLimit) {
    const ComplexVector<T> conj_in = x.conjugate();
    detail::bluestein_forward(out.data(), conj_in.data(), n, engine);
    out = out.conjugate() / static_cast<T>(n);
  } else {
    engine.inv(out.data(), x.data(), static_cast<int>(n));
  }
  return out;
}

/// Signed frequency bin index for DFT bin k of an N-point transform.
inline long signed_bin(long k, long n) { return k <= (n - 1) / 2 ? k : k - n; }

}  // namespace corrsounder
