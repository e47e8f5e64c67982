#pragma once

#include "corrsounder/error.hpp"
#include "corrsounder/fft.hpp"
#include "corrsounder/types.hpp"

namespace corrsounder {

/// Correlation values indexed by lag. For periodic results lag k sits at
/// index k (0 <= k < N). For aperiodic results lag k sits at index
/// k + lag_zero_index.
template <typename T>
struct CorrelationResult {
  ComplexVector<T> values;
  Eigen::Index lag_zero_index = 0;
  bool periodic = true;

  [[nodiscard]] std::complex<T> at_lag(Eigen::Index lag) const {
    return values(lag + lag_zero_index);
  }
};

// All kernels use r[k] = sum_n a[n] * conj(b[n - k]): a is the received
// signal, b the reference, so b delayed by d peaks at lag d.

/// Direct O(N^2) periodic cross-correlation.
template <typename T>
CorrelationResult<T> pccf(const ComplexVector<T>& a, const ComplexVector<T>& b) {
  const Eigen::Index n = a.size();
  if (n == 0 || b.size() != n) {
    throw InvalidArgument("pccf: inputs must be non-empty and of equal length");
  }
  CorrelationResult<T> out;
  out.values.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::complex<T> acc{0, 0};
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index j = i - k;
      if (j < 0) j += n;
      acc += a(i) * std::conj(b(j));
    }
    out.values(k) = acc;
  }
  return out;
}

template <typename T>
CorrelationResult<T> pacf(const ComplexVector<T>& a) {
  return pccf(a, a);
}

/// Periodic cross-correlation through the DFT: IDFT(A * conj(B)).
template <typename T>
CorrelationResult<T> fast_pccf(const ComplexVector<T>& a, const ComplexVector<T>& b) {
  const Eigen::Index n = a.size();
  if (n == 0 || b.size() != n) {
    throw InvalidArgument("fast_pccf: inputs must be non-empty and of equal length");
  }
  CorrelationResult<T> out;
  if (n == 1) {
    out.values = a.cwiseProduct(b.conjugate());
    return out;
  }
  const ComplexVector<T> spec = fft(a).cwiseProduct(fft(b).conjugate());
  out.values = ifft(spec);
  return out;
}

/// Direct aperiodic (zero-padded) cross-correlation over lags
/// -(len(b) - 1) .. len(a) - 1.
template <typename T>
CorrelationResult<T> ccf(const ComplexVector<T>& a, const ComplexVector<T>& b) {
  const Eigen::Index na = a.size();
  const Eigen::Index nb = b.size();
  if (na == 0 || nb == 0) throw InvalidArgument("ccf: empty input");
  CorrelationResult<T> out;
  out.periodic = false;
  out.lag_zero_index = nb - 1;
  out.values.setZero(na + nb - 1);
  for (Eigen::Index lag = -(nb - 1); lag <= na - 1; ++lag) {
    std::complex<T> acc{0, 0};
    const Eigen::Index lo = std::max<Eigen::Index>(0, lag);
    const Eigen::Index hi = std::min<Eigen::Index>(na, nb + lag);
    for (Eigen::Index i = lo; i < hi; ++i) acc += a(i) * std::conj(b(i - lag));
    out.values(lag + out.lag_zero_index) = acc;
  }
  return out;
}

template <typename T>
CorrelationResult<T> acf(const ComplexVector<T>& a) {
  return ccf(a, a);
}

}  // namespace corrsounder
