#include "corrsounder/calib.hpp"

#include "corrsounder/error.hpp"
#include "corrsounder/fft.hpp"

#include <cmath>

namespace corrsounder {

namespace {

long wrap(long k, long n) { return ((k % n) + n) % n; }

}  // namespace

std::string to_string(ProfileSource source) {
  return source == ProfileSource::through ? "through" : "identity";
}

CalibrationProfile identity_profile(long n_seq, double gain_cap_db) {
  if (n_seq < 1) throw InvalidArgument("profile length must be >= 1");
  CalibrationProfile p;
  p.h_ftt = CVec::Zero(n_seq);
  p.h_ftt(0) = 1.0;
  p.spectrum = fft(p.h_ftt);
  p.source = ProfileSource::identity;
  p.gain_cap_db = gain_cap_db;
  return p;
}

CalibrationProfile profile_from_time_domain(CVec h_ftt, ProfileSource source, double gain_cap_db,
                                           long created_from, std::vector<long> clamped_bins) {
  CalibrationProfile p;
  p.spectrum = fft(h_ftt);
  p.h_ftt = std::move(h_ftt);
  p.source = source;
  p.gain_cap_db = gain_cap_db;
  p.created_from = created_from;
  p.clamped_bins = std::move(clamped_bins);
  return p;
}

CalibrationProfile profile_from_spectrum(CVec spectrum, ProfileSource source, double gain_cap_db,
                                         long created_from, std::vector<long> clamped_bins) {
  // The spectrum is recomputed from the time-domain vector.
  CalibrationProfile p;
  p.h_ftt = ifft(spectrum);
  p.spectrum = fft(p.h_ftt);
  p.source = source;
  p.gain_cap_db = gain_cap_db;
  p.created_from = created_from;
  p.clamped_bins = std::move(clamped_bins);
  return p;
}

CalibrationProfile through_calibrate(const std::vector<ImpulseResponseFrame>& frames, double gain_cap_db) {
  if (frames.empty()) throw InvalidArgument("through calibration needs at least one frame");
  const long n = static_cast<long>(frames.front().h.size());
  if (n == 0) throw InvalidArgument("through calibration frames are empty");
  CVec avg = CVec::Zero(n);
  for (const auto& f : frames) {
    if (f.h.size() != n) throw InvalidArgument("through calibration frames differ in length");
    avg += f.h;
  }
  avg /= static_cast<double>(frames.size());

  const CVec measured = fft(avg);
  const double cap = std::pow(10.0, gain_cap_db / 20.0);
  CVec inverse(n);
  std::vector<long> clamped;
  for (long k = 0; k < n; ++k) {
    const double mag = std::abs(measured(k));
    if (mag == 0.0) {
      inverse(k) = cap;
      clamped.push_back(k);
    } else if (1.0 / mag > cap) {
      inverse(k) = std::polar(cap, -std::arg(measured(k)));
      clamped.push_back(k);
    } else {
      inverse(k) = 1.0 / measured(k);
    }
  }
  return profile_from_spectrum(std::move(inverse), ProfileSource::through, gain_cap_db,
                               static_cast<long>(frames.size()), std::move(clamped));
}

std::vector<long> dc_suppression_bins(double suppression_bandwidth_hz, double sample_rate, long n) {
  if (!(sample_rate > 0.0)) throw InvalidArgument("sample rate must be positive");
  if (suppression_bandwidth_hz < 0.0 || !(suppression_bandwidth_hz < sample_rate / 4.0)) {
    throw InvalidArgument("DC suppression bandwidth must be in [0, fs / 4)");
  }
  const long count = std::lround(suppression_bandwidth_hz / (sample_rate / static_cast<double>(n)));
  std::vector<long> bins;
  for (long k = -(count / 2); k <= count - count / 2 - 1; ++k) bins.push_back(k);
  return bins;
}

CVec remove_dc_bias_spectrum(const CVec& spectrum, double suppression_bandwidth_hz, double sample_rate) {
  const long n = static_cast<long>(spectrum.size());
  const auto bins = dc_suppression_bins(suppression_bandwidth_hz, sample_rate, n);
  CVec out = spectrum;
  if (bins.empty()) return out;
  const long lo = bins.front() - 1;
  const long hi = bins.back() + 1;
  const std::complex<double> a = spectrum(wrap(lo, n));
  const std::complex<double> b = spectrum(wrap(hi, n));
  const double span = static_cast<double>(hi - lo);
  for (long k : bins) {
    const double w = static_cast<double>(k - lo) / span;
    out(wrap(k, n)) = a + (b - a) * w;
  }
  return out;
}

CVec remove_dc_bias(const CVec& h, double suppression_bandwidth_hz, double sample_rate) {
  return ifft(remove_dc_bias_spectrum(fft(h), suppression_bandwidth_hz, sample_rate));
}

DownsampledFrame downsample_lowpass(const CVec& h, double sample_rate, double threshold_db, const RVec& psd_in) {
  if (!(threshold_db < 0.0)) throw InvalidArgument("downsample threshold must be negative");
  if (!(sample_rate > 0.0)) throw InvalidArgument("sample rate must be positive");
  const long n = static_cast<long>(h.size());
  if (n == 0) throw InvalidArgument("downsample of empty frame");
  const CVec spectrum = fft(h);
  const RVec psd = psd_in.size() ? psd_in : RVec(spectrum.cwiseAbs2());
  if (psd.size() != n) throw InvalidArgument("PSD length does not match the frame");

  Eigen::Index peak = 0;
  const double max = psd.maxCoeff(&peak);
  if (!(max > 0.0)) throw InvalidArgument("degenerate PSD (all zero)");
  const double floor = max * std::pow(10.0, threshold_db / 10.0);

  long left = static_cast<long>(peak);
  long right = left;
  long count = 1;
  for (bool grew = true; grew && count < n;) {
    grew = false;
    if (count < n && psd(wrap(right + 1, n)) >= floor) {
      ++right;
      ++count;
      grew = true;
    }
    if (count < n && psd(wrap(left - 1, n)) >= floor) {
      --left;
      ++count;
      grew = true;
    }
  }

  DownsampledFrame out;
  out.bin_count = count;
  out.first_bin = signed_bin(wrap(left, n), n);
  const double df = sample_rate / static_cast<double>(n);
  out.sample_rate = df * static_cast<double>(count);
  out.cutoff_low_hz = df * static_cast<double>(out.first_bin);
  out.cutoff_high_hz = df * static_cast<double>(out.first_bin + count - 1);

  CVec reduced = CVec::Zero(count);
  const double scale = static_cast<double>(count) / static_cast<double>(n);
  for (long j = 0; j < count; ++j) {
    const long freq = out.first_bin + j;
    reduced(wrap(freq, count)) = spectrum(wrap(freq, n)) * scale;
  }
  out.h = ifft(reduced);
  return out;
}

}  // namespace corrsounder
