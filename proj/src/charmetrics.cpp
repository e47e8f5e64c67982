#include "corrsounder/charmetrics.hpp"

#include "corrsounder/calib.hpp"
#include "corrsounder/corrmath.hpp"
#include "corrsounder/error.hpp"
#include "corrsounder/fft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace corrsounder {

namespace {

void require_frames(const std::vector<ImpulseResponseFrame>& frames, const char* what) {
  if (frames.empty()) throw InvalidArgument(std::string(what) + ": no frames");
  const auto n = frames.front().h.size();
  if (n == 0) throw InvalidArgument(std::string(what) + ": empty frames");
  for (const auto& f : frames) {
    if (f.h.size() != n) throw InvalidArgument(std::string(what) + ": frames differ in length");
  }
}

// Linear interpolation between order statistics (the "linear" definition).
double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi] || std::isinf(sorted[lo])) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RVec pdp(const std::vector<ImpulseResponseFrame>& frames) {
  require_frames(frames, "pdp");
  RVec acc = RVec::Zero(frames.front().h.size());
  for (const auto& f : frames) acc += f.h.cwiseAbs2();
  return acc / static_cast<double>(frames.size());
}

double mean_delay(const RVec& p, double sample_period) {
  const double total = p.sum();
  if (!(total > 0.0)) throw InvalidArgument("mean_delay: PDP has no power");
  const RVec tau = RVec::LinSpaced(p.size(), 0.0, static_cast<double>(p.size() - 1)) * sample_period;
  return tau.dot(p) / total;
}

double rms_delay_spread(const RVec& p, double sample_period) {
  const double total = p.sum();
  if (!(total > 0.0)) throw InvalidArgument("rms_delay_spread: PDP has no power");
  const RVec tau = RVec::LinSpaced(p.size(), 0.0, static_cast<double>(p.size() - 1)) * sample_period;
  const double m1 = tau.dot(p) / total;
  const double m2 = tau.cwiseAbs2().dot(p) / total;
  return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

FrequencyStats frequency_stats(const std::vector<ImpulseResponseFrame>& frames) {
  require_frames(frames, "frequency_stats");
  const long n = static_cast<long>(frames.front().h.size());
  FrequencyStats out;
  out.psd = RVec::Zero(n);
  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(n) * frames.size());
  for (const auto& f : frames) {
    const CVec spectrum = fft(f.h);
    out.psd += spectrum.cwiseAbs2();
    for (long k = 0; k < n; ++k) pooled.push_back(20.0 * std::log10(std::abs(spectrum(k))));
  }
  out.psd /= static_cast<double>(frames.size());
  if (!(out.psd.maxCoeff() > 0.0)) throw InvalidArgument("frequency_stats: all-zero frames");
  std::sort(pooled.begin(), pooled.end());
  out.h10_db = percentile(pooled, 0.10);
  out.hmedian_db = percentile(pooled, 0.50);
  out.h90_db = percentile(pooled, 0.90);
  return out;
}

CoherenceBandwidth coherence_bandwidth(const std::vector<ImpulseResponseFrame>& frames, double sample_rate,
                                       double threshold) {
  require_frames(frames, "coherence_bandwidth");
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("coherence threshold must be in (0, 1)");
  const long n = static_cast<long>(frames.front().h.size());
  RVec avg = RVec::Zero(n);
  long used = 0;
  for (const auto& f : frames) {
    const CVec spectrum = fft(f.h);
    const CVec r = fast_pccf(spectrum, spectrum).values;
    const double r0 = std::abs(r(0));
    if (r0 == 0.0) continue;
    avg += r.cwiseAbs() / r0;
    ++used;
  }
  if (used == 0) throw InvalidArgument("coherence_bandwidth: all-zero frames");
  avg /= static_cast<double>(used);

  const double df = sample_rate / static_cast<double>(n);
  for (long m = 1; m <= n / 2; ++m) {
    if (avg(m) < threshold) {
      const double prev = avg(m - 1);
      const double lag = static_cast<double>(m - 1) + (prev - threshold) / (prev - avg(m));
      return {lag * df, false};
    }
  }
  return {sample_rate, true};
}

DopplerMap doppler_map(const std::vector<ImpulseResponseFrame>& frames, double sequence_period,
                       const DopplerOptions& options) {
  if (frames.size() < 2) throw InvalidArgument("doppler_map needs at least two frames");
  require_frames(frames, "doppler_map");
  if (!(sequence_period > 0.0)) throw InvalidArgument("sequence period must be positive");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const auto step = frames[i].sequence_index - frames[i - 1].sequence_index;
    if (step <= 0) throw InvalidArgument("doppler_map: sequence indices must increase");
    if (step != 1 && !options.zero_fill_gaps) {
      throw InvalidArgument("doppler_map: gap after sequence " + std::to_string(frames[i - 1].sequence_index) +
                            " (enable zero fill to accept gaps)");
    }
  }
  const long n = static_cast<long>(frames.front().h.size());
  const std::int64_t first = frames.front().sequence_index;
  const long k = static_cast<long>(frames.back().sequence_index - first + 1);

  Eigen::MatrixXcd grid = Eigen::MatrixXcd::Zero(n, k);
  for (const auto& f : frames) grid.col(f.sequence_index - first) = f.h;

  RVec window = RVec::Ones(k);
  if (options.window == DopplerWindow::hann) {
    for (long j = 0; j < k; ++j) window(j) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * j / k);
  }
  const double gain = window.sum();

  DopplerMap out;
  out.gap_frames = k - static_cast<long>(frames.size());
  out.resolution_hz = 1.0 / (static_cast<double>(k) * sequence_period);
  out.max_doppler_hz = max_doppler(sequence_period);
  out.doppler_axis_hz.resize(k);
  const long half = k / 2;
  for (long c = 0; c < k; ++c) out.doppler_axis_hz(c) = static_cast<double>(c - half) * out.resolution_hz;

  out.power.resize(n, k);
  for (long row = 0; row < n; ++row) {
    const CVec series = grid.row(row).transpose().cwiseProduct(window.cast<std::complex<double>>());
    const CVec spectrum = fft(series) / gain;
    for (long c = 0; c < k; ++c) {
      const long bin = ((c - half) % k + k) % k;
      out.power(row, c) = std::norm(spectrum(bin));
    }
  }
  return out;
}

double doppler_spread(const DopplerMap& map) {
  const RVec spectrum = map.power.colwise().sum().transpose();
  const double peak = spectrum.maxCoeff();
  if (!(peak > 0.0)) throw InvalidArgument("doppler_spread: map has no power");
  // Bins more than 200 dB below the peak are transform round-off.
  const RVec p = (spectrum.array() >= peak * 1e-20).select(spectrum, 0.0);
  const double total = p.sum();
  const double m1 = map.doppler_axis_hz.dot(p) / total;
  const double m2 = map.doppler_axis_hz.cwiseAbs2().dot(p) / total;
  return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

double coherence_time(double doppler_spread_hz) {
  if (doppler_spread_hz < 0.0) throw InvalidArgument("doppler spread must be >= 0");
  return doppler_spread_hz == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / doppler_spread_hz;
}

double doppler_resolution(double capture_duration_s) {
  if (!(capture_duration_s > 0.0)) throw InvalidArgument("capture duration must be positive");
  return 1.0 / capture_duration_s;
}

double max_doppler(double sequence_period) {
  if (!(sequence_period > 0.0)) throw InvalidArgument("sequence period must be positive");
  return 1.0 / (2.0 * sequence_period);
}

double doppler_to_speed(double doppler_hz, double center_frequency) {
  if (!(center_frequency > 0.0)) throw InvalidArgument("center frequency must be positive");
  return doppler_hz * kSpeedOfLight / center_frequency;
}

double measured_dynamic_range(const RVec& p) {
  if (p.size() < 10) throw InvalidArgument("measured_dynamic_range needs at least 10 bins");
  std::vector<double> sorted(p.data(), p.data() + p.size());
  std::sort(sorted.begin(), sorted.end());
  const double peak = sorted.back();
  if (!(peak > 0.0)) throw InvalidArgument("measured_dynamic_range: PDP has no power");
  const std::size_t decile = std::max<std::size_t>(1, sorted.size() / 10);
  const std::size_t mid = decile / 2;
  const double floor = decile % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  if (floor <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak / floor);
}

double max_distance_estimate(double dynamic_range_db, double reference_distance_m) {
  if (!(reference_distance_m > 0.0)) throw InvalidArgument("reference distance must be positive");
  return reference_distance_m * std::pow(10.0, dynamic_range_db / 20.0);
}

PleFit ple_estimate(const std::vector<double>& path_gains_db, const std::vector<double>& distances_m,
                    double tx_gain_dbi, double rx_gain_dbi, double center_frequency) {
  if (path_gains_db.size() != distances_m.size()) throw InvalidArgument("ple: gains and distances differ in count");
  if (path_gains_db.size() < 2) throw InvalidArgument("ple: need at least two measurements");
  if (!(center_frequency > 0.0)) throw InvalidArgument("center frequency must be positive");
  const auto m = static_cast<Eigen::Index>(path_gains_db.size());
  RVec x(m), loss(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(distances_m[i] > 0.0)) throw InvalidArgument("ple: distances must be positive");
    x(i) = 10.0 * std::log10(distances_m[i]);
    loss(i) = tx_gain_dbi + rx_gain_dbi - path_gains_db[i];
  }
  const RVec xc = x.array() - x.mean();
  const double sxx = xc.squaredNorm();
  if (!(sxx > 1e-12 * std::max(1.0, x.cwiseAbs2().sum()))) {
    throw InvalidArgument("ple: singular fit (distances do not vary)");
  }
  PleFit fit;
  fit.exponent = xc.dot(loss.array().matrix() - RVec::Constant(m, loss.mean())) / sxx;
  fit.intercept_db = loss.mean() - fit.exponent * x.mean();
  fit.free_space_1m_db = 20.0 * std::log10(4.0 * std::numbers::pi * center_frequency / kSpeedOfLight);
  return fit;
}

CharacterizationReport characterize(const FrameSeries& series, const ReportOptions& options) {
  if (series.frames.empty()) throw InvalidArgument("characterize: empty frame series");
  CharacterizationReport r;
  r.n_frames = static_cast<long>(series.frames.size());
  r.n_seq = series.n_seq;
  r.sample_period = series.sample_period;
  r.sequence_period = series.sequence_period;
  r.center_frequency = series.center_frequency;

  r.pdp = pdp(series.frames);
  r.mean_delay = mean_delay(r.pdp, series.sample_period);
  r.delay_spread = rms_delay_spread(r.pdp, series.sample_period);
  r.freq = frequency_stats(series.frames);
  r.coherence = coherence_bandwidth(series.frames, 1.0 / series.sample_period, options.coherence_threshold);
  try {
    r.doppler = doppler_map(series.frames, series.sequence_period, options.doppler);
    r.doppler_spread = doppler_spread(*r.doppler);
    r.coherence_time = coherence_time(r.doppler_spread);
  } catch (const InvalidArgument& e) {
    r.doppler.reset();
    r.doppler_error = e.what();
  }
  r.dynamic_range_db = r.pdp.size() >= 10 ? measured_dynamic_range(r.pdp) : 0.0;
  if (series.center_frequency > 0.0) {
    r.max_speed_mps = doppler_to_speed(max_doppler(series.sequence_period), series.center_frequency);
  }
  if (r.freq.psd.maxCoeff() > 0.0) {
    const auto band = downsample_lowpass(series.frames.front().h, 1.0 / series.sample_period,
                                         options.bandwidth_threshold_db, r.freq.psd);
    r.measured_bandwidth_hz = band.sample_rate;
  }
  if (options.reference_distance_m && std::isfinite(r.dynamic_range_db)) {
    r.max_distance_m = max_distance_estimate(r.dynamic_range_db, *options.reference_distance_m);
  }
  return r;
}

std::string format_report(const CharacterizationReport& r) {
  std::ostringstream os;
  os << "frames = " << r.n_frames << '\n'
     << "n_seq = " << r.n_seq << '\n'
     << "sample_period_s = " << num(r.sample_period) << '\n'
     << "sequence_period_s = " << num(r.sequence_period) << '\n'
     << "center_frequency_hz = " << num(r.center_frequency) << '\n'
     << "mean_delay_s = " << num(r.mean_delay) << '\n'
     << "rms_delay_spread_s = " << num(r.delay_spread) << '\n'
     << "h10_db = " << num(r.freq.h10_db) << '\n'
     << "hmedian_db = " << num(r.freq.hmedian_db) << '\n'
     << "h90_db = " << num(r.freq.h90_db) << '\n'
     << "measured_bandwidth_hz = " << num(r.measured_bandwidth_hz) << '\n'
     << "coherence_bandwidth_hz = " << num(r.coherence.hz) << '\n'
     << "coherence_bandwidth_full_band = " << (r.coherence.full_band ? "true" : "false") << '\n';
  if (r.doppler) {
    os << "doppler_resolution_hz = " << num(r.doppler->resolution_hz) << '\n'
       << "doppler_max_hz = " << num(r.doppler->max_doppler_hz) << '\n'
       << "doppler_gap_frames = " << r.doppler->gap_frames << '\n'
       << "doppler_spread_hz = " << num(r.doppler_spread) << '\n'
       << "coherence_time_s = " << num(r.coherence_time) << '\n'
       << "coherence_time_infinite = " << (std::isinf(r.coherence_time) ? "true" : "false") << '\n';
  } else {
    os << "doppler = unavailable: " << r.doppler_error << '\n';
  }
  os << "dynamic_range_db = " << num(r.dynamic_range_db) << '\n';
  if (r.max_speed_mps) os << "max_speed_mps = " << num(*r.max_speed_mps) << '\n';
  if (r.max_distance_m) os << "max_distance_m = " << num(*r.max_distance_m) << '\n';
  return os.str();
}

std::string pdp_csv(const CharacterizationReport& r) {
  std::ostringstream os;
  os << "tau_s,power\n";
  for (Eigen::Index i = 0; i < r.pdp.size(); ++i) {
    os << num(static_cast<double>(i) * r.sample_period) << ',' << num(r.pdp(i)) << '\n';
  }
  return os.str();
}

std::string psd_csv(const CharacterizationReport& r) {
  std::ostringstream os;
  os << "freq_hz,power\n";
  const long n = static_cast<long>(r.freq.psd.size());
  const double df = 1.0 / (static_cast<double>(n) * r.sample_period);
  const long half = n / 2;
  for (long c = 0; c < n; ++c) {
    const long k = c - half;
    os << num(static_cast<double>(k) * df) << ',' << num(r.freq.psd(((k % n) + n) % n)) << '\n';
  }
  return os.str();
}

std::string doppler_csv(const CharacterizationReport& r) {
  std::ostringstream os;
  if (!r.doppler) return os.str();
  const DopplerMap& m = *r.doppler;
  os << "tau_s";
  for (Eigen::Index c = 0; c < m.doppler_axis_hz.size(); ++c) os << ',' << num(m.doppler_axis_hz(c));
  os << '\n';
  for (Eigen::Index row = 0; row < m.power.rows(); ++row) {
    os << num(static_cast<double>(row) * r.sample_period);
    for (Eigen::Index c = 0; c < m.power.cols(); ++c) os << ',' << num(m.power(row, c));
    os << '\n';
  }
  return os.str();
}

}  // namespace corrsounder
