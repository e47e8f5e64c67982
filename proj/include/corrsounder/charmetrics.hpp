#pragma once

#include "corrsounder/types.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace corrsounder {

inline constexpr double kSpeedOfLight = 299'792'458.0;

// ---- single-sequence metrics (impulse-response time tau) -------------------

/// pdp[tau] = mean over frames of |h[tau, t_i]|^2.
RVec pdp(const std::vector<ImpulseResponseFrame>& frames);

/// Power-weighted first moment of the PDP, in seconds.
double mean_delay(const RVec& pdp, double sample_period);

/// sqrt(second central moment) of the PDP, in seconds.
double rms_delay_spread(const RVec& pdp, double sample_period);

struct FrequencyStats {
  RVec psd;  // mean |H(f)|^2, natural DFT bin order
  double h10_db = 0.0;
  double hmedian_db = 0.0;
  double h90_db = 0.0;
};

/// PSD and 10/50/90 percentiles of the pooled |H(f)| samples in dB
/// (linear interpolation between order statistics).
FrequencyStats frequency_stats(const std::vector<ImpulseResponseFrame>& frames);

struct CoherenceBandwidth {
  double hz = 0.0;
  bool full_band = false;  // correlation never dropped below the threshold
};

/// Smallest frequency lag at which the frame-averaged magnitude of the
/// normalized frequency autocorrelation of H(f) drops below `threshold`,
/// interpolated linearly between bins.
CoherenceBandwidth coherence_bandwidth(const std::vector<ImpulseResponseFrame>& frames, double sample_rate,
                                       double threshold = 0.5);

// ---- inter-sequence metrics (measurement time t) ---------------------------

enum class DopplerWindow { rectangular, hann };

struct DopplerOptions {
  bool zero_fill_gaps = false;
  DopplerWindow window = DopplerWindow::rectangular;
};

/// Delay-Doppler power map. Rows are tau bins, columns Doppler bins in
/// ascending frequency from -floor(K/2) / (K T_seq).
struct DopplerMap {
  Eigen::MatrixXd power;
  RVec doppler_axis_hz;
  double resolution_hz = 0.0;
  double max_doppler_hz = 0.0;  // 1 / (2 T_seq)
  long gap_frames = 0;          // zero-filled frames
};

/// Per-tau DFT across measurement time. Frames must be consecutive
/// sequence indices unless gaps are zero-filled.
DopplerMap doppler_map(const std::vector<ImpulseResponseFrame>& frames, double sequence_period,
                       const DopplerOptions& options = {});

/// RMS width of the tau-summed Doppler power spectrum.
double doppler_spread(const DopplerMap& map);

/// 1 / doppler_spread; infinite for a static channel.
double coherence_time(double doppler_spread_hz);

double doppler_resolution(double capture_duration_s);
double max_doppler(double sequence_period);

/// v = f_d c / f_c.
double doppler_to_speed(double doppler_hz, double center_frequency);

/// 10 log10(peak / floor), floor = median of the lowest-decile bins.
/// Infinite when the floor is exactly zero.
double measured_dynamic_range(const RVec& pdp);

/// Free-space range scaling d_ref * 10^(D / 20).
double max_distance_estimate(double dynamic_range_db, double reference_distance_m);

struct PleFit {
  double exponent = 0.0;
  double intercept_db = 0.0;  // path loss at 1 m from the fit
  double free_space_1m_db = 0.0;
};

/// Least-squares path-loss exponent. Path loss is tx + rx gain minus the
/// measured path gain, regressed against 10 log10(d).
PleFit ple_estimate(const std::vector<double>& path_gains_db, const std::vector<double>& distances_m,
                    double tx_gain_dbi, double rx_gain_dbi, double center_frequency);

// ---- aggregated report -----------------------------------------------------

struct ReportOptions {
  double coherence_threshold = 0.5;
  DopplerOptions doppler{};
  std::optional<double> reference_distance_m;
  double bandwidth_threshold_db = -3.0;
};

struct CharacterizationReport {
  long n_frames = 0;
  long n_seq = 0;
  double sample_period = 0.0;
  double sequence_period = 0.0;
  double center_frequency = 0.0;

  RVec pdp;
  double mean_delay = 0.0;
  double delay_spread = 0.0;
  FrequencyStats freq;
  CoherenceBandwidth coherence;
  std::optional<DopplerMap> doppler;
  std::string doppler_error;
  double doppler_spread = 0.0;
  double coherence_time = 0.0;
  double dynamic_range_db = 0.0;
  std::optional<double> max_speed_mps;
  std::optional<double> max_distance_m;
  double measured_bandwidth_hz = 0.0;  // contiguous PSD band above the threshold
};

CharacterizationReport characterize(const FrameSeries& series, const ReportOptions& options = {});

/// Key-value text rendering; deterministic for identical input.
std::string format_report(const CharacterizationReport& report);

std::string pdp_csv(const CharacterizationReport& report);
std::string psd_csv(const CharacterizationReport& report);
std::string doppler_csv(const CharacterizationReport& report);

}  // namespace corrsounder
