#pragma once

#include "corrsounder/types.hpp"

#include <string>
#include <vector>

namespace corrsounder {

enum class ProfileSource { identity, through };

/// Forward-transmission-tracking correction term h_ftt, kept in both
/// time and frequency domain.
struct CalibrationProfile {
  CVec h_ftt;
  CVec spectrum;  // DFT of h_ftt
  ProfileSource source = ProfileSource::identity;
  double gain_cap_db = 40.0;
  long created_from = 0;
  std::vector<long> clamped_bins;

  [[nodiscard]] long length() const { return static_cast<long>(h_ftt.size()); }
};

CalibrationProfile identity_profile(long n_seq, double gain_cap_db = 40.0);

/// Build a profile from a target spectrum H_ftt.
CalibrationProfile profile_from_spectrum(CVec spectrum, ProfileSource source, double gain_cap_db,
                                         long created_from, std::vector<long> clamped_bins);

/// Build a profile from a persisted time-domain h_ftt.
CalibrationProfile profile_from_time_domain(CVec h_ftt, ProfileSource source, double gain_cap_db,
                                           long created_from, std::vector<long> clamped_bins);

std::string to_string(ProfileSource source);

/// Coherently average through-connection frames and invert their spectrum
/// bin by bin. Bins whose inverse would exceed `gain_cap_db` keep the
/// inverse phase at the capped magnitude and are reported in clamped_bins.
CalibrationProfile through_calibrate(const std::vector<ImpulseResponseFrame>& frames,
                                     double gain_cap_db = 40.0);

/// Signed DFT bins covered by a DC suppression band: round(bw / (fs / N))
/// central bins, i.e. k in [-(n/2), n - n/2 - 1]. Empty when n is 0.
std::vector<long> dc_suppression_bins(double suppression_bandwidth_hz, double sample_rate, long n);

/// Replace the DC suppression band of a spectrum by linear interpolation
/// (real and imaginary parts) between the nearest untouched bins.
/// Requires suppression_bandwidth < fs / 4.
CVec remove_dc_bias_spectrum(const CVec& spectrum, double suppression_bandwidth_hz, double sample_rate);

/// Time-domain form: transform, suppress, transform back.
CVec remove_dc_bias(const CVec& h, double suppression_bandwidth_hz, double sample_rate);

/// Band-limited frame at a reduced sample rate.
struct DownsampledFrame {
  CVec h;
  double sample_rate = 0.0;
  double cutoff_low_hz = 0.0;
  double cutoff_high_hz = 0.0;
  long first_bin = 0;  // signed bin where the kept band starts
  long bin_count = 0;
};

/// Keep the widest contiguous band around the PSD maximum where the PSD
/// stays within `threshold_db` of it, and resample to that band's width.
/// `psd` defaults to |DFT(h)|^2 when empty.
DownsampledFrame downsample_lowpass(const CVec& h, double sample_rate, double threshold_db,
                                    const RVec& psd = RVec());

}  // namespace corrsounder
