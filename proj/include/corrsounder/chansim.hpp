#pragma once

#include "corrsounder/seqgen.hpp"
#include "corrsounder/types.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace corrsounder {

/// One path of the tapped delay line. The path gain rotates as
/// gain * exp(j 2 pi doppler_hz t).
struct ChannelTap {
  long delay = 0;  // samples
  std::complex<double> gain{1.0, 0.0};
  double doppler_hz = 0.0;
};

/// Additive in-band interferer, independent of the stimulation.
struct Interferer {
  enum class Kind { none, fzc, qpsk, tone };
  Kind kind = Kind::none;
  double power_db = 0.0;  // relative to unit signal power
  long length = 0;        // fzc: period in samples
  long root = 1;          // fzc
  double freq_hz = 0.0;   // tone
  std::uint64_t seed = 1;  // qpsk
};

/// Tapped-delay-line channel plus receiver impairments, applied in order:
/// taps, cable FIR, DC offset, interferer, CFO, AWGN.
struct ChannelModel {
  std::vector<ChannelTap> taps{ChannelTap{}};
  std::optional<double> snr_db;  // unset: noise off
  double cfo_hz = 0.0;
  CVec cable;  // empty: no cable distortion
  std::complex<double> dc_offset{0.0, 0.0};
  Interferer interferer;
  std::uint64_t seed = 0;

  /// Longest memory of the model in samples (max tap delay + cable length - 1).
  [[nodiscard]] long memory() const;

  /// Throws InvalidArgument for an empty tap list or negative delays.
  void validate() const;
};

/// one-tap, zero-delay, unit-gain channel with nothing else enabled
ChannelModel identity_channel();

/// Stateful channel simulator for frame streams.
///
/// Carries input history across frames so consecutive frames behave as one
/// continuous stream. Time-dependent terms (Doppler, CFO) are evaluated at
/// t0 + global_index * T_s, and noise is keyed by (seed, global index), so
/// the output does not depend on how the stream is split into frames.
class ChannelSimulator {
 public:
  explicit ChannelSimulator(ChannelModel model, double t0 = 0.0);

  /// Frames must be contiguous and share one sample rate.
  IqFrame process(const IqFrame& frame);

  [[nodiscard]] const ChannelModel& model() const { return model_; }

 private:
  ChannelModel model_;
  double t0_;
  std::optional<std::int64_t> next_index_;
  CVec tap_history_;    // last `max_delay` input samples
  CVec cable_history_;  // last `cable.size() - 1` multipath outputs
  Sequence interferer_;
};

/// Single-frame channel application with zero history before the frame.
/// Throws InvalidArgument when any tap delay is not shorter than the frame.
IqFrame apply_channel(const IqFrame& x, const ChannelModel& model, double t0 = 0.0);

/// y[n] = x[n] exp(j 2 pi cfo (start_index + n) T_s); |cfo| < fs / 2.
IqFrame apply_cfo(const IqFrame& x, double cfo_hz);

/// Complex AWGN with power 10^(-snr_db / 10); infinite SNR disables it.
/// Deterministic per (seed, global sample index).
IqFrame add_awgn(const IqFrame& x, double snr_db, std::uint64_t seed);

/// Zero `corrupt_span` samples from each event's index. Events are global
/// sample indices; spans may extend past the frame. Throws InvalidArgument
/// for overlapping spans or events before the stream start.
std::pair<IqFrame, std::vector<TriggerEvent>> inject_disruption(
    const IqFrame& x, std::vector<TriggerEvent> events, long corrupt_span);

/// Standard normal pair for counter `index` under `seed`.
std::pair<double, double> gaussian_pair(std::uint64_t seed, std::uint64_t index);

}  // namespace corrsounder
