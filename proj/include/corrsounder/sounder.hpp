#pragma once

#include "corrsounder/calib.hpp"
#include "corrsounder/chansim.hpp"
#include "corrsounder/seqgen.hpp"
#include "corrsounder/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace corrsounder {

/// Receive-side settings.
struct CorrelatorConfig {
  Sequence sequence;  // must carry a sample rate
  long event_span = 1;  // samples disrupted from each trigger index
  bool discard_first = true;
  double dc_bandwidth_hz = 0.0;  // 0 disables DC-bias removal
  bool dc_before_ftt = true;
  std::optional<CalibrationProfile> profile;
  std::string calibration_reference;
};

/// The whole simulated campaign: stimulation, channel, disruptions, receiver.
struct SoundingConfig {
  CorrelatorConfig receiver;
  long n_sequences = 1;
  long chunk_size = 4096;
  double center_frequency = 0.0;
  double t0 = 0.0;
  std::vector<TriggerEvent> events;
};

/// `n_reps` back-to-back copies of the sequence starting at global index 0.
IqFrame stimulate(const Sequence& seq, long n_reps);

/// Number of whole sequences that fit in `duration_s`.
long sequences_for_duration(const Sequence& seq, double duration_s);

/// t_i = (i + 1) T_seq - T_s.
double measurement_time(const Sequence& seq, std::int64_t sequence_index);

struct GatedBlock {
  std::int64_t index = 0;
  CVecF samples;
};

/// Streaming sequence gate. The stream must start on a sequence boundary;
/// block k spans global samples [k N, (k + 1) N) and is passed only if no
/// event span [e, e + event_span) touches it. Events must be added before
/// the samples of the block they disrupt are pushed.
class SequenceGate {
 public:
  SequenceGate(long n_seq, long event_span = 1);

  void add_event(const TriggerEvent& event);
  std::vector<GatedBlock> push(const IqFrame& frame);

  [[nodiscard]] const GateRecord& record() const { return record_; }
  [[nodiscard]] std::int64_t first_block() const { return first_block_; }

 private:
  [[nodiscard]] bool disrupted(std::int64_t block) const;

  long n_seq_;
  long event_span_;
  std::vector<std::int64_t> events_;  // sorted sample indices
  std::optional<std::int64_t> next_index_;
  std::int64_t first_block_ = 0;
  CVecF pending_;
  long filled_ = 0;
  GateRecord record_;
};

/// Offline gate over a frame stream; returns the passed blocks and their indices.
std::pair<std::vector<GatedBlock>, std::vector<std::int64_t>> sequence_gate(
    const std::vector<IqFrame>& stream, const std::vector<TriggerEvent>& events, long n_seq,
    long event_span = 1);

/// Periodic cross-correlation of one gated block against the sequence.
CVec correlate_sequence(const CVec& block, const Sequence& seq);

/// y_corr / N_seq.
CVec normalize(const CVec& y_corr, long n_seq);

/// Circular convolution with h_ftt (per-bin product with its spectrum).
/// Without a profile the frame passes through with corrected = false.
ImpulseResponseFrame correct_ftt(ImpulseResponseFrame frame, const std::optional<CalibrationProfile>& profile);

/// Receive half of the pipeline: gate, correlate, normalize, DC removal,
/// FTT correction.
class Correlator {
 public:
  explicit Correlator(CorrelatorConfig config);

  void add_event(const TriggerEvent& event) { gate_.add_event(event); }
  std::vector<ImpulseResponseFrame> push(const IqFrame& frame);

  [[nodiscard]] const GateRecord& gate_record() const { return record_; }
  [[nodiscard]] const CorrelatorConfig& config() const { return config_; }

  /// Empty series carrying this correlator's grid metadata.
  [[nodiscard]] FrameSeries empty_series(double center_frequency) const;

 private:
  ImpulseResponseFrame process(const GatedBlock& block) const;

  CorrelatorConfig config_;
  SequenceGate gate_;
  GateRecord record_;
  bool seen_first_ = false;
};

/// Transmit half plus the simulated channel: emits the received stream in
/// chunks of `chunk_size` samples.
class StimulationSource {
 public:
  StimulationSource(const SoundingConfig& config, const ChannelModel& model);

  /// Next chunk, or nullopt when the stream is exhausted.
  std::optional<IqFrame> next();

  [[nodiscard]] std::int64_t total_samples() const { return total_; }
  [[nodiscard]] const std::vector<TriggerEvent>& events() const { return events_; }

 private:
  Sequence seq_;
  ChannelSimulator sim_;
  long chunk_;
  double fc_;
  long span_;
  std::vector<TriggerEvent> events_;
  std::int64_t total_ = 0;
  std::int64_t cursor_ = 0;
};

/// Full in-process campaign. Producer and correlator run as separate
/// workers joined by a bounded queue; the result does not depend on
/// scheduling.
FrameSeries run_sounding(const SoundingConfig& config, const ChannelModel& model);

}  // namespace corrsounder
