#include "corrsounder/sounder.hpp"

#include "corrsounder/corrmath.hpp"
#include "corrsounder/error.hpp"
#include "corrsounder/fft.hpp"
#include "corrsounder/queue.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace corrsounder {

namespace {

void sort_events(std::vector<TriggerEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const TriggerEvent& a, const TriggerEvent& b) { return a.sample_index < b.sample_index; });
}

const Sequence& require_rate(const Sequence& seq) {
  if (!seq.sample_rate) throw InvalidArgument("sequence must be bound to a sample rate");
  return seq;
}

}  // namespace

IqFrame stimulate(const Sequence& seq, long n_reps) {
  require_rate(seq);
  if (n_reps < 1) throw InvalidArgument("n_reps must be >= 1");
  const long n = seq.length();
  IqFrame out;
  out.sample_rate = *seq.sample_rate;
  out.samples.resize(n * n_reps);
  const CVecF one = seq.samples.cast<std::complex<float>>();
  for (long r = 0; r < n_reps; ++r) out.samples.segment(r * n, n) = one;
  return out;
}

long sequences_for_duration(const Sequence& seq, double duration_s) {
  if (!(duration_s > 0.0)) throw InvalidArgument("capture duration must be positive");
  const double exact = duration_s / require_rate(seq).period();
  // Tolerate representation error in durations that are whole multiples.
  const double rounded = std::round(exact);
  return static_cast<long>(std::abs(exact - rounded) < 1e-9 * std::max(1.0, exact) ? rounded : std::floor(exact));
}

double measurement_time(const Sequence& seq, std::int64_t sequence_index) {
  const double fs = *require_rate(seq).sample_rate;
  const double samples = static_cast<double>((sequence_index + 1) * seq.length() - 1);
  return samples / fs;
}

SequenceGate::SequenceGate(long n_seq, long event_span) : n_seq_(n_seq), event_span_(event_span) {
  if (n_seq < 1) throw InvalidArgument("gate sequence length must be >= 1");
  if (event_span < 1) throw InvalidArgument("gate event span must be >= 1");
  pending_.resize(n_seq);
}

void SequenceGate::add_event(const TriggerEvent& event) {
  events_.insert(std::upper_bound(events_.begin(), events_.end(), event.sample_index), event.sample_index);
}

bool SequenceGate::disrupted(std::int64_t block) const {
  const std::int64_t lo = block * n_seq_;
  const std::int64_t hi = lo + n_seq_;
  // Any event e with e < hi and e + span > lo.
  auto it = std::upper_bound(events_.begin(), events_.end(), lo - event_span_);
  return it != events_.end() && *it < hi;
}

std::vector<GatedBlock> SequenceGate::push(const IqFrame& frame) {
  if (!next_index_) {
    if (frame.start_index % n_seq_ != 0) {
      throw InvalidArgument("stream start " + std::to_string(frame.start_index) +
                            " is not on a sequence boundary of length " + std::to_string(n_seq_));
    }
    first_block_ = frame.start_index / n_seq_;
    next_index_ = frame.start_index;
  } else if (*next_index_ != frame.start_index) {
    throw InvalidArgument("gate input is not contiguous at sample " + std::to_string(frame.start_index));
  }
  next_index_ = frame.end_index();

  std::vector<GatedBlock> out;
  long consumed = 0;
  const long n = static_cast<long>(frame.size());
  while (consumed < n) {
    const long take = std::min<long>(n_seq_ - filled_, n - consumed);
    pending_.segment(filled_, take) = frame.samples.segment(consumed, take);
    filled_ += take;
    consumed += take;
    if (filled_ == n_seq_) {
      const std::int64_t block = (frame.start_index + consumed) / n_seq_ - 1;
      ++record_.total_blocks;
      if (disrupted(block)) {
        record_.dropped.push_back(block);
      } else {
        out.push_back(GatedBlock{block, pending_});
      }
      filled_ = 0;
    }
  }
  return out;
}

std::pair<std::vector<GatedBlock>, std::vector<std::int64_t>> sequence_gate(
    const std::vector<IqFrame>& stream, const std::vector<TriggerEvent>& events, long n_seq, long event_span) {
  SequenceGate gate(n_seq, event_span);
  for (const auto& e : events) gate.add_event(e);
  std::vector<GatedBlock> blocks;
  for (const auto& f : stream) {
    auto b = gate.push(f);
    std::move(b.begin(), b.end(), std::back_inserter(blocks));
  }
  std::vector<std::int64_t> kept;
  kept.reserve(blocks.size());
  for (const auto& b : blocks) kept.push_back(b.index);
  return {std::move(blocks), std::move(kept)};
}

CVec correlate_sequence(const CVec& block, const Sequence& seq) {
  if (block.size() != seq.length()) {
    throw InvalidArgument("block length " + std::to_string(block.size()) + " does not match sequence length " +
                          std::to_string(seq.length()));
  }
  return fast_pccf(block, seq.samples).values;
}

CVec normalize(const CVec& y_corr, long n_seq) {
  if (n_seq < 1) throw InvalidArgument("n_seq must be >= 1");
  return y_corr / static_cast<double>(n_seq);
}

ImpulseResponseFrame correct_ftt(ImpulseResponseFrame frame, const std::optional<CalibrationProfile>& profile) {
  if (!profile) return frame;
  if (profile->length() != frame.h.size()) {
    throw InvalidArgument("calibration profile length " + std::to_string(profile->length()) +
                          " does not match frame length " + std::to_string(frame.h.size()));
  }
  frame.h = ifft(CVec(fft(frame.h).cwiseProduct(profile->spectrum)));
  frame.corrected = true;
  return frame;
}

Correlator::Correlator(CorrelatorConfig config)
    : config_(std::move(config)), gate_(config_.sequence.length(), config_.event_span) {
  require_rate(config_.sequence);
  if (config_.profile && config_.profile->length() != config_.sequence.length()) {
    throw InvalidArgument("calibration profile length does not match the sequence");
  }
  if (config_.dc_bandwidth_hz > 0.0) {
    dc_suppression_bins(config_.dc_bandwidth_hz, *config_.sequence.sample_rate, config_.sequence.length());
  }
}

ImpulseResponseFrame Correlator::process(const GatedBlock& block) const {
  const Sequence& seq = config_.sequence;
  const double fs = *seq.sample_rate;
  const bool dc = config_.dc_bandwidth_hz > 0.0;

  ImpulseResponseFrame frame;
  frame.sequence_index = block.index;
  frame.t_i = measurement_time(seq, block.index);
  frame.h = normalize(correlate_sequence(block.samples.cast<std::complex<double>>(), seq), seq.length());
  if (dc && config_.dc_before_ftt) frame.h = remove_dc_bias(frame.h, config_.dc_bandwidth_hz, fs);
  frame = correct_ftt(std::move(frame), config_.profile);
  if (dc && !config_.dc_before_ftt) frame.h = remove_dc_bias(frame.h, config_.dc_bandwidth_hz, fs);
  return frame;
}

std::vector<ImpulseResponseFrame> Correlator::push(const IqFrame& frame) {
  std::vector<ImpulseResponseFrame> out;
  for (const auto& block : gate_.push(frame)) {
    if (config_.discard_first && block.index == gate_.first_block()) {
      record_.discarded.push_back(block.index);
      continue;
    }
    out.push_back(process(block));
  }
  record_.total_blocks = gate_.record().total_blocks;
  record_.dropped = gate_.record().dropped;
  return out;
}

FrameSeries Correlator::empty_series(double center_frequency) const {
  FrameSeries s;
  const Sequence& seq = config_.sequence;
  s.n_seq = seq.length();
  s.sample_period = seq.sample_period();
  s.sequence_period = seq.period();
  s.center_frequency = center_frequency;
  s.sequence_descriptor = seq.descriptor();
  s.calibration_reference = config_.profile ? config_.calibration_reference : std::string();
  return s;
}

StimulationSource::StimulationSource(const SoundingConfig& config, const ChannelModel& model)
    : seq_(config.receiver.sequence),
      sim_(model, config.t0),
      chunk_(config.chunk_size),
      fc_(config.center_frequency),
      span_(config.receiver.event_span),
      events_(config.events) {
  require_rate(seq_);
  if (config.n_sequences < 1) throw InvalidArgument("n_sequences must be >= 1");
  if (chunk_ < 1) throw InvalidArgument("chunk size must be >= 1");
  total_ = static_cast<std::int64_t>(config.n_sequences) * seq_.length();
  sort_events(events_);
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (events_[i].sample_index < 0 || events_[i].sample_index >= total_) {
      throw InvalidArgument("trigger event at " + std::to_string(events_[i].sample_index) + " outside the stream");
    }
    if (i > 0 && events_[i - 1].sample_index + span_ > events_[i].sample_index) {
      throw InvalidArgument("overlapping disruption spans at " + std::to_string(events_[i].sample_index));
    }
  }
}

std::optional<IqFrame> StimulationSource::next() {
  if (cursor_ >= total_) return std::nullopt;
  const long n = seq_.length();
  const long count = static_cast<long>(std::min<std::int64_t>(chunk_, total_ - cursor_));

  IqFrame tx;
  tx.sample_rate = *seq_.sample_rate;
  tx.center_frequency = fc_;
  tx.start_index = cursor_;
  tx.samples.resize(count);
  for (long i = 0; i < count; ++i) {
    tx.samples(i) = std::complex<float>(seq_.samples((cursor_ + i) % n));
  }
  IqFrame rx = sim_.process(tx);

  // Zero the part of every disruption span that falls into this chunk.
  const std::int64_t lo = rx.start_index;
  const std::int64_t hi = rx.end_index();
  for (const auto& ev : events_) {
    const std::int64_t a = std::max(lo, ev.sample_index);
    const std::int64_t b = std::min(hi, ev.sample_index + span_);
    if (a < b) rx.samples.segment(a - lo, b - a).setZero();
  }
  cursor_ += count;
  return rx;
}

FrameSeries run_sounding(const SoundingConfig& config, const ChannelModel& model) {
  StimulationSource source(config, model);
  Correlator correlator(config.receiver);
  for (const auto& e : source.events()) correlator.add_event(e);

  BoundedQueue<IqFrame> queue(8);
  std::exception_ptr producer_error;
  std::thread producer([&] {
    try {
      while (auto chunk = source.next()) {
        if (!queue.push(std::move(*chunk))) break;
      }
    } catch (...) {
      producer_error = std::current_exception();
    }
    queue.close();
  });

  FrameSeries series = correlator.empty_series(config.center_frequency);
  std::exception_ptr consumer_error;
  try {
    while (auto chunk = queue.pop()) {
      auto frames = correlator.push(*chunk);
      std::move(frames.begin(), frames.end(), std::back_inserter(series.frames));
    }
  } catch (...) {
    consumer_error = std::current_exception();
    queue.close();
  }
  producer.join();
  if (producer_error) std::rethrow_exception(producer_error);
  if (consumer_error) std::rethrow_exception(consumer_error);
  series.gate = correlator.gate_record();
  return series;
}

}  // namespace corrsounder
