#include "corrsounder/calib.hpp"
#include "corrsounder/fft.hpp"
#include "corrsounder/sounder.hpp"
#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

using namespace corrsounder;

namespace {

Sequence fzc_at(long n, double fs, long u = 7) { return bind_sample_rate(generate_fzc(n, u), fs); }

std::vector<IqFrame> split(const IqFrame& x, long chunk) {
  std::vector<IqFrame> out;
  for (std::int64_t pos = 0; pos < x.size(); pos += chunk) {
    IqFrame f = x;
    const long len = static_cast<long>(std::min<std::int64_t>(chunk, x.size() - pos));
    f.samples = x.samples.segment(pos, len);
    f.start_index = x.start_index + pos;
    out.push_back(f);
  }
  return out;
}

CVec roll(const CVec& x, long shift) {
  const long n = static_cast<long>(x.size());
  CVec y(n);
  for (long i = 0; i < n; ++i) y(((i + shift) % n + n) % n) = x(i);
  return y;
}

double off_peak_max(const CVec& h, long peak) {
  double m = 0.0;
  for (long i = 0; i < h.size(); ++i) {
    if (i != peak) m = std::max(m, std::abs(h(i)));
  }
  return m;
}

SoundingConfig sounding(const Sequence& seq, long n_sequences, bool discard_first = true) {
  SoundingConfig c;
  c.receiver.sequence = seq;
  c.receiver.discard_first = discard_first;
  c.n_sequences = n_sequences;
  return c;
}

}  // namespace

TEST_CASE("stimulation repeats the sequence") {
  const Sequence s = bind_sample_rate(generate_fzc(4, 1), 1e3);
  const IqFrame x = stimulate(s, 3);
  REQUIRE(x.size() == 12);
  for (long i = 0; i < 12; ++i) CHECK(x.samples(i) == x.samples(i % 4));
  CHECK(x.start_index == 0);
  CHECK_THROWS_AS(stimulate(s, 0), InvalidArgument);
}

TEST_CASE("sequence timing at the reference rate") {
  const auto& t = testing::oracles()["timing"];
  const Sequence s = fzc_at(1024, 100e6);
  CHECK(s.period() == t["t_seq_1024_100msps"].get<double>());
  CHECK(sequences_for_duration(s, 12.0) == t["sequences_12s"].get<long>());
  CHECK(sequences_for_duration(s, 10.24e-6 * 2.5) == 2);
  CHECK_THROWS_AS(sequences_for_duration(s, 0.0), InvalidArgument);
  CHECK(measurement_time(s, 0) == (1024.0 - 1.0) / 100e6);
  CHECK(measurement_time(s, 9) == (10.0 * 1024.0 - 1.0) / 100e6);
}

TEST_CASE("gate with no events passes everything") {
  const Sequence s = fzc_at(16, 1e3, 1);
  const IqFrame x = stimulate(s, 10);
  const auto [blocks, kept] = sequence_gate(split(x, 7), {}, 16);
  REQUIRE(kept.size() == 10);
  for (long i = 0; i < 10; ++i) {
    CHECK(kept[i] == i);
    CHECK(blocks[i].samples == x.samples.segment(16 * i, 16));
  }
}

TEST_CASE("gate drops the disrupted sequence") {
  const Sequence s = fzc_at(16, 1e3, 1);
  const IqFrame x = stimulate(s, 10);
  const auto [blocks, kept] = sequence_gate({x}, {{4 * 16 + 5, TriggerKind::overflow, ""}}, 16);
  CHECK(kept == std::vector<std::int64_t>{0, 1, 2, 3, 5, 6, 7, 8, 9});
}

TEST_CASE("gate drops both sequences around a straddling event") {
  const Sequence s = fzc_at(16, 1e3, 1);
  const IqFrame x = stimulate(s, 10);
  const auto [blocks, kept] = sequence_gate({x}, {{5 * 16 - 1, TriggerKind::external, ""}}, 16, 2);
  CHECK(kept == std::vector<std::int64_t>{0, 1, 2, 3, 6, 7, 8, 9});
  const auto [b1, k1] = sequence_gate({x}, {{5 * 16 - 1, TriggerKind::external, ""}}, 16, 1);
  CHECK(k1.size() == 9);
}

TEST_CASE("event at index 0 drops the first sequence") {
  const Sequence s = fzc_at(16, 1e3, 1);
  const auto [blocks, kept] = sequence_gate({stimulate(s, 10)}, {{0, {}, {}}}, 16);
  CHECK(kept.front() == 1);
  CHECK(kept.size() == 9);
}

TEST_CASE("gate requires boundary-aligned contiguous input") {
  SequenceGate gate(16);
  IqFrame f;
  f.samples = CVecF::Zero(8);
  f.start_index = 3;
  CHECK_THROWS_AS(gate.push(f), InvalidArgument);
  SequenceGate g2(16);
  f.start_index = 0;
  g2.push(f);
  f.start_index = 9;
  CHECK_THROWS_AS(g2.push(f), InvalidArgument);
  CHECK_THROWS_AS(SequenceGate(0), InvalidArgument);
}

TEST_CASE("gate completeness on randomized event placements") {
  std::mt19937_64 rng(2024);
  const long n = 32;
  const long total_seq = 40;
  const Sequence s = fzc_at(n, 1e3, 3);
  const IqFrame x = stimulate(s, total_seq);
  for (int trial = 0; trial < 100; ++trial) {
    const long span = std::uniform_int_distribution<long>(1, 50)(rng);
    const int n_events = std::uniform_int_distribution<int>(0, 6)(rng);
    std::vector<TriggerEvent> events;
    std::int64_t cursor = 0;
    for (int e = 0; e < n_events; ++e) {
      cursor += std::uniform_int_distribution<long>(0, 300)(rng);
      if (cursor >= total_seq * n) break;
      events.push_back({cursor, TriggerKind::overflow, ""});
      cursor += span;
    }
    const long chunk = std::uniform_int_distribution<long>(1, 100)(rng);
    const auto [blocks, kept] = sequence_gate(split(x, chunk), events, n, span);

    std::set<std::int64_t> hit;
    for (const auto& e : events) {
      for (std::int64_t i = e.sample_index; i < std::min<std::int64_t>(e.sample_index + span, total_seq * n); ++i) {
        hit.insert(i / n);
      }
    }
    REQUIRE(static_cast<long>(kept.size() + hit.size()) == total_seq);
    for (auto k : kept) REQUIRE(hit.count(k) == 0);
    REQUIRE(std::is_sorted(kept.begin(), kept.end()));
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      REQUIRE(blocks[i].samples == x.samples.segment(kept[i] * n, n));
    }
  }
}

TEST_CASE("disruption mid-stream then gating keeps 8 or 9 sequences") {
  const long n = 64;
  const Sequence s = fzc_at(n, 1e3, 5);
  const IqFrame x = stimulate(s, 10);
  for (long span : {1L, 10L, 64L}) {
    auto [y, events] = inject_disruption(x, {{5 * n - 3, TriggerKind::overflow, ""}}, span);
    const auto [blocks, kept] = sequence_gate({y}, events, n, span);
    CHECK(kept.size() >= 8);
    CHECK(kept.size() <= 9);
  }
}

TEST_CASE("correlation of a sequence with itself") {
  const Sequence f = fzc_at(1024, 1e6);
  const CVec rf = correlate_sequence(f.samples, f);
  CHECK(std::abs(rf(0) - 1024.0) < 1e-9);
  CHECK(off_peak_max(rf, 0) < 1e-9);

  const Sequence m = bind_sample_rate(generate_mls(10), 1e6);
  const CVec rm = correlate_sequence(m.samples, m);
  CHECK(std::abs(rm(0) - 1023.0) < 1e-9);
  for (long k = 1; k < 1023; ++k) REQUIRE(std::abs(rm(k) + 1.0) < 1e-9);

  for (long d : {1L, 17L, 1000L}) {
    const CVec r = correlate_sequence(roll(f.samples, d), f);
    Eigen::Index peak = 0;
    r.cwiseAbs().maxCoeff(&peak);
    CHECK(peak == d);
  }
  CHECK_THROWS_AS(correlate_sequence(CVec::Zero(10), f), InvalidArgument);
}

TEST_CASE("normalization by the sequence length") {
  const Sequence f = fzc_at(1024, 1e6);
  const CVec hf = normalize(correlate_sequence(f.samples, f), 1024);
  CHECK(std::abs(hf(0) - 1.0) < 1e-12);
  const Sequence m = bind_sample_rate(generate_mls(10), 1e6);
  const CVec hm = normalize(correlate_sequence(m.samples, m), 1023);
  CHECK(std::abs(hm(5).real() - testing::oracles()["mls_1023_normalized_off_peak"].get<double>()) < 1e-15);
  CHECK(normalize(CVec::Zero(8), 8) == CVec::Zero(8));
}

TEST_CASE("FTT correction") {
  std::mt19937_64 rng(1);
  ImpulseResponseFrame frame;
  frame.h = testing::random_cvec(rng, 64);
  const auto same = correct_ftt(frame, std::nullopt);
  CHECK(same.h == frame.h);
  CHECK_FALSE(same.corrected);

  const auto id = correct_ftt(frame, identity_profile(64));
  CHECK((id.h - frame.h).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(id.corrected);

  // Cable-distorted delta, corrected with the exact inverse.
  CVec cable = CVec::Zero(64);
  cable(0) = 1.0;
  cable(2) = 0.3;
  CVec inv = fft(cable).cwiseInverse();
  ImpulseResponseFrame distorted;
  distorted.h = cable;
  const auto fixed = correct_ftt(distorted, profile_from_spectrum(inv, ProfileSource::through, 40.0, 1, {}));
  CHECK(std::abs(fixed.h(0) - 1.0) < 1e-12);
  CHECK(20.0 * std::log10(off_peak_max(fixed.h, 0)) <= -60.0);

  CHECK_THROWS_AS(correct_ftt(frame, identity_profile(32)), InvalidArgument);
}

TEST_CASE("identity campaign recovers delta frames") {
  const Sequence f = fzc_at(1024, 1e6);
  const FrameSeries series = run_sounding(sounding(f, 100, false), identity_channel());
  REQUIRE(series.frames.size() == 100);
  for (std::size_t i = 0; i < series.frames.size(); ++i) {
    const auto& fr = series.frames[i];
    REQUIRE(fr.sequence_index == static_cast<std::int64_t>(i));
    REQUIRE(fr.t_i == measurement_time(f, fr.sequence_index));
    REQUIRE(std::abs(fr.h(0) - 1.0) < 1e-6);
    REQUIRE(20.0 * std::log10(off_peak_max(fr.h, 0)) <= -120.0);
  }
  CHECK(series.n_seq == 1024);
  CHECK(series.sequence_descriptor == "fzc/1024/7");

  const Sequence m = bind_sample_rate(generate_mls(10), 1e6);
  const FrameSeries ms = run_sounding(sounding(m, 5, false), identity_channel());
  for (const auto& fr : ms.frames) {
    REQUIRE(off_peak_max(fr.h, 0) <= 1.0 / 1023.0 + 1e-7);
  }
}

TEST_CASE("first frame is discarded by default") {
  const Sequence f = fzc_at(256, 1e6);
  const FrameSeries s = run_sounding(sounding(f, 10), identity_channel());
  REQUIRE(s.frames.size() == 9);
  CHECK(s.frames.front().sequence_index == 1);
  CHECK(s.gate.discarded == std::vector<std::int64_t>{0});
  CHECK(s.gate.total_blocks == 10);
}

TEST_CASE("static multipath is recovered tap by tap") {
  const Sequence f = fzc_at(1024, 1e6);
  ChannelModel m;
  m.taps = {ChannelTap{0, 1.0, 0.0}, ChannelTap{10, {0.0, 0.5}, 0.0}};
  const FrameSeries two = run_sounding(sounding(f, 4), m);
  for (const auto& fr : two.frames) {
    CHECK(std::abs(fr.h(0) - 1.0) < 1e-6);
    CHECK(std::abs(fr.h(10) - std::complex<double>(0.0, 0.5)) < 1e-6);
    CVec rest = fr.h;
    rest(0) = rest(10) = 0.0;
    CHECK(rest.cwiseAbs().maxCoeff() < 1e-6);
  }

  m.taps = {ChannelTap{0, {0.9, 0.1}, 0.0}, ChannelTap{7, {-0.3, 0.4}, 0.0}, ChannelTap{31, {0.05, -0.2}, 0.0}};
  const FrameSeries three = run_sounding(sounding(f, 6), m);
  REQUIRE(three.frames.size() == 5);
  for (const auto& fr : three.frames) {
    for (const auto& t : m.taps) REQUIRE(std::abs(fr.h(t.delay) - t.gain) <= 1e-6 * std::abs(t.gain));
  }
}

TEST_CASE("sounding output does not depend on chunking or threading") {
  const Sequence f = fzc_at(128, 1e6, 3);
  ChannelModel m;
  m.taps = {ChannelTap{0, 1.0, 20.0}, ChannelTap{9, {0.2, 0.1}, -40.0}};
  m.snr_db = 15.0;
  m.seed = 3;
  m.cfo_hz = 30.0;
  SoundingConfig c = sounding(f, 30);
  c.events = {{700, TriggerKind::overflow, ""}, {2000, TriggerKind::external, "x"}};
  c.receiver.event_span = 40;
  c.chunk_size = 4096;
  const FrameSeries ref = run_sounding(c, m);

  for (long chunk : {1L, 127L, 128L, 1000L}) {
    c.chunk_size = chunk;
    StimulationSource src(c, m);
    Correlator corr(c.receiver);
    for (const auto& e : src.events()) corr.add_event(e);
    std::vector<ImpulseResponseFrame> frames;
    while (auto x = src.next()) {
      auto out = corr.push(*x);
      frames.insert(frames.end(), out.begin(), out.end());
    }
    REQUIRE(frames.size() == ref.frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      REQUIRE(frames[i].h == ref.frames[i].h);
      REQUIRE(frames[i].sequence_index == ref.frames[i].sequence_index);
    }
    CHECK(corr.gate_record() == ref.gate);
  }
  CHECK(ref.gate.dropped == std::vector<std::int64_t>{5, 15});
}

TEST_CASE("stimulation source validates events") {
  const Sequence f = fzc_at(16, 1e3, 1);
  SoundingConfig c = sounding(f, 4);
  c.events = {{64, {}, {}}};
  CHECK_THROWS_AS(StimulationSource(c, identity_channel()), InvalidArgument);
  c.events = {{3, {}, {}}, {4, {}, {}}};
  c.receiver.event_span = 2;
  CHECK_THROWS_AS(StimulationSource(c, identity_channel()), InvalidArgument);
  c.events = {};
  c.n_sequences = 0;
  CHECK_THROWS_AS(StimulationSource(c, identity_channel()), InvalidArgument);
}

TEST_CASE("correlator rejects a mismatched profile") {
  CorrelatorConfig rc;
  rc.sequence = fzc_at(64, 1e3, 1);
  rc.profile = identity_profile(32);
  CHECK_THROWS_AS(Correlator(rc), InvalidArgument);
  rc.profile.reset();
  rc.sequence = generate_fzc(64, 1);
  CHECK_THROWS_AS(Correlator(rc), InvalidArgument);
}
