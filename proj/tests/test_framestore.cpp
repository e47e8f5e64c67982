#include "corrsounder/framestore.hpp"
#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>

using namespace corrsounder;

namespace {

const std::string kCorpus = std::string(CORRSOUNDER_DATA_DIR) + "/malformed/";

CaptureInfo info_for(std::int64_t samples) {
  CaptureInfo info;
  info.sample_rate = 1e6;
  info.center_frequency = 5.8e9;
  info.sequence_descriptor = "fzc/1024/7";
  info.seed = 42;
  info.samples = samples;
  return info;
}

IqFrame random_frame(std::mt19937_64& rng, long n, std::int64_t start = 0) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  IqFrame f;
  f.sample_rate = 1e6;
  f.center_frequency = 5.8e9;
  f.start_index = start;
  f.samples.resize(n);
  for (long i = 0; i < n; ++i) f.samples(i) = {u(rng), u(rng)};
  return f;
}

bool bitwise_equal(const CVecF& a, const CVecF& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(a(0))) == 0;
}

FrameSeries random_series(std::mt19937_64& rng, long n_seq, long frames, std::vector<std::int64_t> gaps) {
  FrameSeries s;
  s.n_seq = n_seq;
  s.sample_period = 1e-6;
  s.sequence_period = n_seq * 1e-6;
  s.center_frequency = 5.8e9;
  s.sequence_descriptor = "fzc/" + std::to_string(n_seq) + "/7";
  s.calibration_reference = "through.cal";
  s.gate.total_blocks = frames + static_cast<long>(gaps.size()) + 1;
  s.gate.dropped = gaps;
  s.gate.discarded = {0};
  std::int64_t idx = 1;
  for (long i = 0; i < frames; ++i, ++idx) {
    while (std::find(gaps.begin(), gaps.end(), idx) != gaps.end()) ++idx;
    ImpulseResponseFrame f;
    f.h = testing::random_cvec(rng, n_seq);
    f.sequence_index = idx;
    f.t_i = (static_cast<double>(idx + 1) * n_seq - 1) * 1e-6;
    f.corrected = i % 2 == 0;
    s.frames.push_back(f);
  }
  return s;
}

void require_same(const FrameSeries& a, const FrameSeries& b) {
  REQUIRE(a.n_seq == b.n_seq);
  REQUIRE(a.sample_period == b.sample_period);
  REQUIRE(a.sequence_period == b.sequence_period);
  REQUIRE(a.center_frequency == b.center_frequency);
  REQUIRE(a.sequence_descriptor == b.sequence_descriptor);
  REQUIRE(a.calibration_reference == b.calibration_reference);
  REQUIRE(a.gate == b.gate);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    REQUIRE(a.frames[i].sequence_index == b.frames[i].sequence_index);
    REQUIRE(a.frames[i].t_i == b.frames[i].t_i);
    REQUIRE(a.frames[i].corrected == b.frames[i].corrected);
    REQUIRE(a.frames[i].h == b.frames[i].h);
  }
}

}  // namespace

TEST_CASE("capture round trip is bitwise") {
  testing::TempDir dir("capture");
  std::mt19937_64 rng(1);
  const IqFrame f = random_frame(rng, 1000000, 0);
  write_capture(dir.file("a.iq"), f, info_for(0));
  CaptureInfo info;
  const IqFrame g = read_capture(dir.file("a.iq"), &info);
  CHECK(bitwise_equal(f.samples, g.samples));
  CHECK(info.samples == 1000000);
  CHECK(info.sequence_descriptor == "fzc/1024/7");
  CHECK(info.seed == 42);
  CHECK(g.sample_rate == 1e6);
  CHECK(testing::slurp(dir.file("a.iq")).size() == 8000000);
}

TEST_CASE("capture writer streams chunks and the reader splits them") {
  testing::TempDir dir("capture-stream");
  std::mt19937_64 rng(2);
  const IqFrame a = random_frame(rng, 300, 1000);
  const IqFrame b = random_frame(rng, 200, 1300);
  {
    CaptureInfo info = info_for(0);
    info.start_index = 1000;
    CaptureWriter w(dir.file("s.iq"), info);
    w.write(a);
    w.write(b);
    CHECK_THROWS_AS(w.write(random_frame(rng, 5, 9999)), InvalidArgument);
    w.close();
  }
  CaptureReader r(dir.file("s.iq"));
  CHECK(r.info().samples == 500);
  CHECK(r.info().start_index == 1000);
  std::vector<IqFrame> parts;
  while (auto f = r.next(128)) parts.push_back(*f);
  REQUIRE(parts.size() == 4);
  CHECK(parts[3].size() == 500 - 3 * 128);
  CHECK(parts[2].start_index == 1256);
  CVecF joined(500);
  long at = 0;
  for (const auto& p : parts) {
    joined.segment(at, p.size()) = p.samples;
    at += p.size();
  }
  CVecF expect(500);
  expect << a.samples, b.samples;
  CHECK(bitwise_equal(joined, expect));
}

TEST_CASE("capture errors") {
  testing::TempDir dir("capture-err");
  std::mt19937_64 rng(3);
  write_capture(dir.file("c.iq"), random_frame(rng, 4), info_for(0));

  testing::spit(dir.file("c.iq"), "1234567");
  CHECK_THROWS_AS(read_capture(dir.file("c.iq")), FormatError);

  write_capture(dir.file("v.iq"), random_frame(rng, 4), info_for(0));
  std::string meta = testing::slurp(dir.file("v.iq.meta"));
  meta.replace(meta.find("version = 1"), 11, "version = 99");
  testing::spit(dir.file("v.iq.meta"), meta);
  try {
    read_capture(dir.file("v.iq"));
    FAIL("expected a version error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version 99") != std::string::npos);
  }

  write_capture(dir.file("m.iq"), random_frame(rng, 4), info_for(0));
  std::filesystem::remove(dir.file("m.iq.meta"));
  CHECK_THROWS_AS(read_capture(dir.file("m.iq")), IoError);
  CHECK_THROWS_AS(read_capture(dir.file("absent.iq")), IoError);
}

TEST_CASE("frame series round trip keeps gaps and timestamps") {
  testing::TempDir dir("frames");
  std::mt19937_64 rng(4);
  const FrameSeries s = random_series(rng, 64, 100, {4});
  write_frames(dir.file("s.frames"), s);
  const FrameSeries t = read_frames(dir.file("s.frames"));
  require_same(s, t);
  CHECK(t.frames[2].sequence_index == 3);
  CHECK(t.frames[3].sequence_index == 5);
  CHECK(t.gate.dropped == std::vector<std::int64_t>{4});

  write_frames(dir.file("again.frames"), t);
  CHECK(testing::slurp(dir.file("again.frames")) == testing::slurp(dir.file("s.frames")));
}

TEST_CASE("empty frame series is a valid file") {
  testing::TempDir dir("frames-empty");
  std::mt19937_64 rng(5);
  const FrameSeries s = random_series(rng, 16, 0, {});
  write_frames(dir.file("e.frames"), s);
  const FrameSeries t = read_frames(dir.file("e.frames"));
  CHECK(t.frames.empty());
  CHECK(t.n_seq == 16);
}

TEST_CASE("corrupted frame records report the record index") {
  testing::TempDir dir("frames-bad");
  std::mt19937_64 rng(6);
  const long n_seq = 8;
  write_frames(dir.file("s.frames"), random_series(rng, n_seq, 10, {}));
  std::string raw = testing::slurp(dir.file("s.frames"));
  const std::size_t header = 16 + le::get_u32(reinterpret_cast<const unsigned char*>(raw.data()) + 12);
  const std::size_t rec = 21 + 16 * n_seq;
  raw[header + 6 * rec + 1] ^= 0x5a;
  testing::spit(dir.file("s.frames"), raw);
  try {
    read_frames(dir.file("s.frames"));
    FAIL("expected a record error");
  } catch (const FormatError& e) {
    CHECK(e.location() == 6);
  }

  CHECK_THROWS_AS(write_frames(dir.file("x.frames"), [&] {
                    FrameSeries s = random_series(rng, n_seq, 2, {});
                    s.frames[1].h = CVec::Zero(3);
                    return s;
                  }()),
                  InvalidArgument);
  CHECK_THROWS_AS(read_frames(dir.file("absent.frames")), IoError);
}

TEST_CASE("trigger log round trip and sorting") {
  testing::TempDir dir("triggers");
  const std::vector<TriggerEvent> events = {
      {100, TriggerKind::overflow, "rx buffer"},
      {2048, TriggerKind::external, "robot, start"},
      {4096, TriggerKind::overflow, ""},
  };
  write_trigger_log(dir.file("t.log"), events);
  CHECK(read_trigger_log(dir.file("t.log")) == events);

  testing::spit(dir.file("o.log"), "# unordered\n300,external,c\n\n100,overflow,a\n200,overflow,b\n");
  const auto sorted = read_trigger_log(dir.file("o.log"));
  REQUIRE(sorted.size() == 3);
  CHECK(sorted[0].sample_index == 100);
  CHECK(sorted[1].note == "b");
  CHECK(sorted[2].kind == TriggerKind::external);

  testing::spit(dir.file("k.log"), "1,overflow,a\n2,overflow,b\n3,lightning,c\n");
  try {
    read_trigger_log(dir.file("k.log"));
    FAIL("expected a kind error");
  } catch (const FormatError& e) {
    CHECK(e.location() == 3);
  }
  CHECK_THROWS_AS(write_trigger_log(dir.file("n.log"), {{1, TriggerKind::overflow, "two\nlines"}}),
                  InvalidArgument);
}

TEST_CASE("calibration profile round trip") {
  testing::TempDir dir("profile");
  std::mt19937_64 rng(7);
  const CalibrationProfile p =
      profile_from_time_domain(testing::random_cvec(rng, 32), ProfileSource::through, 35.0, 9, {3, 17});
  write_profile(dir.file("p.cal"), p);
  const CalibrationProfile q = read_profile(dir.file("p.cal"));
  CHECK(q.h_ftt == p.h_ftt);
  CHECK(q.spectrum == p.spectrum);
  CHECK(q.source == ProfileSource::through);
  CHECK(q.gain_cap_db == 35.0);
  CHECK(q.created_from == 9);
  CHECK(q.clamped_bins == std::vector<long>{3, 17});
}

TEST_CASE("readers reject the malformed corpus") {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(kCorpus)) {
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".meta") || name.ends_with(".py")) continue;
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  REQUIRE(names.size() >= 30);
  for (const auto& name : names) {
    INFO(name);
    const std::string path = kCorpus + name;
    if (name.starts_with("capture_")) {
      CHECK_THROWS_AS(read_capture(path), Error);
    } else if (name.starts_with("frames_")) {
      CHECK_THROWS_AS(read_frames(path), FormatError);
    } else if (name.starts_with("trigger_")) {
      CHECK_THROWS_AS(read_trigger_log(path), FormatError);
    } else if (name.starts_with("profile_")) {
      CHECK_THROWS_AS(read_profile(path), Error);
    } else {
      FAIL("unclassified corpus file");
    }
  }
}

TEST_CASE("little-endian codecs") {
  std::string b;
  le::put_u16(b, 0x0102);
  le::put_u32(b, 0x03040506);
  le::put_u64(b, 0x0708090a0b0c0d0eULL);
  le::put_f32(b, -1.5f);
  le::put_f64(b, 6.25);
  REQUIRE(b.size() == 26);
  CHECK(static_cast<unsigned char>(b[0]) == 0x02);
  CHECK(static_cast<unsigned char>(b[2]) == 0x06);
  const auto* p = reinterpret_cast<const unsigned char*>(b.data());
  CHECK(le::get_u16(p) == 0x0102);
  CHECK(le::get_u32(p + 2) == 0x03040506);
  CHECK(le::get_u64(p + 6) == 0x0708090a0b0c0d0eULL);
  CHECK(le::get_f32(p + 14) == -1.5f);
  CHECK(le::get_f64(p + 18) == 6.25);
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(-INFINITY) == "-inf");
}
