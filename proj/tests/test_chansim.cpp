#include "corrsounder/chansim.hpp"
#include "corrsounder/error.hpp"
#include "corrsounder/seqgen.hpp"
#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace corrsounder;

namespace {

IqFrame frame_of(const CVec& x, double fs = 1e6, std::int64_t start = 0) {
  IqFrame f;
  f.samples = x.cast<std::complex<float>>();
  f.sample_rate = fs;
  f.start_index = start;
  return f;
}

IqFrame random_frame(std::mt19937_64& rng, long n, double fs = 1e6) {
  return frame_of(testing::random_cvec(rng, n) / std::sqrt(2.0), fs);
}

double power(const CVecF& x) { return x.cast<std::complex<double>>().squaredNorm() / static_cast<double>(x.size()); }

}  // namespace

TEST_CASE("identity channel is a passthrough") {
  std::mt19937_64 rng(1);
  const IqFrame x = random_frame(rng, 512);
  const IqFrame y = apply_channel(x, identity_channel());
  CHECK(y.samples == x.samples);
  CHECK(y.start_index == x.start_index);
  CHECK(y.sample_rate == x.sample_rate);
}

TEST_CASE("single delayed tap shifts and scales an impulse") {
  CVec d = CVec::Zero(32);
  d(0) = 1.0;
  ChannelModel m;
  m.taps = {ChannelTap{5, 0.5, 0.0}};
  const IqFrame y = apply_channel(frame_of(d), m);
  for (long i = 0; i < 32; ++i) CHECK(y.samples(i) == std::complex<float>(i == 5 ? 0.5f : 0.0f, 0.0f));
}

TEST_CASE("apply_channel rejects taps that do not fit the frame") {
  ChannelModel m;
  m.taps = {ChannelTap{32, 1.0, 0.0}};
  CHECK_THROWS_AS(apply_channel(frame_of(CVec::Ones(32)), m), InvalidArgument);
  m.taps = {};
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m.taps = {ChannelTap{-1, 1.0, 0.0}};
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
}

TEST_CASE("channel is linear and power preserving") {
  std::mt19937_64 rng(2);
  const CVec xd = testing::random_cvec(rng, 1024) / std::sqrt(2.0);
  ChannelModel m;
  m.taps = {ChannelTap{0, {0.8, 0.1}, 3.0}, ChannelTap{7, {0.0, 0.4}, -11.0}};
  const IqFrame y1 = apply_channel(frame_of(xd), m, 0.25);
  const std::complex<double> a(0.5, -1.5);
  // Scale after casting so both paths see the same single-precision input.
  IqFrame xa = frame_of(xd);
  IqFrame ya_in = xa;
  ya_in.samples = (xa.samples.cast<std::complex<double>>() * a).cast<std::complex<float>>();
  const IqFrame ya = apply_channel(ya_in, m, 0.25);
  const CVec lhs = ya.samples.cast<std::complex<double>>();
  const CVec rhs = y1.samples.cast<std::complex<double>>() * a;
  CHECK((lhs - rhs).norm() <= 1e-6 * rhs.norm());

  const IqFrame x = random_frame(rng, 4096);
  const IqFrame y = apply_channel(x, identity_channel());
  CHECK(std::abs(power(y.samples) - power(x.samples)) <= 1e-12 * power(x.samples));
}

TEST_CASE("CFO rotates at the configured rate") {
  const IqFrame ones = frame_of(CVec::Ones(4), 4.0);
  const IqFrame y = apply_cfo(ones, 1.0);
  const CVec want = testing::to_cvec(testing::oracles()["cfo_quarter"]);
  for (long i = 0; i < 4; ++i) CHECK(std::abs(std::complex<double>(y.samples(i)) - want(i)) < 1e-7);
  CHECK(apply_cfo(ones, 0.0).samples == ones.samples);
  CHECK_THROWS_AS(apply_cfo(ones, 2.0), InvalidArgument);
  CHECK_THROWS_AS(apply_cfo(ones, -2.5), InvalidArgument);
}

TEST_CASE("CFO phase is continuous across frames") {
  const CVec x = CVec::Ones(64);
  const IqFrame whole = apply_cfo(frame_of(x, 1000.0), 37.0);
  const IqFrame second = apply_cfo(frame_of(x.tail(32), 1000.0, 32), 37.0);
  for (long i = 0; i < 32; ++i) CHECK(second.samples(i) == whole.samples(32 + i));
}

TEST_CASE("AWGN power, determinism and infinite SNR") {
  const long n = 1'000'000;
  const IqFrame x = frame_of(CVec::Ones(n));
  const IqFrame y = add_awgn(x, 0.0, 42);
  const CVec noise = y.samples.cast<std::complex<double>>() - CVec::Ones(n);
  const double p = noise.squaredNorm() / static_cast<double>(n);
  CHECK(std::abs(p - 1.0) <= 0.01);
  CHECK(add_awgn(x, 0.0, 42).samples == y.samples);
  CHECK(add_awgn(x, 0.0, 43).samples != y.samples);
  const IqFrame z = add_awgn(x, std::numeric_limits<double>::infinity(), 42);
  CHECK(z.samples == x.samples);

  const IqFrame y20 = add_awgn(x, 20.0, 5);
  const double p20 = (y20.samples.cast<std::complex<double>>() - CVec::Ones(n)).squaredNorm() / n;
  CHECK(std::abs(p20 - 0.01) <= 0.0001);
}

TEST_CASE("noise is keyed by global index, not by framing") {
  ChannelModel m;
  m.snr_db = 10.0;
  m.seed = 9;
  m.taps = {ChannelTap{0, 1.0, 0.0}, ChannelTap{3, {0.2, 0.3}, 25.0}};
  m.cfo_hz = 120.0;
  m.cable = CVec::Zero(2);
  m.cable << 1.0, 0.2;
  std::mt19937_64 rng(4);
  const CVec x = testing::random_cvec(rng, 1000) / std::sqrt(2.0);

  ChannelSimulator whole(m);
  const IqFrame a = whole.process(frame_of(x, 1e4));
  ChannelSimulator parts(m);
  CVecF b(1000);
  long pos = 0;
  for (long len : {1L, 99L, 300L, 7L, 593L}) {
    const IqFrame part = parts.process(frame_of(x.segment(pos, len), 1e4, pos));
    b.segment(pos, len) = part.samples;
    pos += len;
  }
  CHECK(b == a.samples);
}

TEST_CASE("simulator requires contiguous frames") {
  ChannelSimulator sim(identity_channel());
  sim.process(frame_of(CVec::Ones(8)));
  CHECK_THROWS_AS(sim.process(frame_of(CVec::Ones(8), 1e6, 9)), InvalidArgument);
}

TEST_CASE("channel application is deterministic") {
  ChannelModel m;
  m.snr_db = 3.0;
  m.seed = 77;
  m.taps = {ChannelTap{2, {0.1, 0.9}, 4.0}};
  std::mt19937_64 rng(5);
  const IqFrame x = random_frame(rng, 256);
  CHECK(apply_channel(x, m, 0.5).samples == apply_channel(x, m, 0.5).samples);
}

TEST_CASE("inject_disruption zeroes event spans") {
  const IqFrame x = frame_of(CVec::Ones(100));
  auto [same, none] = inject_disruption(x, {}, 4);
  CHECK(same.samples == x.samples);
  CHECK(none.empty());

  auto [y, ev] = inject_disruption(x, {{30, TriggerKind::external, "b"}, {10, TriggerKind::overflow, "a"}}, 4);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].sample_index == 10);
  for (long i = 0; i < 100; ++i) {
    const bool hit = (i >= 10 && i < 14) || (i >= 30 && i < 34);
    CHECK(y.samples(i) == std::complex<float>(hit ? 0.0f : 1.0f, 0.0f));
  }
  CHECK_THROWS_AS(inject_disruption(x, {{10, {}, {}}, {12, {}, {}}}, 4), InvalidArgument);
  CHECK_THROWS_AS(inject_disruption(x, {{100, {}, {}}}, 1), InvalidArgument);
  CHECK_THROWS_AS(inject_disruption(x, {{-1, {}, {}}}, 1), InvalidArgument);
}

TEST_CASE("interferers and DC offset add the configured power") {
  const long n = 1 << 16;
  const IqFrame zero = frame_of(CVec::Zero(n));
  ChannelModel m;
  m.taps = {ChannelTap{0, 0.0, 0.0}};
  m.interferer.kind = Interferer::Kind::qpsk;
  m.interferer.power_db = -6.0;
  const IqFrame q = apply_channel(zero, m);
  CHECK(std::abs(power(q.samples) - std::pow(10.0, -0.6)) < 1e-6);

  m.interferer.kind = Interferer::Kind::tone;
  m.interferer.freq_hz = 1000.0;
  m.interferer.power_db = 0.0;
  CHECK(std::abs(power(apply_channel(zero, m).samples) - 1.0) < 1e-6);

  m.interferer = Interferer{};
  m.dc_offset = {0.1, -0.2};
  const IqFrame dc = apply_channel(zero, m);
  CHECK(std::abs(std::complex<double>(dc.samples(17)) - m.dc_offset) < 1e-7);
}

TEST_CASE("gaussian pairs are deterministic and standard") {
  CHECK(gaussian_pair(1, 5) == gaussian_pair(1, 5));
  CHECK(gaussian_pair(1, 5) != gaussian_pair(2, 5));
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto [a, b] = gaussian_pair(3, static_cast<std::uint64_t>(i));
    s += a + b;
    s2 += a * a + b * b;
  }
  CHECK(std::abs(s / (2 * n)) < 0.01);
  CHECK(std::abs(s2 / (2 * n) - 1.0) < 0.01);
}
