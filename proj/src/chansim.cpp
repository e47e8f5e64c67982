#include "corrsounder/chansim.hpp"

#include "corrsounder/error.hpp"
#include "corrsounder/seqgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace corrsounder {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// exp(j 2 pi cycles), evaluated on the fractional part of `cycles`.
std::complex<double> rotation(double cycles) {
  const double frac = cycles - std::floor(cycles);
  return std::polar(1.0, 2.0 * std::numbers::pi * frac);
}

double cycles_at(double freq_hz, std::int64_t index, double fs) {
  const double per_sample = freq_hz / fs;
  return per_sample * static_cast<double>(index);
}

void check_rate(const IqFrame& x) {
  if (!(x.sample_rate > 0.0)) throw InvalidArgument("frame sample rate must be positive");
}

}  // namespace

std::pair<double, double> gaussian_pair(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed ^ splitmix64(index));
  const std::uint64_t b = splitmix64(a);
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * scale;  // (0, 1]
  const double u2 = static_cast<double>(b >> 11) * scale;          // [0, 1)
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(th), r * std::sin(th)};
}

long ChannelModel::memory() const {
  long d = 0;
  for (const auto& t : taps) d = std::max(d, t.delay);
  return d + std::max<long>(0, static_cast<long>(cable.size()) - 1);
}

void ChannelModel::validate() const {
  if (taps.empty()) throw InvalidArgument("channel model needs at least one tap");
  for (const auto& t : taps) {
    if (t.delay < 0) throw InvalidArgument("tap delay must be >= 0");
  }
  if (snr_db && std::isnan(*snr_db)) throw InvalidArgument("snr_db is NaN");
  if (interferer.kind == Interferer::Kind::fzc && interferer.length < 2) {
    throw InvalidArgument("FZC interferer needs a length >= 2");
  }
}

ChannelModel identity_channel() { return ChannelModel{}; }

ChannelSimulator::ChannelSimulator(ChannelModel model, double t0) : model_(std::move(model)), t0_(t0) {
  model_.validate();
  long max_delay = 0;
  for (const auto& t : model_.taps) max_delay = std::max(max_delay, t.delay);
  tap_history_ = CVec::Zero(max_delay);
  cable_history_ = CVec::Zero(std::max<long>(0, static_cast<long>(model_.cable.size()) - 1));
  if (model_.interferer.kind == Interferer::Kind::fzc) {
    interferer_ = generate_fzc(model_.interferer.length, model_.interferer.root);
  }
}

IqFrame ChannelSimulator::process(const IqFrame& frame) {
  check_rate(frame);
  if (next_index_ && *next_index_ != frame.start_index) {
    throw InvalidArgument("channel simulator frames must be contiguous");
  }
  next_index_ = frame.end_index();

  const long n = static_cast<long>(frame.size());
  const long hist = static_cast<long>(tap_history_.size());
  const double fs = frame.sample_rate;

  CVec ext(hist + n);
  ext.head(hist) = tap_history_;
  ext.tail(n) = frame.samples.cast<std::complex<double>>();

  CVec multipath = CVec::Zero(n);
  for (const auto& tap : model_.taps) {
    const long offset = hist - tap.delay;
    if (tap.doppler_hz == 0.0) {
      multipath += tap.gain * ext.segment(offset, n);
      continue;
    }
    const double base_cycles = tap.doppler_hz * t0_;
    for (long i = 0; i < n; ++i) {
      const double c = base_cycles + cycles_at(tap.doppler_hz, frame.start_index + i, fs);
      multipath(i) += tap.gain * rotation(c) * ext(offset + i);
    }
  }
  if (hist > 0) tap_history_ = ext.tail(hist);

  CVec out;
  if (model_.cable.size() == 0) {
    out = std::move(multipath);
  } else {
    const long ch = static_cast<long>(cable_history_.size());
    CVec mext(ch + n);
    mext.head(ch) = cable_history_;
    mext.tail(n) = multipath;
    out = CVec::Zero(n);
    for (long k = 0; k < static_cast<long>(model_.cable.size()); ++k) {
      out += model_.cable(k) * mext.segment(ch - k, n);
    }
    if (ch > 0) cable_history_ = mext.tail(ch);
  }

  if (model_.dc_offset != std::complex<double>{0.0, 0.0}) {
    out.array() += model_.dc_offset;
  }
  if (model_.interferer.kind != Interferer::Kind::none) {
    const Interferer& itf = model_.interferer;
    const double amp = std::pow(10.0, itf.power_db / 20.0);
    for (long i = 0; i < n; ++i) {
      const std::int64_t g = frame.start_index + i;
      std::complex<double> v;
      switch (itf.kind) {
        case Interferer::Kind::fzc:
          v = interferer_.samples(g % itf.length);
          break;
        case Interferer::Kind::qpsk: {
          const std::uint64_t r = splitmix64(itf.seed ^ splitmix64(static_cast<std::uint64_t>(g) + 0x51ed2701ULL));
          v = std::complex<double>((r & 1) ? -1.0 : 1.0, (r & 2) ? -1.0 : 1.0) / std::numbers::sqrt2;
          break;
        }
        case Interferer::Kind::tone:
          v = rotation(cycles_at(itf.freq_hz, g, fs));
          break;
        case Interferer::Kind::none:
          break;
      }
      out(i) += amp * v;
    }
  }
  if (model_.cfo_hz != 0.0) {
    for (long i = 0; i < n; ++i) out(i) *= rotation(cycles_at(model_.cfo_hz, frame.start_index + i, fs));
  }
  if (model_.snr_db && std::isfinite(*model_.snr_db)) {
    const double sigma = std::sqrt(std::pow(10.0, -*model_.snr_db / 10.0) / 2.0);
    for (long i = 0; i < n; ++i) {
      const auto [g1, g2] = gaussian_pair(model_.seed, static_cast<std::uint64_t>(frame.start_index + i));
      out(i) += std::complex<double>(sigma * g1, sigma * g2);
    }
  }

  IqFrame y = frame;
  y.samples = out.cast<std::complex<float>>();
  return y;
}

IqFrame apply_channel(const IqFrame& x, const ChannelModel& model, double t0) {
  model.validate();
  for (const auto& t : model.taps) {
    if (t.delay >= x.size()) throw InvalidArgument("tap delay must be shorter than the frame");
  }
  ChannelSimulator sim(model, t0);
  return sim.process(x);
}

IqFrame apply_cfo(const IqFrame& x, double cfo_hz) {
  check_rate(x);
  if (!(std::abs(cfo_hz) < x.sample_rate / 2.0)) throw InvalidArgument("|cfo| must be below fs / 2");
  IqFrame y = x;
  if (cfo_hz == 0.0) return y;
  for (long i = 0; i < static_cast<long>(x.size()); ++i) {
    const auto r = rotation(cycles_at(cfo_hz, x.start_index + i, x.sample_rate));
    y.samples(i) = std::complex<float>(std::complex<double>(x.samples(i)) * r);
  }
  return y;
}

IqFrame add_awgn(const IqFrame& x, double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db)) throw InvalidArgument("snr_db is NaN");
  IqFrame y = x;
  if (std::isinf(snr_db) && snr_db > 0) return y;
  const double sigma = std::sqrt(std::pow(10.0, -snr_db / 10.0) / 2.0);
  for (long i = 0; i < static_cast<long>(x.size()); ++i) {
    const auto [g1, g2] = gaussian_pair(seed, static_cast<std::uint64_t>(x.start_index + i));
    y.samples(i) = std::complex<float>(std::complex<double>(x.samples(i)) + std::complex<double>(sigma * g1, sigma * g2));
  }
  return y;
}

std::pair<IqFrame, std::vector<TriggerEvent>> inject_disruption(const IqFrame& x,
                                                                std::vector<TriggerEvent> events,
                                                                long corrupt_span) {
  if (corrupt_span < 1) throw InvalidArgument("corrupt span must be >= 1");
  std::stable_sort(events.begin(), events.end(),
                   [](const TriggerEvent& a, const TriggerEvent& b) { return a.sample_index < b.sample_index; });
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].sample_index < x.start_index || events[i].sample_index >= x.end_index()) {
      throw InvalidArgument("trigger event at " + std::to_string(events[i].sample_index) + " outside the frame");
    }
    if (i > 0 && events[i - 1].sample_index + corrupt_span > events[i].sample_index) {
      throw InvalidArgument("overlapping disruption spans at " + std::to_string(events[i].sample_index));
    }
  }
  IqFrame y = x;
  for (const auto& ev : events) {
    const std::int64_t lo = ev.sample_index - x.start_index;
    const std::int64_t hi = std::min<std::int64_t>(lo + corrupt_span, x.size());
    y.samples.segment(lo, hi - lo).setZero();
  }
  return {std::move(y), std::move(events)};
}

}  // namespace corrsounder
