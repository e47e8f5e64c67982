#include "corrsounder/seqgen.hpp"

#include "corrsounder/corrmath.hpp"
#include "corrsounder/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace corrsounder {

namespace {

// Largest length for which the generator also runs the FFT-based PACF
// self-check; above it the period check alone decides.
constexpr long kPacfSelfCheckLimit = 1L << 18;

long parse_long(const std::string& text, const char* what, const std::string& descriptor) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(text, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) {
    throw InvalidArgument(std::string("bad ") + what + " in descriptor '" + descriptor + "'");
  }
  return v;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw InvalidArgument("bad integer list '" + text + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

double Sequence::sample_period() const {
  if (!sample_rate) throw InvalidArgument("sequence has no sample rate bound");
  return 1.0 / *sample_rate;
}

double Sequence::period() const {
  if (!sample_rate) throw InvalidArgument("sequence has no sample rate bound");
  return static_cast<double>(length()) / *sample_rate;
}

std::string Sequence::descriptor() const {
  std::ostringstream os;
  os << to_string(family) << '/' << length() << '/';
  if (family == SequenceFamily::fzc) {
    os << root;
  } else {
    for (std::size_t i = 0; i < feedback_taps.size(); ++i) {
      if (i) os << ',';
      os << feedback_taps[i];
    }
  }
  return os.str();
}

std::string to_string(SequenceFamily family) {
  return family == SequenceFamily::mls ? "mls" : "fzc";
}

std::vector<int> default_mls_taps(int register_length) {
  switch (register_length) {
    case 2: return {2, 1};
    case 3: return {3, 2};
    case 4: return {4, 3};
    case 5: return {5, 3};
    case 6: return {6, 5};
    case 7: return {7, 6};
    case 8: return {8, 6, 5, 4};
    case 9: return {9, 5};
    case 10: return {10, 7};
    case 11: return {11, 9};
    case 12: return {12, 6, 4, 1};
    case 13: return {13, 4, 3, 1};
    case 14: return {14, 5, 3, 1};
    case 15: return {15, 14};
    case 16: return {16, 15, 13, 4};
    default:
      throw InvalidArgument("no built-in MLS taps for register length " +
                            std::to_string(register_length) + " (table covers 2..16)");
  }
}

Sequence generate_mls(int register_length) {
  return generate_mls(register_length, default_mls_taps(register_length));
}

Sequence generate_mls(int register_length, std::vector<int> taps) {
  const int l = register_length;
  if (l < 2 || l > 24) throw InvalidArgument("MLS register length must be in 2..24");
  std::sort(taps.begin(), taps.end(), std::greater<>());
  taps.erase(std::unique(taps.begin(), taps.end()), taps.end());
  if (taps.empty() || taps.front() != l || taps.back() < 1) {
    throw InvalidArgument("MLS taps must lie in 1..l and include l");
  }

  // Bit i of the state holds a[n - 1 - i]; tap t reads bit t - 1.
  std::uint32_t mask = 0;
  for (int t : taps) mask |= 1u << (t - 1);
  const std::uint32_t full = (1u << l) - 1u;
  const std::uint32_t initial = full;
  const long n = (1L << l) - 1;

  Sequence seq;
  seq.family = SequenceFamily::mls;
  seq.register_length = l;
  seq.feedback_taps = taps;
  seq.v_oop = -1.0;
  seq.samples.resize(n);

  std::uint32_t state = initial;
  for (long i = 0; i < n; ++i) {
    const std::uint32_t bit = static_cast<std::uint32_t>(std::popcount(state & mask) & 1);
    seq.samples(i) = bit ? -1.0 : 1.0;
    state = ((state << 1) | bit) & full;
    if (state == initial && i + 1 < n) {
      throw InvalidArgument("MLS taps are not primitive: period " + std::to_string(i + 1) +
                            " < " + std::to_string(n));
    }
  }
  if (state != initial) throw InvalidArgument("MLS taps are not primitive: state does not recur");

  if (n <= kPacfSelfCheckLimit) {
    const auto r = fast_pccf(seq.samples, seq.samples).values;
    for (long k = 0; k < n; ++k) {
      const double expected = k == 0 ? static_cast<double>(n) : -1.0;
      if (std::abs(r(k) - expected) > 1e-6 * static_cast<double>(n)) {
        throw InvalidArgument("MLS PACF self-check failed at lag " + std::to_string(k));
      }
    }
  }
  return seq;
}

Sequence generate_fzc(long length, long root) {
  if (length < 2) throw InvalidArgument("FZC length must be >= 2");
  if (root <= 0 || std::gcd(root, length) != 1) {
    throw InvalidArgument("FZC root " + std::to_string(root) + " must be positive and coprime to " +
                          std::to_string(length));
  }
  Sequence seq;
  seq.family = SequenceFamily::fzc;
  seq.root = root;
  seq.v_oop = 0.0;
  seq.samples.resize(length);

  // Phase exponent reduced mod 2N in integers.
  const unsigned long long two_n = 2ULL * static_cast<unsigned long long>(length);
  const unsigned long long u = static_cast<unsigned long long>(root) % two_n;
  const bool odd = (length % 2) == 1;
  for (long i = 0; i < length; ++i) {
    const unsigned long long ni = static_cast<unsigned long long>(i);
    const unsigned long long q = odd ? (ni % two_n) * ((ni + 1) % two_n) % two_n : (ni % two_n) * (ni % two_n) % two_n;
    const unsigned long long m = (u * q) % two_n;
    const double phase = -std::numbers::pi * static_cast<double>(m) / static_cast<double>(length);
    seq.samples(i) = std::polar(1.0, phase);
  }
  return seq;
}

Sequence sequence_from_descriptor(const std::string& descriptor) {
  std::stringstream ss(descriptor);
  std::string family, length, params;
  if (!std::getline(ss, family, '/') || !std::getline(ss, length, '/') || !std::getline(ss, params)) {
    throw InvalidArgument("bad sequence descriptor '" + descriptor + "'");
  }
  const long n = parse_long(length, "sequence length", descriptor);
  if (family == "fzc") return generate_fzc(n, parse_long(params, "FZC root", descriptor));
  if (family == "mls") {
    auto taps = parse_int_list(params);
    if (taps.empty()) throw InvalidArgument("MLS descriptor without taps");
    const int l = *std::max_element(taps.begin(), taps.end());
    if (l < 2 || l > 24 || (1L << l) - 1 != n) {
      throw InvalidArgument("MLS length " + length + " does not match taps in '" + descriptor + "'");
    }
    return generate_mls(l, taps);
  }
  throw InvalidArgument("unknown sequence family '" + family + "'");
}

Sequence bind_sample_rate(Sequence seq, double sample_rate) {
  if (!(sample_rate > 0.0)) throw InvalidArgument("sample rate must be positive");
  seq.sample_rate = sample_rate;
  return seq;
}

double papr(const CVec& samples) {
  if (samples.size() == 0) throw InvalidArgument("papr of empty sequence");
  const RVec p = samples.cwiseAbs2();
  return p.maxCoeff() / p.mean();
}

double dynamic_range_analytic(const Sequence& seq) {
  return static_cast<double>(seq.length()) - std::abs(seq.v_oop);
}

}  // namespace corrsounder
