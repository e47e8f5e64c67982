#pragma once

#include "corrsounder/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace corrsounder {

enum class SequenceFamily { mls, fzc };

/// Correlative stimulation sequence: constant magnitude samples with a
/// two-valued periodic autocorrelation (N_seq at lag 0, v_oop elsewhere).
struct Sequence {
  CVec samples;
  SequenceFamily family = SequenceFamily::fzc;
  int register_length = 0;        // MLS only
  std::vector<int> feedback_taps;  // MLS only
  long root = 0;                  // FZC only
  double v_oop = 0.0;
  std::optional<double> sample_rate;

  /// T_s = 1 / fs. Requires a bound sample rate.
  [[nodiscard]] double sample_period() const;

  [[nodiscard]] long length() const { return static_cast<long>(samples.size()); }

  /// T_seq = N_seq / fs. Requires a bound sample period.
  [[nodiscard]] double period() const;

  /// Compact descriptor, e.g. "fzc/1024/7" or "mls/1023/10,7".
  [[nodiscard]] std::string descriptor() const;
};

/// Feedback taps from the built-in primitive polynomial table (l = 2..16).
std::vector<int> default_mls_taps(int register_length);

/// Maximum length sequence of length 2^l - 1 from a Fibonacci LFSR obeying
/// a[n] = XOR_{t in taps} a[n - t], started from the all-ones state.
/// Bits map 0 -> +1, 1 -> -1. Throws InvalidArgument when the tap set does
/// not yield a maximal period.
Sequence generate_mls(int register_length, std::vector<int> taps);
Sequence generate_mls(int register_length);

/// Zadoff-Chu sequence with root u coprime to the length.
Sequence generate_fzc(long length, long root);

/// Rebuild a sequence from its descriptor string.
Sequence sequence_from_descriptor(const std::string& descriptor);

/// Copy of `seq` bound to sample rate fs.
Sequence bind_sample_rate(Sequence seq, double sample_rate);

/// Peak-to-average power ratio, max|x|^2 / mean|x|^2.
double papr(const CVec& samples);
inline double papr(const Sequence& seq) { return papr(seq.samples); }

/// D_r = N_seq - |v_oop|, as a linear ratio.
double dynamic_range_analytic(const Sequence& seq);

std::string to_string(SequenceFamily family);

}  // namespace corrsounder
