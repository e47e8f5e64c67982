#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace corrsounder {

template <typename T>
using ComplexVector = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1>;

template <typename T>
using RealVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using CVec = ComplexVector<double>;
using CVecF = ComplexVector<float>;
using RVec = RealVector<double>;

/// A contiguous block of complex baseband samples.
///
/// `start_index` is the global sample offset of `samples[0]` within the
/// stream. Samples are single precision, as on disk and on the wire.
struct IqFrame {
  CVecF samples;
  double sample_rate = 0.0;
  double center_frequency = 0.0;
  std::int64_t start_index = 0;

  [[nodiscard]] std::int64_t size() const { return samples.size(); }
  [[nodiscard]] std::int64_t end_index() const { return start_index + size(); }
};

enum class TriggerKind : std::uint8_t { overflow = 0, external = 1 };

struct TriggerEvent {
  std::int64_t sample_index = 0;
  TriggerKind kind = TriggerKind::overflow;
  std::string note;

  friend bool operator==(const TriggerEvent&, const TriggerEvent&) = default;
};

std::string to_string(TriggerKind kind);
TriggerKind trigger_kind_from_string(const std::string& token);

/// One recovered impulse-response snapshot h[tau, t_i].
struct ImpulseResponseFrame {
  CVec h;
  double t_i = 0.0;
  std::int64_t sequence_index = 0;
  bool corrected = false;
};

/// Bookkeeping from the sequence gate.
struct GateRecord {
  std::int64_t total_blocks = 0;
  std::vector<std::int64_t> dropped;  // overlapped a trigger event span
  std::vector<std::int64_t> discarded;  // dropped for lacking steady state

  friend bool operator==(const GateRecord&, const GateRecord&) = default;
};

/// A series of impulse-response frames plus the grid they live on.
struct FrameSeries {
  std::int64_t n_seq = 0;
  double sample_period = 0.0;
  double sequence_period = 0.0;
  double center_frequency = 0.0;
  std::string sequence_descriptor;
  std::string calibration_reference;  // empty when uncorrected
  GateRecord gate;
  std::vector<ImpulseResponseFrame> frames;
};

}  // namespace corrsounder
