#pragma once

#include "corrsounder/calib.hpp"
#include "corrsounder/types.hpp"

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace corrsounder {

// Capture: raw payload of interleaved little-endian float32 I/Q pairs at
// `path`, text sidecar at `path + ".meta"`:
//
//   format = corrsounder-capture
//   version = 1
//   sample_rate = 1000000
//   center_frequency = 5800000000
//   sequence = fzc/1024/7
//   start_index = 0
//   seed = 1
//   samples = 102400

inline constexpr int kCaptureVersion = 1;
inline constexpr int kFrameSeriesVersion = 1;
inline constexpr int kProfileVersion = 1;

struct CaptureInfo {
  double sample_rate = 0.0;
  double center_frequency = 0.0;
  std::string sequence_descriptor;
  std::int64_t start_index = 0;
  std::uint64_t seed = 0;
  std::int64_t samples = 0;
};

std::string sidecar_path(const std::string& path);

/// Sequential capture writer; the sidecar is written on close().
class CaptureWriter {
 public:
  CaptureWriter(const std::string& path, CaptureInfo info);
  ~CaptureWriter();
  CaptureWriter(const CaptureWriter&) = delete;
  CaptureWriter& operator=(const CaptureWriter&) = delete;

  void write(const IqFrame& frame);
  void close();

 private:
  std::string path_;
  CaptureInfo info_;
  std::ofstream out_;
  std::optional<std::int64_t> next_index_;
  bool closed_ = false;
};

/// Sequential capture reader.
class CaptureReader {
 public:
  explicit CaptureReader(const std::string& path);

  [[nodiscard]] const CaptureInfo& info() const { return info_; }

  /// Up to `max_samples` samples; nullopt at end of payload.
  std::optional<IqFrame> next(std::int64_t max_samples);

 private:
  CaptureInfo info_;
  std::ifstream in_;
  std::int64_t cursor_ = 0;
};

void write_capture(const std::string& path, const IqFrame& frame, CaptureInfo info);
/// Whole capture as one frame.
IqFrame read_capture(const std::string& path, CaptureInfo* info = nullptr);

// Frame series: one binary file.
//   "CSFRAMES" | u32 version | u32 header bytes | header text (key = value)
//   then `records` records of
//   u32 0x31434552 ("REC1") | i64 sequence_index | f64 t_i | u8 corrected |
//   n_seq x (f64 re, f64 im)
// All integers and floats little-endian.

void write_frames(const std::string& path, const FrameSeries& series);
FrameSeries read_frames(const std::string& path);

// Trigger log: text, one event per line "sample_index,kind,note"; '#'
// starts a comment line. Events are sorted by sample index on read.

void write_trigger_log(const std::string& path, const std::vector<TriggerEvent>& events);
std::vector<TriggerEvent> read_trigger_log(const std::string& path);

// Calibration profile: payload of little-endian f64 pairs of h_ftt at
// `path`, text sidecar at `path + ".meta"`.

void write_profile(const std::string& path, const CalibrationProfile& profile);
CalibrationProfile read_profile(const std::string& path);

// Little-endian codecs shared with the wire protocol.
namespace le {
void put_u8(std::string& out, std::uint8_t v);
void put_u16(std::string& out, std::uint16_t v);
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f32(std::string& out, float v);
void put_f64(std::string& out, double v);
std::uint16_t get_u16(const unsigned char* p);
std::uint32_t get_u32(const unsigned char* p);
std::uint64_t get_u64(const unsigned char* p);
float get_f32(const unsigned char* p);
double get_f64(const unsigned char* p);
}  // namespace le

/// Exact text form of a double ("%.17g"; "inf"/"-inf").
std::string format_double(double v);

}  // namespace corrsounder
