#include "corrsounder/framestore.hpp"

#include "corrsounder/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <sstream>

namespace corrsounder {

namespace le {

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }
void put_u16(std::string& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint16_t get_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint64_t get_u64(const unsigned char* p) {
  return static_cast<std::uint64_t>(get_u32(p)) | (static_cast<std::uint64_t>(get_u32(p + 4)) << 32);
}
float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }
double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

}  // namespace le

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

using KeyValues = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

KeyValues parse_key_values(const std::string& text, const std::string& what) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError(what + ": expected 'key = value'", line_no);
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

const std::string& require(const KeyValues& kv, const std::string& key, const std::string& what) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(what + ": missing field '" + key + "'");
  return it->second;
}

double to_double(const std::string& s, const std::string& key) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("field '" + key + "' is not a number: '" + s + "'");
}

std::int64_t to_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("field '" + key + "' is not an integer: '" + s + "'");
}

std::uint64_t to_uint(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos == s.size() && (s.empty() || s[0] != '-')) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("field '" + key + "' is not an unsigned integer: '" + s + "'");
}

template <typename Int>
std::string join(const std::vector<Int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::int64_t> split_ints(const std::string& s, const std::string& key) {
  std::vector<std::int64_t> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(trim(item), key));
  return out;
}

void check_version(const KeyValues& kv, const std::string& format, int expected, const std::string& what) {
  if (require(kv, "format", what) != format) throw FormatError(what + ": not a " + format + " file");
  const auto v = to_int(require(kv, "version", what), "version");
  if (v != expected) {
    throw FormatError(what + ": unsupported version " + std::to_string(v) + " (expected " +
                      std::to_string(expected) + ")");
  }
}

std::string read_text_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(what + ": cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::int64_t file_size(const std::string& path, const std::string& what) {
  std::error_code ec;
  const auto sz = std::filesystem::file_size(path, ec);
  if (ec) throw IoError(what + ": cannot stat '" + path + "'");
  return static_cast<std::int64_t>(sz);
}

std::string capture_sidecar_text(const CaptureInfo& info) {
  std::ostringstream os;
  os << "format = corrsounder-capture\n"
     << "version = " << kCaptureVersion << '\n'
     << "sample_rate = " << format_double(info.sample_rate) << '\n'
     << "center_frequency = " << format_double(info.center_frequency) << '\n'
     << "sequence = " << info.sequence_descriptor << '\n'
     << "start_index = " << info.start_index << '\n'
     << "seed = " << info.seed << '\n'
     << "samples = " << info.samples << '\n';
  return os.str();
}

CaptureInfo read_capture_sidecar(const std::string& path) {
  const std::string what = "capture sidecar '" + sidecar_path(path) + "'";
  const KeyValues kv = parse_key_values(read_text_file(sidecar_path(path), what), what);
  check_version(kv, "corrsounder-capture", kCaptureVersion, what);
  CaptureInfo info;
  info.sample_rate = to_double(require(kv, "sample_rate", what), "sample_rate");
  info.center_frequency = to_double(require(kv, "center_frequency", what), "center_frequency");
  info.sequence_descriptor = require(kv, "sequence", what);
  info.start_index = to_int(require(kv, "start_index", what), "start_index");
  info.seed = to_uint(require(kv, "seed", what), "seed");
  info.samples = to_int(require(kv, "samples", what), "samples");
  if (!(info.sample_rate > 0.0)) throw FormatError(what + ": sample_rate must be positive");
  if (info.samples < 0) throw FormatError(what + ": negative sample count");
  return info;
}

}  // namespace

std::string sidecar_path(const std::string& path) { return path + ".meta"; }

// ---- capture -----------------------------------------------------------

CaptureWriter::CaptureWriter(const std::string& path, CaptureInfo info)
    : path_(path), info_(std::move(info)), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot write capture '" + path + "'");
  info_.samples = 0;
}

CaptureWriter::~CaptureWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void CaptureWriter::write(const IqFrame& frame) {
  if (closed_) throw InvalidArgument("capture writer is closed");
  if (!next_index_) {
    info_.start_index = frame.start_index;
  } else if (*next_index_ != frame.start_index) {
    throw InvalidArgument("capture frames must be contiguous");
  }
  next_index_ = frame.end_index();
  std::string buf;
  buf.reserve(static_cast<std::size_t>(frame.size()) * 8);
  for (Eigen::Index i = 0; i < frame.samples.size(); ++i) {
    le::put_f32(buf, frame.samples(i).real());
    le::put_f32(buf, frame.samples(i).imag());
  }
  out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out_) throw IoError("write failed for '" + path_ + "'");
  info_.samples += frame.size();
}

void CaptureWriter::close() {
  if (closed_) return;
  closed_ = true;
  out_.close();
  if (!out_) throw IoError("close failed for '" + path_ + "'");
  write_text_file(sidecar_path(path_), capture_sidecar_text(info_));
}

CaptureReader::CaptureReader(const std::string& path) : info_(read_capture_sidecar(path)) {
  const std::int64_t bytes = file_size(path, "capture payload");
  if (bytes % 8 != 0) {
    throw FormatError("capture payload '" + path + "' truncated: " + std::to_string(bytes) +
                      " bytes is not a whole number of IQ pairs", bytes);
  }
  if (bytes / 8 != info_.samples) {
    throw FormatError("capture payload '" + path + "' holds " + std::to_string(bytes / 8) +
                      " samples, sidecar declares " + std::to_string(info_.samples));
  }
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cannot open capture '" + path + "'");
}

std::optional<IqFrame> CaptureReader::next(std::int64_t max_samples) {
  if (max_samples < 1) throw InvalidArgument("max_samples must be >= 1");
  if (cursor_ >= info_.samples) return std::nullopt;
  const std::int64_t count = std::min(max_samples, info_.samples - cursor_);
  std::vector<unsigned char> buf(static_cast<std::size_t>(count) * 8);
  in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in_.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw FormatError("capture payload truncated", cursor_);
  }
  IqFrame f;
  f.sample_rate = info_.sample_rate;
  f.center_frequency = info_.center_frequency;
  f.start_index = info_.start_index + cursor_;
  f.samples.resize(count);
  for (std::int64_t i = 0; i < count; ++i) {
    f.samples(i) = {le::get_f32(&buf[i * 8]), le::get_f32(&buf[i * 8 + 4])};
  }
  cursor_ += count;
  return f;
}

void write_capture(const std::string& path, const IqFrame& frame, CaptureInfo info) {
  info.sample_rate = frame.sample_rate;
  info.center_frequency = frame.center_frequency;
  CaptureWriter w(path, std::move(info));
  w.write(frame);
  w.close();
}

IqFrame read_capture(const std::string& path, CaptureInfo* info) {
  CaptureReader r(path);
  if (info) *info = r.info();
  IqFrame whole;
  whole.sample_rate = r.info().sample_rate;
  whole.center_frequency = r.info().center_frequency;
  whole.start_index = r.info().start_index;
  if (auto f = r.next(std::max<std::int64_t>(1, r.info().samples))) whole.samples = std::move(f->samples);
  return whole;
}

// ---- frame series ------------------------------------------------------

namespace {

constexpr char kFramesMagic[8] = {'C', 'S', 'F', 'R', 'A', 'M', 'E', 'S'};
constexpr std::uint32_t kRecordMarker = 0x31434552;  // "REC1"

}  // namespace

void write_frames(const std::string& path, const FrameSeries& s) {
  std::ostringstream hdr;
  hdr << "n_seq = " << s.n_seq << '\n'
      << "sample_period = " << format_double(s.sample_period) << '\n'
      << "sequence_period = " << format_double(s.sequence_period) << '\n'
      << "center_frequency = " << format_double(s.center_frequency) << '\n'
      << "sequence = " << s.sequence_descriptor << '\n'
      << "calibration = " << s.calibration_reference << '\n'
      << "gate_total = " << s.gate.total_blocks << '\n'
      << "gate_dropped = " << join(s.gate.dropped) << '\n'
      << "gate_discarded = " << join(s.gate.discarded) << '\n'
      << "records = " << s.frames.size() << '\n';
  const std::string header = hdr.str();

  std::string buf(kFramesMagic, sizeof kFramesMagic);
  le::put_u32(buf, kFrameSeriesVersion);
  le::put_u32(buf, static_cast<std::uint32_t>(header.size()));
  buf += header;
  for (const auto& f : s.frames) {
    if (f.h.size() != s.n_seq) throw InvalidArgument("frame length does not match series n_seq");
    le::put_u32(buf, kRecordMarker);
    le::put_u64(buf, static_cast<std::uint64_t>(f.sequence_index));
    le::put_f64(buf, f.t_i);
    le::put_u8(buf, f.corrected ? 1 : 0);
    for (Eigen::Index i = 0; i < f.h.size(); ++i) {
      le::put_f64(buf, f.h(i).real());
      le::put_f64(buf, f.h(i).imag());
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write frame series '" + path + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

FrameSeries read_frames(const std::string& path) {
  const std::string what = "frame series '" + path + "'";
  const std::string raw = read_text_file(path, what);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  const std::size_t size = raw.size();
  if (size < 16 || std::memcmp(p, kFramesMagic, 8) != 0) throw FormatError(what + ": bad magic");
  const std::uint32_t version = le::get_u32(p + 8);
  if (version != kFrameSeriesVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t hlen = le::get_u32(p + 12);
  if (16 + static_cast<std::size_t>(hlen) > size) throw FormatError(what + ": truncated header");
  const KeyValues kv = parse_key_values(raw.substr(16, hlen), what);

  FrameSeries s;
  s.n_seq = to_int(require(kv, "n_seq", what), "n_seq");
  s.sample_period = to_double(require(kv, "sample_period", what), "sample_period");
  s.sequence_period = to_double(require(kv, "sequence_period", what), "sequence_period");
  s.center_frequency = to_double(require(kv, "center_frequency", what), "center_frequency");
  s.sequence_descriptor = require(kv, "sequence", what);
  s.calibration_reference = require(kv, "calibration", what);
  s.gate.total_blocks = to_int(require(kv, "gate_total", what), "gate_total");
  s.gate.dropped = split_ints(require(kv, "gate_dropped", what), "gate_dropped");
  s.gate.discarded = split_ints(require(kv, "gate_discarded", what), "gate_discarded");
  const std::int64_t records = to_int(require(kv, "records", what), "records");
  if (s.n_seq < 1 || records < 0 || static_cast<std::uint64_t>(s.n_seq) > size) {
    throw FormatError(what + ": bad n_seq or record count");
  }

  const std::size_t rec_size = 4 + 8 + 8 + 1 + static_cast<std::size_t>(s.n_seq) * 16;
  std::size_t off = 16 + hlen;
  s.frames.reserve(static_cast<std::size_t>(std::min<std::int64_t>(records, 1 << 20)));
  for (std::int64_t r = 0; r < records; ++r) {
    if (off + rec_size > size) throw FormatError(what + ": truncated record", r);
    if (le::get_u32(p + off) != kRecordMarker) throw FormatError(what + ": corrupted record boundary", r);
    ImpulseResponseFrame f;
    f.sequence_index = static_cast<std::int64_t>(le::get_u64(p + off + 4));
    f.t_i = le::get_f64(p + off + 12);
    const std::uint8_t corrected = p[off + 20];
    if (corrected > 1) throw FormatError(what + ": bad corrected flag", r);
    f.corrected = corrected == 1;
    f.h.resize(s.n_seq);
    const unsigned char* q = p + off + 21;
    for (std::int64_t i = 0; i < s.n_seq; ++i) f.h(i) = {le::get_f64(q + 16 * i), le::get_f64(q + 16 * i + 8)};
    if (!s.frames.empty() && f.sequence_index <= s.frames.back().sequence_index) {
      throw FormatError(what + ": sequence indices not increasing", r);
    }
    s.frames.push_back(std::move(f));
    off += rec_size;
  }
  if (off != size) throw FormatError(what + ": trailing bytes after last record", records);
  return s;
}

// ---- trigger log -------------------------------------------------------

std::string to_string(TriggerKind kind) { return kind == TriggerKind::overflow ? "overflow" : "external"; }

TriggerKind trigger_kind_from_string(const std::string& token) {
  if (token == "overflow") return TriggerKind::overflow;
  if (token == "external") return TriggerKind::external;
  throw InvalidArgument("unknown trigger kind '" + token + "'");
}

void write_trigger_log(const std::string& path, const std::vector<TriggerEvent>& events) {
  std::ostringstream os;
  os << "# sample_index,kind,note\n";
  for (const auto& e : events) {
    if (e.note.find('\n') != std::string::npos) throw InvalidArgument("trigger note contains a newline");
    os << e.sample_index << ',' << to_string(e.kind) << ',' << e.note << '\n';
  }
  write_text_file(path, os.str());
}

std::vector<TriggerEvent> read_trigger_log(const std::string& path) {
  const std::string what = "trigger log '" + path + "'";
  std::istringstream in(read_text_file(path, what));
  std::vector<TriggerEvent> events;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw FormatError(what + ": expected 'sample_index,kind,note'", line_no);
    TriggerEvent e;
    try {
      e.sample_index = to_int(trim(line.substr(0, c1)), "sample_index");
      e.kind = trigger_kind_from_string(trim(line.substr(c1 + 1, c2 - c1 - 1)));
    } catch (const Error& err) {
      throw FormatError(what + ": " + err.what(), line_no);
    }
    if (e.sample_index < 0) throw FormatError(what + ": negative sample index", line_no);
    e.note = line.substr(c2 + 1);
    events.push_back(std::move(e));
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const TriggerEvent& a, const TriggerEvent& b) { return a.sample_index < b.sample_index; });
  return events;
}

// ---- calibration profile -----------------------------------------------

void write_profile(const std::string& path, const CalibrationProfile& profile) {
  std::string buf;
  for (Eigen::Index i = 0; i < profile.h_ftt.size(); ++i) {
    le::put_f64(buf, profile.h_ftt(i).real());
    le::put_f64(buf, profile.h_ftt(i).imag());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write profile '" + path + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path + "'");

  std::ostringstream os;
  os << "format = corrsounder-calibration\n"
     << "version = " << kProfileVersion << '\n'
     << "length = " << profile.length() << '\n'
     << "source = " << to_string(profile.source) << '\n'
     << "gain_cap_db = " << format_double(profile.gain_cap_db) << '\n'
     << "created_from = " << profile.created_from << '\n'
     << "clamped_bins = " << join(profile.clamped_bins) << '\n';
  write_text_file(sidecar_path(path), os.str());
}

CalibrationProfile read_profile(const std::string& path) {
  const std::string what = "calibration sidecar '" + sidecar_path(path) + "'";
  const KeyValues kv = parse_key_values(read_text_file(sidecar_path(path), what), what);
  check_version(kv, "corrsounder-calibration", kProfileVersion, what);
  const std::int64_t n = to_int(require(kv, "length", what), "length");
  const std::string& src = require(kv, "source", what);
  if (src != "identity" && src != "through") throw FormatError(what + ": unknown source '" + src + "'");
  const double cap = to_double(require(kv, "gain_cap_db", what), "gain_cap_db");
  const std::int64_t from = to_int(require(kv, "created_from", what), "created_from");
  std::vector<long> clamped;
  for (auto v : split_ints(require(kv, "clamped_bins", what), "clamped_bins")) clamped.push_back(static_cast<long>(v));

  const std::string raw = read_text_file(path, "calibration profile");
  if (n < 1 || raw.size() != static_cast<std::size_t>(n) * 16) {
    throw FormatError("calibration profile '" + path + "': payload size " + std::to_string(raw.size()) +
                      " does not match length " + std::to_string(n));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  CVec h(n);
  for (std::int64_t i = 0; i < n; ++i) h(i) = {le::get_f64(p + 16 * i), le::get_f64(p + 16 * i + 8)};
  return profile_from_time_domain(std::move(h), src == "through" ? ProfileSource::through : ProfileSource::identity,
                                  cap, static_cast<long>(from), std::move(clamped));
}

}  // namespace corrsounder
