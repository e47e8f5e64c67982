#include "corrsounder/config.hpp"

#include "corrsounder/framestore.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace corrsounder {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw InvalidArgument("expected a number, got '" + t + "'");
  }
  return v;
}

long to_long(const std::string& s) {
  const std::string t = trim(s);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw InvalidArgument("expected an integer, got '" + t + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw InvalidArgument("expected an unsigned integer, got '" + t + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw InvalidArgument("expected true or false, got '" + t + "'");
}

std::vector<int> to_int_list(const std::string& s) {
  std::vector<int> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) out.push_back(static_cast<int>(to_long(item)));
  if (out.empty()) throw InvalidArgument("expected a comma separated list");
  return out;
}

struct Context {
  bool taps_replaced = false;
  int depth = 0;
  std::vector<std::string> problems;
};

using Handler = std::function<void(CampaignConfig&, const std::string&, Context&)>;

void set_interferer(Interferer& out, const std::string& value) {
  const auto w = words(value);
  if (w.empty()) throw InvalidArgument("interferer needs a kind");
  Interferer itf;
  const std::string& kind = w[0];
  if (kind == "none") {
    if (w.size() != 1) throw InvalidArgument("interferer none takes no parameters");
  } else if (kind == "qpsk") {
    if (w.size() < 2 || w.size() > 3) throw InvalidArgument("interferer qpsk <power_db> [seed]");
    itf.kind = Interferer::Kind::qpsk;
    itf.power_db = to_double(w[1]);
    if (w.size() == 3) itf.seed = to_u64(w[2]);
  } else if (kind == "fzc") {
    if (w.size() != 4) throw InvalidArgument("interferer fzc <power_db> <length> <root>");
    itf.kind = Interferer::Kind::fzc;
    itf.power_db = to_double(w[1]);
    itf.length = to_long(w[2]);
    itf.root = to_long(w[3]);
  } else if (kind == "tone") {
    if (w.size() != 3) throw InvalidArgument("interferer tone <power_db> <freq_hz>");
    itf.kind = Interferer::Kind::tone;
    itf.power_db = to_double(w[1]);
    itf.freq_hz = to_double(w[2]);
  } else {
    throw InvalidArgument("unknown interferer kind '" + kind + "'");
  }
  out = itf;
}

const std::unordered_map<std::string, Handler>& channel_keys() {
  static const std::unordered_map<std::string, Handler> keys = {
      {"tap",
       [](CampaignConfig& c, const std::string& v, Context& ctx) {
         const auto w = words(v);
         if (w.size() != 3 && w.size() != 4) throw InvalidArgument("tap = <delay> <re> <im> [doppler_hz]");
         ChannelTap tap;
         tap.delay = to_long(w[0]);
         tap.gain = {to_double(w[1]), to_double(w[2])};
         if (w.size() == 4) tap.doppler_hz = to_double(w[3]);
         if (!ctx.taps_replaced) {
           c.channel.taps.clear();
           ctx.taps_replaced = true;
         }
         c.channel.taps.push_back(tap);
       }},
      {"snr_db",
       [](CampaignConfig& c, const std::string& v, Context&) {
         if (trim(v) == "off") {
           c.channel.snr_db.reset();
         } else {
           c.channel.snr_db = to_double(v);
         }
       }},
      {"cfo_hz", [](CampaignConfig& c, const std::string& v, Context&) { c.channel.cfo_hz = to_double(v); }},
      {"dc_offset",
       [](CampaignConfig& c, const std::string& v, Context&) {
         const auto w = words(v);
         if (w.size() != 2) throw InvalidArgument("dc_offset = <re> <im>");
         c.channel.dc_offset = {to_double(w[0]), to_double(w[1])};
       }},
      {"cable",
       [](CampaignConfig& c, const std::string& v, Context&) {
         const auto w = words(v);
         if (w.empty() || w.size() % 2 != 0) throw InvalidArgument("cable = <re> <im> [<re> <im> ...]");
         CVec h(static_cast<Eigen::Index>(w.size() / 2));
         for (std::size_t i = 0; i < w.size(); i += 2) {
           h(static_cast<Eigen::Index>(i / 2)) = {to_double(w[i]), to_double(w[i + 1])};
         }
         c.channel.cable = h;
       }},
      {"interferer",
       [](CampaignConfig& c, const std::string& v, Context&) { set_interferer(c.channel.interferer, v); }},
  };
  return keys;
}

const std::unordered_map<std::string, Handler>& campaign_keys() {
  static const std::unordered_map<std::string, Handler> keys = {
      {"sequence",
       [](CampaignConfig& c, const std::string& v, Context&) {
         const std::string f = trim(v);
         if (f != "fzc" && f != "mls") throw InvalidArgument("unknown sequence family '" + f + "'");
         c.family = f;
       }},
      {"length", [](CampaignConfig& c, const std::string& v, Context&) { c.length = to_long(v); }},
      {"root", [](CampaignConfig& c, const std::string& v, Context&) { c.root = to_long(v); }},
      {"mls_taps", [](CampaignConfig& c, const std::string& v, Context&) { c.mls_taps = to_int_list(v); }},
      {"fs", [](CampaignConfig& c, const std::string& v, Context&) { c.sample_rate = to_double(v); }},
      {"fc", [](CampaignConfig& c, const std::string& v, Context&) { c.center_frequency = to_double(v); }},
      {"sequences",
       [](CampaignConfig& c, const std::string& v, Context&) {
         c.sequences = to_long(v);
         c.duration_s.reset();
       }},
      {"duration", [](CampaignConfig& c, const std::string& v, Context&) { c.duration_s = to_double(v); }},
      {"seed", [](CampaignConfig& c, const std::string& v, Context&) { c.seed = to_u64(v); }},
      {"discard_first", [](CampaignConfig& c, const std::string& v, Context&) { c.discard_first = to_bool(v); }},
      {"chunk", [](CampaignConfig& c, const std::string& v, Context&) { c.chunk_size = to_long(v); }},
      {"dc_bandwidth", [](CampaignConfig& c, const std::string& v, Context&) { c.dc_bandwidth_hz = to_double(v); }},
      {"dc_before_ftt", [](CampaignConfig& c, const std::string& v, Context&) { c.dc_before_ftt = to_bool(v); }},
      {"downsample_threshold_db",
       [](CampaignConfig& c, const std::string& v, Context&) { c.downsample_threshold_db = to_double(v); }},
      {"calibration", [](CampaignConfig& c, const std::string& v, Context&) { c.calibration = trim(v); }},
      {"gain_cap_db", [](CampaignConfig& c, const std::string& v, Context&) { c.gain_cap_db = to_double(v); }},
      {"triggers", [](CampaignConfig& c, const std::string& v, Context&) { c.trigger_log = trim(v); }},
      {"trigger",
       [](CampaignConfig& c, const std::string& v, Context&) {
         const auto w = words(v);
         if (w.empty() || w.size() > 2) throw InvalidArgument("trigger = <sample_index> [overflow|external]");
         TriggerEvent e;
         e.sample_index = to_long(w[0]);
         if (w.size() == 2) e.kind = trigger_kind_from_string(w[1]);
         c.triggers.push_back(e);
       }},
      {"disruption_span", [](CampaignConfig& c, const std::string& v, Context&) { c.disruption_span = to_long(v); }},
      {"coherence_threshold",
       [](CampaignConfig& c, const std::string& v, Context&) { c.coherence_threshold = to_double(v); }},
      {"doppler_zero_fill",
       [](CampaignConfig& c, const std::string& v, Context&) { c.doppler_zero_fill = to_bool(v); }},
      {"doppler_window",
       [](CampaignConfig& c, const std::string& v, Context&) {
         const std::string w = trim(v);
         if (w == "rectangular") {
           c.doppler_window = DopplerWindow::rectangular;
         } else if (w == "hann") {
           c.doppler_window = DopplerWindow::hann;
         } else {
           throw InvalidArgument("doppler_window must be rectangular or hann");
         }
       }},
      {"reference_distance",
       [](CampaignConfig& c, const std::string& v, Context&) { c.reference_distance_m = to_double(v); }},
      {"endpoint", [](CampaignConfig& c, const std::string& v, Context&) { c.endpoint = trim(v); }},
      {"input", [](CampaignConfig& c, const std::string& v, Context&) { c.input = trim(v); }},
      {"output", [](CampaignConfig& c, const std::string& v, Context&) { c.output = trim(v); }},
  };
  return keys;
}

void parse_into(CampaignConfig& config, const std::string& text, const std::string& origin, bool channel_only,
                Context& ctx);

void apply_one(CampaignConfig& config, const std::string& key, const std::string& value,
               const std::string& location, const std::string& origin, bool channel_only, Context& ctx) {
  try {
    if (key == "include") {
      if (channel_only) throw InvalidArgument("nested include is not allowed");
      namespace fs = std::filesystem;
      fs::path path = trim(value);
      if (path.is_relative() && !origin.empty() && origin.front() != '<' && origin.front() != '-') {
        path = fs::path(origin).parent_path() / path;
      }
      std::ifstream in(path);
      if (!in) throw InvalidArgument("cannot open included file '" + path.string() + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      parse_into(config, ss.str(), path.string(), true, ctx);
      return;
    }
    if (auto it = channel_keys().find(key); it != channel_keys().end()) {
      it->second(config, value, ctx);
    } else if (auto jt = campaign_keys().find(key); jt != campaign_keys().end()) {
      if (channel_only) throw InvalidArgument("key '" + key + "' is not allowed in a channel block");
      jt->second(config, value, ctx);
    } else {
      throw InvalidArgument("unknown key '" + key + "'");
    }
    config.locations[key] = location;
  } catch (const ConfigError& e) {
    ctx.problems.insert(ctx.problems.end(), e.problems().begin(), e.problems().end());
  } catch (const std::exception& e) {
    ctx.problems.push_back(location + ": " + e.what());
  }
}

void parse_into(CampaignConfig& config, const std::string& text, const std::string& origin, bool channel_only,
                Context& ctx) {
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::string location = origin + ":" + std::to_string(lineno);
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      ctx.problems.push_back(location + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) {
      ctx.problems.push_back(location + ": missing key");
      continue;
    }
    apply_one(config, key, value, location, origin, channel_only, ctx);
  }
}

std::string where(const CampaignConfig& c, const std::string& key) {
  const auto it = c.locations.find(key);
  return it == c.locations.end() ? "default " + key : it->second;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : InvalidArgument(join_lines(problems)), problems_(std::move(problems)) {}

CampaignConfig parse_config(const std::string& text, const std::string& origin, CampaignConfig base) {
  Context ctx;
  parse_into(base, text, origin, false, ctx);
  if (!ctx.problems.empty()) throw ConfigError(std::move(ctx.problems));
  return base;
}

CampaignConfig load_config(const std::string& path, CampaignConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, std::move(base));
}

void apply_settings(CampaignConfig& config, const std::vector<Setting>& settings) {
  Context ctx;
  for (const auto& s : settings) apply_one(config, s.key, s.value, s.location, s.location, false, ctx);
  if (!ctx.problems.empty()) throw ConfigError(std::move(ctx.problems));
}

Sequence CampaignConfig::make_sequence() const {
  Sequence seq;
  if (family == "mls") {
    if (length < 3 || length > (1L << 24) - 1 || !std::has_single_bit(static_cast<unsigned long>(length + 1))) {
      throw InvalidArgument("MLS length must be 2^l - 1 with l in 2..24");
    }
    const int l = std::bit_width(static_cast<unsigned long>(length));
    seq = mls_taps.empty() ? generate_mls(l) : generate_mls(l, mls_taps);
  } else if (family == "fzc") {
    seq = generate_fzc(length, root);
  } else {
    throw InvalidArgument("unknown sequence family '" + family + "'");
  }
  return bind_sample_rate(std::move(seq), sample_rate);
}

long CampaignConfig::sequence_count(const Sequence& seq) const {
  if (duration_s) return sequences_for_duration(seq, *duration_s);
  return sequences;
}

std::vector<TriggerEvent> CampaignConfig::all_triggers() const {
  std::vector<TriggerEvent> events = triggers;
  if (!trigger_log.empty()) {
    auto logged = read_trigger_log(trigger_log);
    events.insert(events.end(), logged.begin(), logged.end());
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const TriggerEvent& a, const TriggerEvent& b) { return a.sample_index < b.sample_index; });
  return events;
}

CorrelatorConfig CampaignConfig::correlator(const Sequence& seq) const {
  CorrelatorConfig rc;
  rc.sequence = seq;
  rc.event_span = disruption_span;
  rc.discard_first = discard_first;
  rc.dc_bandwidth_hz = dc_bandwidth_hz;
  rc.dc_before_ftt = dc_before_ftt;
  if (!calibration.empty()) {
    rc.profile = read_profile(calibration);
    rc.calibration_reference = std::filesystem::path(calibration).filename().string();
  }
  return rc;
}

SoundingConfig CampaignConfig::sounding() const {
  SoundingConfig sc;
  sc.receiver = correlator(make_sequence());
  sc.n_sequences = sequence_count(sc.receiver.sequence);
  sc.chunk_size = chunk_size;
  sc.center_frequency = center_frequency;
  sc.events = all_triggers();
  return sc;
}

ReportOptions CampaignConfig::report_options() const {
  ReportOptions ro;
  ro.coherence_threshold = coherence_threshold;
  ro.doppler.zero_fill_gaps = doppler_zero_fill;
  ro.doppler.window = doppler_window;
  ro.reference_distance_m = reference_distance_m;
  ro.bandwidth_threshold_db = downsample_threshold_db;
  return ro;
}

void validate(const CampaignConfig& c) {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) problems.push_back(where(c, key) + ": " + msg);
  };

  check(c.sample_rate > 0.0 && std::isfinite(c.sample_rate), "fs", "sample rate must be positive");
  check(std::isfinite(c.center_frequency) && c.center_frequency >= 0.0, "fc", "center frequency must be >= 0");
  std::optional<Sequence> seq;
  if (c.sample_rate > 0.0) {
    try {
      seq = c.make_sequence();
    } catch (const std::exception& e) {
      const std::string key = c.locations.count("root") && c.family == "fzc" ? "root" : "length";
      problems.push_back(where(c, key) + ": " + e.what());
    }
  }
  if (c.duration_s) {
    check(*c.duration_s > 0.0 && std::isfinite(*c.duration_s), "duration", "duration must be > 0");
    if (seq && *c.duration_s > 0.0) {
      check(c.sequence_count(*seq) >= 1, "duration", "duration is shorter than one sequence period");
    }
  } else {
    check(c.sequences >= 1, "sequences", "sequence count must be >= 1");
  }
  check(c.chunk_size >= 1, "chunk", "chunk size must be >= 1");
  check(c.disruption_span >= 1, "disruption_span", "disruption span must be >= 1");
  check(c.dc_bandwidth_hz >= 0.0 && c.dc_bandwidth_hz < c.sample_rate / 4.0, "dc_bandwidth",
        "DC suppression bandwidth must be in [0, fs / 4)");
  check(c.downsample_threshold_db < 0.0, "downsample_threshold_db", "threshold must be negative");
  check(c.gain_cap_db > 0.0, "gain_cap_db", "gain cap must be positive");
  check(c.coherence_threshold > 0.0 && c.coherence_threshold < 1.0, "coherence_threshold",
        "coherence threshold must be in (0, 1)");
  if (c.reference_distance_m) {
    check(*c.reference_distance_m > 0.0, "reference_distance", "reference distance must be positive");
  }
  try {
    c.channel.validate();
  } catch (const std::exception& e) {
    problems.push_back(where(c, "tap") + ": " + e.what());
  }
  if (seq) {
    for (const auto& t : c.channel.taps) {
      check(t.delay < seq->length(), "tap", "tap delay " + std::to_string(t.delay) + " is not shorter than the sequence");
    }
    check(std::abs(c.channel.cfo_hz) < c.sample_rate / 2.0, "cfo_hz", "CFO must be below fs / 2");
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

}  // namespace corrsounder
