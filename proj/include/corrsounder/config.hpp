#pragma once

#include "corrsounder/charmetrics.hpp"
#include "corrsounder/chansim.hpp"
#include "corrsounder/error.hpp"
#include "corrsounder/seqgen.hpp"
#include "corrsounder/sounder.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace corrsounder {

/// Configuration problems, one "location: message" line per problem.
class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  [[nodiscard]] const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

// Campaign file: one "key = value" per line, '#' starts a comment.
//
//   sequence = fzc            # fzc | mls
//   length = 1024
//   root = 7
//   fs = 1e6
//   fc = 5.8e9
//   sequences = 200           # or: duration = 0.2048
//   seed = 1
//   include = channel.cfg     # channel keys only, path relative to this file
//
// Channel keys:
//   tap = <delay> <re> <im> [doppler_hz]   (repeatable; replaces the unit tap)
//   snr_db, cfo_hz, dc_offset = <re> <im>, cable = <re> <im> [<re> <im> ...]
//   interferer = qpsk <power_db> [seed] | fzc <power_db> <length> <root> | tone <power_db> <freq_hz>
struct CampaignConfig {
  std::string family = "fzc";
  long length = 1024;
  long root = 7;
  std::vector<int> mls_taps;  // empty: built-in table
  double sample_rate = 1e6;
  double center_frequency = 5.8e9;
  long sequences = 200;
  std::optional<double> duration_s;  // takes precedence over `sequences`
  std::uint64_t seed = 1;

  ChannelModel channel;

  bool discard_first = true;
  long chunk_size = 4096;
  double dc_bandwidth_hz = 0.0;
  bool dc_before_ftt = true;
  double downsample_threshold_db = -3.0;
  std::string calibration;  // profile path; empty: uncorrected
  double gain_cap_db = 40.0;

  std::string trigger_log;  // path; empty: none
  std::vector<TriggerEvent> triggers;
  long disruption_span = 1;

  double coherence_threshold = 0.5;
  bool doppler_zero_fill = true;
  DopplerWindow doppler_window = DopplerWindow::rectangular;
  std::optional<double> reference_distance_m;

  std::string endpoint;
  std::string input;
  std::string output;

  /// key -> "file:line" (or "--flag") of the setting that was applied last
  std::map<std::string, std::string> locations;

  [[nodiscard]] Sequence make_sequence() const;
  [[nodiscard]] long sequence_count(const Sequence& seq) const;
  /// Inline triggers merged with the trigger log, sorted.
  [[nodiscard]] std::vector<TriggerEvent> all_triggers() const;
  [[nodiscard]] CorrelatorConfig correlator(const Sequence& seq) const;
  [[nodiscard]] SoundingConfig sounding() const;
  [[nodiscard]] ReportOptions report_options() const;
};

/// Parse campaign text. `origin` labels error locations and anchors
/// relative include paths.
CampaignConfig parse_config(const std::string& text, const std::string& origin = "<config>",
                            CampaignConfig base = {});
CampaignConfig load_config(const std::string& path, CampaignConfig base = {});

struct Setting {
  std::string key;
  std::string value;
  std::string location;
};

/// Apply settings as if they appeared in one file, in order. The first
/// `tap` among them replaces the existing tap list.
void apply_settings(CampaignConfig& config, const std::vector<Setting>& settings);

/// Semantic checks across keys (sequence parameters, duration, spans).
void validate(const CampaignConfig& config);

}  // namespace corrsounder
