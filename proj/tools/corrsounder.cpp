#include "corrsounder/campaign.hpp"
#include "corrsounder/framestore.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace corrsounder;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> seed, out, endpoint, calibration, duration, fs, sequence, length, root, taps, in,
      triggers;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "campaign configuration file");
  cmd->add_option("--set", f.sets, "override a configuration key, key=value (repeatable)");
  cmd->add_option("--seed", f.seed, "noise seed");
  cmd->add_option("--out", f.out, "output path or prefix");
  cmd->add_option("--endpoint", f.endpoint, "host:port of the stimulation link");
  cmd->add_option("--calibration", f.calibration, "calibration profile path");
  cmd->add_option("--duration", f.duration, "capture duration in seconds");
  cmd->add_option("--fs", f.fs, "sample rate in Hz");
  cmd->add_option("--sequence", f.sequence, "sequence family (fzc or mls)");
  cmd->add_option("--length", f.length, "sequence length in samples");
  cmd->add_option("--root", f.root, "FZC root");
  cmd->add_option("--taps", f.taps, "MLS feedback taps, e.g. 10,7");
  cmd->add_option("--in", f.in, "input capture or frame series");
  cmd->add_option("--triggers", f.triggers, "trigger log path");
}

CampaignConfig resolve(const Flags& f) {
  CampaignConfig config;
  if (!f.config.empty()) config = load_config(f.config);

  std::vector<Setting> settings;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError({"--set " + s + ": expected key=value"});
    settings.push_back({s.substr(0, eq), s.substr(eq + 1), "--set " + s.substr(0, eq)});
  }
  struct Mapped {
    const std::optional<std::string>* value;
    const char* key;
    const char* flag;
  };
  const Mapped mapped[] = {
      {&f.seed, "seed", "--seed"},
      {&f.out, "output", "--out"},
      {&f.endpoint, "endpoint", "--endpoint"},
      {&f.calibration, "calibration", "--calibration"},
      {&f.duration, "duration", "--duration"},
      {&f.fs, "fs", "--fs"},
      {&f.sequence, "sequence", "--sequence"},
      {&f.length, "length", "--length"},
      {&f.root, "root", "--root"},
      {&f.taps, "mls_taps", "--taps"},
      {&f.in, "input", "--in"},
      {&f.triggers, "triggers", "--triggers"},
  };
  for (const auto& m : mapped) {
    if (*m.value) settings.push_back({m.key, **m.value, m.flag});
  }
  apply_settings(config, settings);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlative channel sounder: stimulation, correlation, calibration and characterization"};
  app.require_subcommand(1);

  Flags flags;
  auto* stimulate = app.add_subcommand("stimulate", "write or serve the stimulation stream");
  auto* correlate = app.add_subcommand("correlate", "correlate a capture or a stimulation peer");
  auto* sound = app.add_subcommand("sound", "simulated campaign with characterization report");
  auto* calibrate = app.add_subcommand("calibrate", "through calibration of the configured cable");
  auto* characterize_cmd = app.add_subcommand("characterize", "report and CSV exports for a frame series");
  for (auto* cmd : {stimulate, correlate, sound, calibrate, characterize_cmd}) add_common(cmd, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const CampaignConfig config = resolve(flags);
    if (stimulate->parsed()) {
      const auto r = cmd_stimulate(config, [](std::uint16_t port) {
        std::cerr << "listening on port " << port << '\n';
      });
      if (r.session) {
        const auto& s = *r.session;
        std::cout << "samples_sent = " << s.samples_sent << '\n'
                  << "chunks_sent = " << s.chunks_sent << '\n'
                  << "triggers_sent = " << s.triggers_sent << '\n'
                  << "completed = " << (s.completed ? "true" : "false") << '\n';
        if (!s.completed) {
          std::cerr << "error: " << s.error << '\n';
          return 1;
        }
      } else {
        std::cout << "wrote " << r.samples << " samples to " << r.capture_path << '\n';
      }
    } else if (correlate->parsed()) {
      const auto series = cmd_correlate(config);
      std::cout << "wrote " << series.frames.size() << " frames to " << config.output << '\n';
    } else if (sound->parsed()) {
      const auto r = cmd_sound(config);
      std::cout << format_report(r.report);
    } else if (calibrate->parsed()) {
      const auto p = cmd_calibrate(config);
      std::cout << "wrote profile from " << p.created_from << " frames, " << p.clamped_bins.size()
                << " clamped bins, to " << config.output << '\n';
    } else if (characterize_cmd->parsed()) {
      const auto r = cmd_characterize(config);
      std::cout << format_report(r.report);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
