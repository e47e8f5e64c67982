#pragma once

#include "corrsounder/charmetrics.hpp"
#include "corrsounder/config.hpp"
#include "corrsounder/wire.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace corrsounder {

struct StimulateResult {
  std::int64_t samples = 0;
  std::string capture_path;                    // offline mode
  std::optional<wire::SessionSummary> session;  // endpoint mode
};

/// Writes the received stimulation stream (after the configured channel) to
/// `output` as a capture, or serves it on `endpoint` when one is set.
/// `on_listening` is called with the bound port before waiting for a peer.
StimulateResult cmd_stimulate(const CampaignConfig& config,
                              const std::function<void(std::uint16_t)>& on_listening = {});

/// Correlates a capture (`input`) or a stimulation peer (`endpoint`) and
/// writes the frame series to `output`.
FrameSeries cmd_correlate(const CampaignConfig& config);

struct SoundResult {
  FrameSeries series;
  CharacterizationReport report;
  std::vector<std::string> written;
};

/// Simulated campaign plus characterization. Writes
/// <output>.frames, <output>_report.txt, <output>_pdp.csv, <output>_psd.csv
/// and <output>_doppler.csv.
SoundResult cmd_sound(const CampaignConfig& config);

/// Through measurement of the configured cable (channel taps are ignored)
/// without FTT correction; writes the inverting profile to `output`.
CalibrationProfile cmd_calibrate(const CampaignConfig& config);

/// Characterizes the frame series at `input`; writes the report and CSV
/// files under the `output` prefix.
SoundResult cmd_characterize(const CampaignConfig& config);

/// Report and CSV files under `prefix`.
std::vector<std::string> write_report_files(const std::string& prefix, const CharacterizationReport& report);

}  // namespace corrsounder
