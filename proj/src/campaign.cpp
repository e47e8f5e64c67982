#include "corrsounder/campaign.hpp"

#include "corrsounder/calib.hpp"
#include "corrsounder/framestore.hpp"

#include <fstream>

namespace corrsounder {

namespace {

void require_output(const CampaignConfig& config, const char* what) {
  if (config.output.empty()) throw InvalidArgument(std::string(what) + " needs an output path");
}

ChannelModel seeded_channel(const CampaignConfig& config) {
  ChannelModel model = config.channel;
  model.seed = config.seed;
  return model;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace

StimulateResult cmd_stimulate(const CampaignConfig& config, const std::function<void(std::uint16_t)>& on_listening) {
  validate(config);
  const SoundingConfig sc = config.sounding();
  StimulationSource source(sc, seeded_channel(config));
  StimulateResult result;
  result.samples = source.total_samples();

  if (!config.endpoint.empty()) {
    auto listener = wire::TcpListener::bind(wire::Endpoint::parse(config.endpoint));
    if (on_listening) on_listening(listener.port());
    wire::Hello hello;
    hello.sample_rate = config.sample_rate;
    hello.center_frequency = config.center_frequency;
    hello.sequence = sc.receiver.sequence.descriptor();
    result.session = wire::serve_stimulation(source, hello, listener);
    return result;
  }

  require_output(config, "stimulate");
  CaptureInfo info;
  info.sample_rate = config.sample_rate;
  info.center_frequency = config.center_frequency;
  info.sequence_descriptor = sc.receiver.sequence.descriptor();
  info.seed = config.seed;
  info.samples = source.total_samples();
  CaptureWriter writer(config.output, info);
  while (auto chunk = source.next()) writer.write(*chunk);
  writer.close();
  result.capture_path = config.output;
  return result;
}

FrameSeries cmd_correlate(const CampaignConfig& config) {
  validate(config);
  require_output(config, "correlate");
  const Sequence seq = config.make_sequence();
  const CorrelatorConfig rc = config.correlator(seq);
  FrameSeries series;

  if (!config.endpoint.empty()) {
    series = wire::consume_correlation(wire::Endpoint::parse(config.endpoint), rc).series;
  } else {
    if (config.input.empty()) throw InvalidArgument("correlate needs a capture input or an endpoint");
    CaptureReader reader(config.input);
    const CaptureInfo& info = reader.info();
    if (info.sequence_descriptor != seq.descriptor()) {
      throw InvalidArgument("capture sequence " + info.sequence_descriptor + " does not match configured " +
                            seq.descriptor());
    }
    if (info.sample_rate != config.sample_rate) {
      throw InvalidArgument("capture sample rate " + format_double(info.sample_rate) +
                            " does not match configured " + format_double(config.sample_rate));
    }
    Correlator correlator(rc);
    for (const auto& e : config.all_triggers()) correlator.add_event(e);
    series = correlator.empty_series(info.center_frequency);
    while (auto chunk = reader.next(config.chunk_size)) {
      auto frames = correlator.push(*chunk);
      std::move(frames.begin(), frames.end(), std::back_inserter(series.frames));
    }
    series.gate = correlator.gate_record();
  }
  write_frames(config.output, series);
  return series;
}

std::vector<std::string> write_report_files(const std::string& prefix, const CharacterizationReport& report) {
  const std::vector<std::pair<std::string, std::string>> files = {
      {prefix + "_report.txt", format_report(report)},
      {prefix + "_pdp.csv", pdp_csv(report)},
      {prefix + "_psd.csv", psd_csv(report)},
      {prefix + "_doppler.csv", doppler_csv(report)},
  };
  std::vector<std::string> written;
  for (const auto& [path, text] : files) {
    write_text(path, text);
    written.push_back(path);
  }
  return written;
}

SoundResult cmd_sound(const CampaignConfig& config) {
  validate(config);
  require_output(config, "sound");
  SoundResult result;
  result.series = run_sounding(config.sounding(), seeded_channel(config));
  result.report = characterize(result.series, config.report_options());
  write_frames(config.output + ".frames", result.series);
  result.written.push_back(config.output + ".frames");
  auto more = write_report_files(config.output, result.report);
  result.written.insert(result.written.end(), more.begin(), more.end());
  return result;
}

CalibrationProfile cmd_calibrate(const CampaignConfig& config) {
  validate(config);
  require_output(config, "calibrate");
  CampaignConfig through = config;
  through.calibration.clear();
  ChannelModel model = seeded_channel(config);
  model.taps = {ChannelTap{}};
  model.interferer = Interferer{};
  const FrameSeries series = run_sounding(through.sounding(), model);
  CalibrationProfile profile = through_calibrate(series.frames, config.gain_cap_db);
  write_profile(config.output, profile);
  return profile;
}

SoundResult cmd_characterize(const CampaignConfig& config) {
  if (config.input.empty()) throw InvalidArgument("characterize needs a frame series input");
  validate(config);
  SoundResult result;
  result.series = read_frames(config.input);
  result.report = characterize(result.series, config.report_options());
  if (!config.output.empty()) result.written = write_report_files(config.output, result.report);
  return result;
}

}  // namespace corrsounder
