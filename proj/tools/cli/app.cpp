#include "app.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "stillness/error.hpp"
#include "stillness/osc.hpp"
#include "stillness/session.hpp"
#include "stillness/synth.hpp"

namespace stillness::app {

namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

class TeeSink final : public osc::PacketSink {
 public:
  void add(osc::PacketSink* sink) {
    if (sink) sinks_.push_back(sink);
  }
  bool empty() const { return sinks_.empty(); }
  void send(std::span<const std::uint8_t> packet) override {
    for (auto* s : sinks_) s->send(packet);
  }

 private:
  std::vector<osc::PacketSink*> sinks_;
};

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::string seconds(TimestampUs us) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(us) * 1e-6);
  return buf;
}

TimestampUs control_period_us(const Config& cfg) {
  return static_cast<TimestampUs>(std::llround(1e6 / cfg.protocol.constants.imu_rate_hz));
}

void print_summary(const pipeline::Summary& s, std::ostream& out) {
  out << "frames processed: " << s.imu_frames + s.emg_frames << " (imu " << s.imu_frames
      << ", emg " << s.emg_frames << ")\n";
  out << "gate mutes: " << s.gate_mutes << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", s.still_s);
  out << "total still time: " << buf << " s\n";
  if (s.clamped_partials) out << "clamped partials: " << s.clamped_partials << "\n";
  if (s.non_normalized) out << "non-normalized quaternions: " << s.non_normalized << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// replay

pipeline::Summary cmd_replay(const Config& cfg, const ReplayCommand& cmd, std::ostream& out) {
  auto pc = cfg.pipeline_config();
  pc.render_audio = cmd.wav.has_value();

  osc::CaptureSink capture;
  std::unique_ptr<osc::UdpSender> udp;
  TeeSink tee;
  if (cmd.osc_dump) tee.add(&capture);
  if (cmd.osc) {
    udp = std::make_unique<osc::UdpSender>(cfg.osc_host, cfg.osc_port);
    tee.add(udp.get());
  }

  session::ReplaySource source(cmd.log, session::ReplayOptions{cmd.speed});
  pipeline::PerformerPipeline p(pc, tee.empty() ? nullptr : &tee);
  pipeline::run(source, p);

  if (cmd.wav) synth::write_wav(p.audio(), *cmd.wav);
  if (cmd.osc_dump) write_bytes(*cmd.osc_dump, capture.stream());

  print_summary(p.summary(), out);
  if (udp) out << "osc datagrams sent: " << udp->sent() << " (errors " << udp->errors() << ")\n";
  return p.summary();
}

// ---------------------------------------------------------------------------
// simulate

PerformerTimeline check_timeline(const std::vector<scenario::PoseWindow>& windows,
                                 const std::vector<pipeline::Tick>& ticks,
                                 TimestampUs period_us, double ramp_seconds) {
  PerformerTimeline tl;
  const auto first_at_or_after = [&](TimestampUs t) {
    return std::lower_bound(ticks.begin(), ticks.end(), t,
                            [](const pipeline::Tick& k, TimestampUs v) { return k.t_us < v; });
  };

  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (i > 0) {
      TransitionCheck c;
      c.pose = i;
      auto it = first_at_or_after(w.start_us);
      if (it != ticks.end()) c.onset_us = it->t_us;
      for (; it != ticks.end() && it->t_us < w.transition_end_us; ++it) {
        if (it->muted) {
          c.mute_us = it->t_us;
          break;
        }
      }
      c.ok = c.mute_us && *c.mute_us - c.onset_us <= period_us;
      tl.transitions.push_back(c);
    }

    HoldCheck h;
    h.pose = i;
    h.start_us = w.transition_end_us;
    h.end_us = w.end_us;
    h.required = static_cast<double>(h.end_us - h.start_us) >= ramp_seconds * 1e6;
    for (auto it = first_at_or_after(h.start_us); it != ticks.end() && it->t_us < h.end_us; ++it) {
      if (it->params.master_gain >= 1.0) {
        h.full_gain_us = it->t_us;
        break;
      }
    }
    h.ok = !h.required || h.full_gain_us.has_value();
    tl.holds.push_back(h);
  }
  return tl;
}

namespace {

struct PerformerRun {
  pipeline::Summary summary;
  std::vector<pipeline::Tick> ticks;
  synth::AudioBlock audio;
  osc::Bytes osc;
};

PerformerRun run_performer(const Config& cfg, int id,
                           const std::vector<session::SessionRecord>& records, bool capture_osc) {
  auto pc = cfg.pipeline_config();
  pc.performer_id = id;
  PerformerRun run;
  osc::CaptureSink capture;
  pipeline::PerformerPipeline p(pc, capture_osc ? &capture : nullptr);
  p.on_tick = [&](const pipeline::Tick& t) { run.ticks.push_back(t); };
  for (const auto& r : records) p.process(r);
  p.finish();
  run.summary = p.summary();
  run.audio = p.take_audio();
  run.osc = capture.stream();
  return run;
}

void write_report(std::ostream& out, std::uint64_t seed, const scenario::Scenario& scn,
                  const std::vector<PerformerTimeline>& tls, TimestampUs period_us, bool all_ok) {
  out << "stillness ensemble report\n";
  out << "seed: " << seed << "\n";
  out << "performers: " << tls.size() << "\n";
  out << "control period: " << period_us << " us\n";
  for (std::size_t p = 0; p < tls.size(); ++p) {
    const auto& tl = tls[p];
    out << "\nperformer " << p << " (" << scn.performers[p].poses.size() << " poses, "
        << seconds(static_cast<TimestampUs>(std::llround(scn.duration_s(p) * 1e6))) << " s)\n";
    std::size_t t = 0;
    for (const auto& h : tl.holds) {
      if (h.pose > 0) {
        const auto& c = tl.transitions[t++];
        out << "  transition to pose " << c.pose << " at " << seconds(c.onset_us) << " s: ";
        if (c.mute_us) {
          out << "muted at " << seconds(*c.mute_us) << " s (+"
              << (*c.mute_us - c.onset_us) / period_us << " ticks)";
        } else {
          out << "never muted";
        }
        out << (c.ok ? "  ok\n" : "  FAIL\n");
      }
      out << "  hold pose " << h.pose << " " << seconds(h.start_us) << "-" << seconds(h.end_us)
          << " s: ";
      if (h.full_gain_us) {
        out << "full gain at " << seconds(*h.full_gain_us) << " s";
      } else {
        out << "full gain not reached";
      }
      if (!h.required) out << " (shorter than ramp)";
      out << (h.ok ? "  ok\n" : "  FAIL\n");
    }
    char still[32];
    std::snprintf(still, sizeof still, "%.3f", tl.summary.still_s);
    out << "  gate mutes: " << tl.summary.gate_mutes << ", still time: " << still << " s\n";
  }
  out << "\nverdict: " << (all_ok ? "PASS" : "FAIL") << "\n";
}

}  // namespace

SimulateResult cmd_simulate(const Config& cfg, const SimulateCommand& cmd, std::ostream& out) {
  const scenario::Scenario scn =
      cmd.scenario ? scenario::load_scenario(*cmd.scenario) : scenario::default_scenario();
  const auto logs = scenario::generate_scenario(scn, cmd.seed, cfg.protocol.constants);

  SimulateResult result;
  fs::create_directories(cmd.out_dir);
  for (std::size_t p = 0; p < logs.size(); ++p) {
    const auto path = cmd.out_dir / ("performer_" + std::to_string(p) + ".jsonl");
    session::record(logs[p], path);
    result.logs.push_back(path);
  }

  // Performers are independent; run them side by side when there are cores
  // to spare. Every output file is still written from this thread.
  std::vector<PerformerRun> runs(logs.size());
  if (std::thread::hardware_concurrency() > 1 && logs.size() > 1) {
    std::vector<std::future<PerformerRun>> jobs;
    for (std::size_t p = 0; p < logs.size(); ++p) {
      jobs.push_back(std::async(std::launch::async, run_performer, std::cref(cfg), int(p),
                                std::cref(logs[p]), cmd.osc_dump));
    }
    for (std::size_t p = 0; p < jobs.size(); ++p) runs[p] = jobs[p].get();
  } else {
    for (std::size_t p = 0; p < logs.size(); ++p) {
      runs[p] = run_performer(cfg, int(p), logs[p], cmd.osc_dump);
    }
  }

  const TimestampUs period = control_period_us(cfg);
  result.all_ok = true;
  for (std::size_t p = 0; p < runs.size(); ++p) {
    auto tl = check_timeline(scenario::pose_windows(scn, p), runs[p].ticks, period,
                             cfg.gate.ramp_seconds);
    tl.summary = runs[p].summary;
    for (const auto& c : tl.transitions) result.all_ok = result.all_ok && c.ok;
    for (const auto& h : tl.holds) result.all_ok = result.all_ok && h.ok;
    result.timelines.push_back(std::move(tl));

    if (cmd.osc_dump) {
      const auto path = cmd.out_dir / ("performer_" + std::to_string(p) + ".osc");
      write_bytes(path, runs[p].osc);
      result.osc_dumps.push_back(path);
    }
  }

  std::vector<synth::AudioBlock> blocks;
  std::size_t longest = 0;
  for (auto& r : runs) longest = std::max(longest, r.audio.samples.size());
  for (auto& r : runs) {
    r.audio.samples.resize(longest, 0.0f);
    blocks.push_back(std::move(r.audio));
  }
  const synth::AudioBlock mix =
      cfg.stereo ? synth::mix_performers_stereo(blocks) : synth::mix_performers(blocks);
  result.wav = cmd.wav.value_or(cmd.out_dir / "mix.wav");
  synth::write_wav(mix, result.wav);

  result.report = cmd.out_dir / "report.txt";
  std::ostringstream report;
  write_report(report, cmd.seed, scn, result.timelines, period, result.all_ok);
  const std::string text = report.str();
  write_bytes(result.report, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                       text.size()));

  out << text;
  out << "mix: " << result.wav.string() << " (" << seconds(static_cast<TimestampUs>(
                                                     std::llround(mix.frames() / mix.sample_rate * 1e6)))
      << " s)\n";
  return result;
}

// ---------------------------------------------------------------------------
// monitor

void monitor_source(const Config& cfg, session::RecordSource& source, double refresh_hz,
                    std::ostream& out) {
  if (!(refresh_hz > 0.0)) throw Error(ErrorKind::InvalidFlag, "--refresh-hz must be > 0");
  auto pc = cfg.pipeline_config();
  pc.render_audio = false;
  pipeline::PerformerPipeline p(pc);

  const auto interval = static_cast<TimestampUs>(std::llround(1e6 / refresh_hz));
  std::optional<TimestampUs> next_print;
  out << "# t_s qom roll pitch yaw gate\n";
  p.on_tick = [&](const pipeline::Tick& t) {
    if (next_print && t.t_us < *next_print) return;
    next_print = (next_print ? *next_print : t.t_us) + interval;
    while (*next_print <= t.t_us) *next_print += interval;
    char line[160];
    std::snprintf(line, sizeof line, "%10.3f qom=%8.4f roll=%7.3f pitch=%7.3f yaw=%7.3f gate=%6.3f",
                  static_cast<double>(t.t_us) * 1e-6, t.state.qom, t.state.euler.roll,
                  t.state.euler.pitch, t.state.euler.yaw, t.params.master_gain);
    out << line << '\n' << std::flush;
  };
  while (!g_stop) {
    auto r = source.next();
    if (!r) break;
    p.process(*r);
  }
}

void cmd_monitor(const Config& cfg, const MonitorCommand& cmd, std::ostream& out) {
  if (!(cmd.refresh_hz > 0.0)) throw Error(ErrorKind::InvalidFlag, "--refresh-hz must be > 0");
  if (cmd.replay) {
    session::ReplaySource source(*cmd.replay, session::ReplayOptions{cmd.speed});
    monitor_source(cfg, source, cmd.refresh_hz, out);
    return;
  }
  const scenario::Scenario scn =
      cmd.scenario ? scenario::load_scenario(*cmd.scenario) : scenario::default_scenario();
  if (cmd.performer >= scn.performers.size()) {
    throw Error(ErrorKind::InvalidFlag, "--performer out of range");
  }
  auto logs = scenario::generate_scenario(scn, cmd.seed, cfg.protocol.constants);
  session::VectorSource source(std::move(logs[cmd.performer]));
  monitor_source(cfg, source, cmd.refresh_hz, out);
}

// ---------------------------------------------------------------------------
// scan

std::vector<dongle::DiscoveredDevice> cmd_scan(dongle::ByteTransport& transport,
                                               std::chrono::milliseconds duration, bool all,
                                               std::ostream& out) {
  dongle::DongleClient client(transport);
  auto devices = client.scan(duration, !all);
  for (const auto& d : devices) {
    out << protocol::format_mac(d.address) << "  " << (d.name.empty() ? "(unnamed)" : d.name)
        << "\n";
  }
  return devices;
}

// ---------------------------------------------------------------------------
// command line

namespace {

struct LiveLink {
  std::unique_ptr<dongle::SerialPort> port;
  std::unique_ptr<dongle::DongleClient> client;
};

LiveLink open_live(const Config& cfg, const std::string& mac, std::ostream& err) {
  LiveLink link;
  link.port = dongle::SerialPort::open(cfg.serial_port);
  link.client = std::make_unique<dongle::DongleClient>(*link.port, cfg.protocol);
  const auto devices = link.client->scan(3s, true);
  auto it = std::find_if(devices.begin(), devices.end(), [&](const dongle::DiscoveredDevice& d) {
    return mac.empty() || protocol::format_mac(d.address) == mac;
  });
  if (it == devices.end()) throw Error(ErrorKind::NoDongle, "no matching armband found");
  err << "connecting to " << protocol::format_mac(it->address) << " " << it->name << "\n";
  link.client->connect(*it, 10s);
  link.client->start_streaming(cfg.emg_mode);
  return link;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Armband sensing to OSC and audio: replay, simulate, monitor, live bridge",
               "stillness"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> osc_host;
  std::optional<int> osc_port;
  std::optional<int> performer;
  std::optional<double> threshold;
  std::optional<double> sample_rate;
  std::optional<std::string> port_path;
  app.add_option("--config", config_path, "INI config file")->envname(kConfigEnvVar);
  app.add_option("--osc-host", osc_host, "OSC destination host");
  app.add_option("--osc-port", osc_port, "OSC destination port")->check(CLI::Range(1, 65535));
  app.add_option("--performer", performer, "Performer id used in OSC addresses");
  app.add_option("--threshold", threshold, "QoM gate threshold");
  app.add_option("--sample-rate", sample_rate, "Audio sample rate (Hz)");
  app.add_option("--port", port_path, "Serial device of the BLE dongle");

  // scan
  auto* scan = app.add_subcommand("scan", "List nearby armbands (MAC address and name)");
  double scan_seconds = 5.0;
  bool scan_all = false;
  scan->add_option("--duration", scan_seconds, "Discovery time in seconds");
  scan->add_flag("--all", scan_all, "List every advertising device");

  // stream
  auto* stream = app.add_subcommand("stream", "Bridge a live armband to OSC");
  std::string mac;
  stream->add_option("--mac", mac, "Connect to this device (aa:bb:cc:dd:ee:ff)");

  // record
  auto* rec = app.add_subcommand("record", "Record a live armband to a session log");
  fs::path rec_out;
  double rec_seconds = 0.0;
  rec->add_option("--out", rec_out, "Log file")->required();
  rec->add_option("--seconds", rec_seconds, "Stop after this many seconds (0: until idle)");
  rec->add_option("--mac", mac, "Connect to this device");

  // replay
  auto* rep = app.add_subcommand("replay", "Run a session log through the pipeline");
  ReplayCommand rc;
  std::string rep_log;
  rep->add_option("log", rep_log, "Session log")->required();
  rep->add_option("--wav", rc.wav, "Render audio to this WAV file");
  rep->add_flag("--osc", rc.osc, "Send OSC over UDP");
  rep->add_option("--osc-dump", rc.osc_dump, "Write the OSC stream (length-prefixed) to a file");
  rep->add_option("--speed", rc.speed, "Playback speed; 0 = as fast as possible")
      ->check(CLI::NonNegativeNumber);

  // render
  auto* ren = app.add_subcommand("render", "Render a session log to WAV");
  std::string ren_log;
  fs::path ren_wav;
  ren->add_option("log", ren_log, "Session log")->required();
  ren->add_option("--wav", ren_wav, "Output WAV file")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate and render a scenario ensemble");
  SimulateCommand sc;
  std::string sim_scenario;
  std::string sim_out = "simulation";
  sim->add_option("scenario", sim_scenario, "Scenario INI file (built-in default if omitted)");
  sim->add_option("--seed", sc.seed, "Random seed");
  sim->add_option("--out-dir", sim_out, "Directory for logs, OSC dumps, mix and report");
  sim->add_option("--wav", sc.wav, "Mix output (default <out-dir>/mix.wav)");
  sim->add_flag("!--no-osc-dump", sc.osc_dump, "Skip per-performer OSC dumps");

  // monitor
  auto* mon = app.add_subcommand("monitor", "Print live qom / orientation / gate telemetry");
  MonitorCommand mc;
  std::string mon_replay, mon_scenario;
  bool mon_live = false;
  mon->add_option("--replay", mon_replay, "Session log to monitor");
  mon->add_option("--scenario", mon_scenario, "Scenario file to simulate and monitor");
  mon->add_flag("--live", mon_live, "Monitor the live armband");
  mon->add_option("--performer-index", mc.performer, "Scenario performer to monitor");
  mon->add_option("--seed", mc.seed, "Scenario seed");
  mon->add_option("--refresh-hz", mc.refresh_hz, "Telemetry lines per second of stream time");
  mon->add_option("--speed", mc.speed, "Replay speed; 0 = as fast as possible")
      ->check(CLI::NonNegativeNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (osc_host) cfg.osc_host = *osc_host;
    if (osc_port) cfg.osc_port = static_cast<std::uint16_t>(*osc_port);
    if (performer) cfg.performer_id = *performer;
    if (threshold) cfg.gate.threshold = *threshold;
    if (sample_rate) cfg.sample_rate = *sample_rate;
    if (port_path) cfg.serial_port = *port_path;
    cfg.validate();

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    if (*scan) {
      auto port = dongle::SerialPort::open(cfg.serial_port);
      cmd_scan(*port, std::chrono::milliseconds(std::llround(scan_seconds * 1000)), scan_all, out);
    } else if (*stream || *rec) {
      auto link = open_live(cfg, mac, err);
      dongle::LiveSource source(*link.client, dongle::steady_clock_us(), 5s);
      if (*stream) {
        osc::UdpSender udp(cfg.osc_host, cfg.osc_port);
        auto pc = cfg.pipeline_config();
        pc.render_audio = false;
        pipeline::PerformerPipeline p(pc, &udp);
        while (!g_stop) {
          auto r = source.next();
          if (!r) break;
          p.process(*r);
        }
        print_summary(p.summary(), out);
      } else {
        session::LogWriter writer(rec_out);
        std::optional<TimestampUs> first;
        while (!g_stop) {
          auto r = source.next();
          if (!r) break;
          if (!first) first = r->t_us;
          if (rec_seconds > 0 && static_cast<double>(r->t_us - *first) > rec_seconds * 1e6) break;
          writer.write(*r);
        }
        writer.close();
      }
      link.client->disconnect();
    } else if (*rep) {
      rc.log = rep_log;
      cmd_replay(cfg, rc, out);
    } else if (*ren) {
      cmd_replay(cfg, ReplayCommand{ren_log, ren_wav, false, std::nullopt, 0.0}, out);
    } else if (*sim) {
      if (!sim_scenario.empty()) sc.scenario = sim_scenario;
      sc.out_dir = sim_out;
      const auto result = cmd_simulate(cfg, sc, out);
      return result.all_ok ? kExitOk : kExitRuntime;
    } else if (*mon) {
      const int sources = int(!mon_replay.empty()) + int(!mon_scenario.empty()) + int(mon_live);
      if (sources > 1) {
        throw Error(ErrorKind::InvalidFlag, "choose one of --replay, --scenario, --live");
      }
      if (!(mc.refresh_hz > 0.0)) throw Error(ErrorKind::InvalidFlag, "--refresh-hz must be > 0");
      if (mon_live) {
        auto link = open_live(cfg, mac, err);
        dongle::LiveSource source(*link.client, dongle::steady_clock_us(), 5s);
        monitor_source(cfg, source, mc.refresh_hz, out);
        link.client->disconnect();
      } else {
        if (!mon_replay.empty()) mc.replay = mon_replay;
        if (!mon_scenario.empty()) mc.scenario = mon_scenario;
        cmd_monitor(cfg, mc, out);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::InvalidFlag:
      case ErrorKind::InvalidConfig:
        return kExitUsage;
      case ErrorKind::NoDongle:
      case ErrorKind::Timeout:
        return kExitHardware;
      default:
        return kExitRuntime;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace stillness::app
