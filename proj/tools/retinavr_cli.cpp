// retinavr: command-line front end (run, replay, synth, analyze, reproduce-table6, serve).

#include <pthread.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "retinavr/analytics.hpp"
#include "retinavr/error.hpp"
#include "retinavr/service.hpp"
#include "retinavr/trainee.hpp"

using namespace retinavr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + out_path + "'");
  out << j.dump(2) << "\n";
}

TaskConfig load_config(const std::string& flag) {
  std::string path = flag;
  if (path.empty()) {
    if (const char* env = std::getenv("RETINAVR_CONFIG")) path = env;
  }
  return path.empty() ? TaskConfig{} : load_config_file(path);
}

SessionLog load_session(const std::string& path) {
  std::error_code ec;
  if (fs::exists(path, ec) && fs::file_size(path, ec) == 0) {
    throw Error(ErrorCode::IncompleteSession, "'" + path + "' is empty");
  }
  return read_log(path);
}

void check_module(const SessionLog& log, const std::string& module) {
  if (!module.empty() && parse_task_kind(module) != log.header.module) {
    throw Error(ErrorCode::InvalidConfig,
                "log holds a " + std::string(to_string(log.header.module)) + " session, not " + module);
  }
}

std::vector<TaskKind> modules_from(const std::string& name) {
  if (name == "all") return {std::begin(kAllTasks), std::end(kAllTasks)};
  return {parse_task_kind(name)};
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
  return in;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vitreoretinal surgery training simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "TaskConfig JSON (default: $RETINAVR_CONFIG)");

  // run / replay
  std::string module, input, out;
  auto* run = app.add_subcommand("run", "Replay a finished session log and write its metrics");
  run->add_option("--module", module, "Expected module")->required();
  run->add_option("--input", input, "Session log (*.session.jsonl)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Metrics JSON (default: stdout)");

  auto* replay_cmd = app.add_subcommand("replay", "Replay any log, finished or not, and dump its events");
  replay_cmd->add_option("--module", module, "Expected module");
  replay_cmd->add_option("--input", input, "Session log")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", out, "Output JSON (default: stdout)");

  // synth
  std::string profile_name, group_name, id_prefix;
  std::string synth_module = "all";
  std::uint64_t seed = 1;
  int runs = 3, participants = 1;
  auto* synth = app.add_subcommand("synth", "Generate synthetic trainee sessions");
  synth->add_option("--profile", profile_name, "novice | expert | ideal")->required();
  synth->add_option("--module", synth_module, "Module or 'all'")->capture_default_str();
  synth->add_option("--seed", seed, "Base seed")->required();
  synth->add_option("--runs", runs, "Runs per participant")->capture_default_str()->check(CLI::Range(1, 99));
  synth->add_option("--participants", participants, "Number of participants")
      ->capture_default_str()
      ->check(CLI::Range(1, 999));
  synth->add_option("--group", group_name, "Novice | Expert (default follows the profile)");
  synth->add_option("--id-prefix", id_prefix, "Participant id prefix (default: first letter of the profile)");
  synth->add_option("--out", out, "Output directory")->required();

  // analyze
  std::string metrics_dir, report_dir;
  auto* analyze_cmd = app.add_subcommand("analyze", "Effect sizes, mixed models and heatmaps over a log directory");
  analyze_cmd->add_option("--metrics", metrics_dir, "Directory of *.session.jsonl logs")
      ->required()
      ->check(CLI::ExistingDirectory);
  analyze_cmd->add_option("--report", report_dir, "Report directory")->required();

  // reproduce-table6
  std::string summaries = std::string(RETINAVR_DATA_DIR) + "/supp_tables.csv";
  std::string effects;
  bool all_runs = false, as_json = false;
  auto* table6 = app.add_subcommand("reproduce-table6", "Recompute effect sizes from published group summaries");
  table6->add_option("--summaries", summaries, "Group summaries CSV")->capture_default_str()->check(CLI::ExistingFile);
  table6->add_option("--effects", effects, "Published effect sizes CSV to compare against")
      ->check(CLI::ExistingFile);
  table6->add_flag("--all-runs", all_runs, "Include the per-run rows");
  table6->add_flag("--json", as_json, "Emit JSON instead of a table");

  // serve
  std::string host = "127.0.0.1", log_dir = "sessions";
  int port = 8765;
  auto* serve = app.add_subcommand("serve", "Run the WebSocket session server");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str()->check(CLI::Range(0, 65535));
  serve->add_option("--log-dir", log_dir, "Where live sessions are saved")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"code", "UsageError"}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  }

  try {
    const TaskConfig config = load_config(config_path);

    if (*run) {
      const SessionLog log = load_session(input);
      check_module(log, module);
      const ReplayResult r = replay_full(log);
      if (!r.final_state.completed) {
        throw Error(ErrorCode::IncompleteSession,
                    "'" + input + "' ends before the " + std::string(to_string(log.header.module)) + " task completed");
      }
      emit(to_json(r.metrics), out);
    } else if (*replay_cmd) {
      const SessionLog log = load_session(input);
      check_module(log, module);
      const ReplayResult r = replay_full(log);
      json events = json::array();
      for (const auto& e : r.events) events.push_back(to_json(e));
      emit({{"metrics", to_json(r.metrics)}, {"events", events}}, out);
    } else if (*synth) {
      CohortOptions o;
      o.profile = profile_by_name(profile_name);
      o.group = group_name.empty() ? (profile_name == "novice" ? Group::Novice : Group::Expert) : parse_group(group_name);
      o.participants = participants;
      o.runs = runs;
      o.seed = seed;
      o.modules = modules_from(synth_module);
      o.id_prefix = id_prefix.empty() ? profile_name.substr(0, 1) : id_prefix;
      o.config = config;
      fs::create_directories(out);
      int written = 0;
      for (const auto& g : synthesize_cohort(o)) {
        const auto& h = g.log.header;
        const auto name = h.participant.participant_id + "_run" + std::to_string(h.participant.run_index) + "_" +
                          std::string(to_string(h.module)) + ".session.jsonl";
        write_log((fs::path(out) / name).string(), g.log);
        ++written;
      }
      std::cout << json{{"sessions", written}, {"out", out}}.dump() << "\n";
    } else if (*analyze_cmd) {
      std::vector<fs::path> paths;
      for (const auto& entry : fs::recursive_directory_iterator(metrics_dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > 14 && name.ends_with(".session.jsonl")) paths.push_back(entry.path());
      }
      std::sort(paths.begin(), paths.end());
      if (paths.empty()) throw Error(ErrorCode::EmptyInput, "no *.session.jsonl logs under '" + metrics_dir + "'");
      std::vector<SessionLog> logs;
      for (const auto& p : paths) logs.push_back(read_log(p.string()));
      const AnalysisReport report = analyze_sessions(logs, config);
      write_report(report, report_dir);
      std::cout << json{{"sessions", logs.size()}, {"report", report_dir}, {"ring_mass", report.ring_mass}}.dump()
                << "\n";
    } else if (*table6) {
      auto sin = open_in(summaries);
      const auto published = read_published_summaries(sin);
      std::vector<PublishedEffect> targets;
      if (!effects.empty()) {
        auto ein = open_in(effects);
        targets = read_published_effects(ein);
      } else {
        // No reference table: one target per (module, metric, run) with both groups present.
        for (const auto& s : published) {
          if (s.group != Group::Novice) continue;
          targets.push_back({s.module, s.metric, s.run, {}});
        }
      }
      json rows = json::array();
      for (const auto& c : reproduce_effects(published, targets)) {
        const auto& p = c.published;
        if (!all_runs && p.run != "combined") continue;
        json row{{"module", to_string(p.module)},
                 {"metric", p.metric},
                 {"run", p.run},
                 {"d", c.computed.d},
                 {"ci_low", c.computed.ci_low},
                 {"ci_high", c.computed.ci_high},
                 {"band", to_string(c.computed.band)}};
        if (!effects.empty()) {
          row["published"] = to_json(p.effect);
          row["within_tolerance"] = c.within(0.02, p.run == "combined" ? 0.05 : 0.06);
        }
        rows.push_back(row);
        if (!as_json) {
          std::string line = std::string(to_string(p.module)) + "  " + p.metric + "  " + p.run + "  " +
                             fmt2(c.computed.d) + " [" + fmt2(c.computed.ci_low) + ", " + fmt2(c.computed.ci_high) +
                             "]  " + std::string(to_string(c.computed.band));
          if (!effects.empty()) {
            line += "  published " + fmt2(p.effect.d) + " [" + fmt2(p.effect.ci_low) + ", " + fmt2(p.effect.ci_high) + "]" +
                    (row["within_tolerance"].get<bool>() ? "" : "  MISMATCH");
          }
          std::cout << line << "\n";
        }
      }
      if (as_json) std::cout << rows.dump(2) << "\n";
    } else if (*serve) {
      // Block the stop signals before any thread starts so only sigwait sees them.
      sigset_t stop_signals;
      sigemptyset(&stop_signals);
      sigaddset(&stop_signals, SIGINT);
      sigaddset(&stop_signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
      Server server(ServiceOptions{config, log_dir});
      const auto bound = server.start(host, static_cast<unsigned short>(port));
      std::cout << json{{"listening", host + ":" + std::to_string(bound)}, {"log_dir", log_dir}}.dump() << std::endl;
      int sig = 0;
      sigwait(&stop_signals, &sig);
      server.stop();
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "InternalError"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
  return 0;
}
