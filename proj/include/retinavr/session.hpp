#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "retinavr/config.hpp"
#include "retinavr/task.hpp"

namespace retinavr {

enum class Group { Novice, Expert };
enum class Sex { Female, Male };

std::string_view to_string(Group g);
std::string_view to_string(Sex s);
Group parse_group(std::string_view s);
Sex parse_sex(std::string_view s);

struct ParticipantMeta {
  std::string participant_id = "anonymous";
  Group group = Group::Novice;
  double age = 0.0;
  Sex sex = Sex::Female;
  int run_index = 1;

  bool operator==(const ParticipantMeta&) const = default;
};

struct SessionHeader {
  TaskKind module = TaskKind::Navigation;
  std::uint64_t seed = 0;
  std::uint64_t layout_hash = 0;
  TaskConfig config;
  CalibrationOffset calibration;
  ParticipantMeta participant;

  bool operator==(const SessionHeader&) const = default;
};

using FrameRecord = TickInput;

struct SessionLog {
  SessionHeader header;
  std::vector<FrameRecord> frames;
  /// Optional; regenerable from the frames.
  EventList events;

  bool operator==(const SessionLog&) const = default;
};

inline constexpr int kLogVersion = 1;

/// Header for a session that starts from `state` (fresh from init_task).
SessionHeader make_header(const TaskState& state, const ParticipantMeta& participant);

nlohmann::json to_json(const FrameRecord& frame);
FrameRecord frame_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParticipantMeta& meta);
ParticipantMeta participant_from_json(const nlohmann::json& j);
nlohmann::json header_to_json(const SessionHeader& header);

/// Line-delimited JSON: header line, then frame lines, then event lines.
void write_log(std::ostream& out, const SessionLog& log);
void write_log(const std::string& path, const SessionLog& log);
std::string serialize_log(const SessionLog& log);

/// Throws CorruptLog (with the 1-based line number) or VersionMismatch.
SessionLog read_log(std::istream& in);
SessionLog read_log(const std::string& path);
SessionLog parse_log(const std::string& text);

/// Appends a session to a stream as it runs. Used for live capture.
class LogWriter {
 public:
  LogWriter(std::ostream& out, const SessionHeader& header);
  void frame(const FrameRecord& f);
  void event(const TaskEvent& e);

 private:
  std::ostream& out_;
};

/// Rebuilds the initial task state and checks the stored layout hash.
/// Throws SeedMismatch when the seed no longer reproduces the logged layout.
TaskState start_from_header(const SessionHeader& header);

struct ReplayResult {
  TaskState final_state;
  EventList events;
  MetricsReport metrics;  // force-finalized when the log stops early
};

ReplayResult replay_full(const SessionLog& log);
MetricsReport replay(const SessionLog& log);

// ------------------------------------------------------------------ Metrics

struct MetricsRow {
  std::string participant_id;
  Group group = Group::Novice;
  double age = 0.0;
  Sex sex = Sex::Female;
  int run_index = 1;
  TaskKind module = TaskKind::Navigation;
  std::string metric;
  double value = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  bool operator==(const MetricsTable&) const = default;
};

/// One finished session as seen by the exporter.
struct SessionResult {
  ParticipantMeta participant;
  MetricsReport report;
};

/// Replays every log. Throws IncompleteSession naming the offending sessions
/// and DuplicateSession for repeated (participant, run, module).
MetricsTable export_metrics(const std::vector<SessionLog>& logs);
MetricsTable export_metrics(const std::vector<SessionResult>& results);

void write_metrics_csv(std::ostream& out, const MetricsTable& table);
MetricsTable read_metrics_csv(std::istream& in);
nlohmann::json to_json(const MetricsTable& table);
MetricsTable metrics_table_from_json(const nlohmann::json& j);

}  // namespace retinavr
