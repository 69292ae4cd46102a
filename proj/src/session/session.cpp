#include "retinavr/session.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "retinavr/error.hpp"

namespace retinavr {

namespace {

constexpr const char* kFormat = "retinavr-session";

std::string hex64(std::uint64_t v) {
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + 16, v, 16);
  std::string s(buf, end);
  return std::string(16 - s.size(), '0') + s;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad hex '" + s + "'");
  return v;
}

[[noreturn]] void corrupt(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::CorruptLog, "line " + std::to_string(line) + ": " + what);
}

SessionHeader header_from_json(const nlohmann::json& j) {
  SessionHeader h;
  h.module = parse_task_kind(j.at("module").get<std::string>());
  h.seed = j.at("seed").get<std::uint64_t>();
  h.layout_hash = parse_hex64(j.at("layout_hash").get<std::string>());
  h.config = j.at("config").get<TaskConfig>();
  h.calibration.pose_offset_left = j.at("calibration").at(0).get<Pose>();
  h.calibration.pose_offset_right = j.at("calibration").at(1).get<Pose>();
  h.participant = participant_from_json(j.at("participant"));
  return h;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Splits RFC-4180 records; quoted fields may span lines.
std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false;
  char c;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_field();
      records.push_back(std::move(record));
      record.clear();
    } else if (c != '\r') {
      field += c;
      field_started = true;
    }
  }
  if (field_started || !record.empty()) {
    end_field();
    records.push_back(std::move(record));
  }
  return records;
}

const std::vector<std::string> kCsvColumns = {"participant_id", "group", "age",    "sex",
                                              "run_index",      "module", "metric", "value"};

}  // namespace

std::string_view to_string(Group g) { return g == Group::Novice ? "Novice" : "Expert"; }
std::string_view to_string(Sex s) { return s == Sex::Female ? "F" : "M"; }

Group parse_group(std::string_view s) {
  if (s == "Novice" || s == "novice") return Group::Novice;
  if (s == "Expert" || s == "expert") return Group::Expert;
  throw Error(ErrorCode::InvalidConfig, "unknown group '" + std::string(s) + "'");
}

Sex parse_sex(std::string_view s) {
  if (s == "F" || s == "f") return Sex::Female;
  if (s == "M" || s == "m") return Sex::Male;
  throw Error(ErrorCode::InvalidConfig, "unknown sex '" + std::string(s) + "'");
}

SessionHeader make_header(const TaskState& state, const ParticipantMeta& participant) {
  return SessionHeader{state.kind, state.seed, state.layout_hash, state.config, state.calibration, participant};
}

nlohmann::json to_json(const FrameRecord& f) {
  if (!is_finite(f.left_pose) || !is_finite(f.right_pose) || !std::isfinite(f.joystick_right[0]) ||
      !std::isfinite(f.joystick_right[1])) {
    throw Error(ErrorCode::NonFiniteInput, "frame at t=" + std::to_string(f.t_ms) + " is not finite");
  }
  return {{"type", "frame"},
          {"t_ms", f.t_ms},
          {"left", f.left_pose},
          {"right", f.right_pose},
          {"grip", f.grip_right},
          {"x", f.button_x_left},
          {"joy", {f.joystick_right[0], f.joystick_right[1]}}};
}

FrameRecord frame_from_json(const nlohmann::json& j) {
  FrameRecord f;
  f.t_ms = j.at("t_ms").get<std::int64_t>();
  f.left_pose = j.at("left").get<Pose>();
  f.right_pose = j.at("right").get<Pose>();
  f.grip_right = j.at("grip").get<bool>();
  f.button_x_left = j.at("x").get<bool>();
  f.joystick_right = {j.at("joy").at(0).get<double>(), j.at("joy").at(1).get<double>()};
  return f;
}

nlohmann::json to_json(const ParticipantMeta& m) {
  return {{"participant_id", m.participant_id},
          {"group", to_string(m.group)},
          {"age", m.age},
          {"sex", to_string(m.sex)},
          {"run_index", m.run_index}};
}

ParticipantMeta participant_from_json(const nlohmann::json& j) {
  ParticipantMeta m;
  m.participant_id = j.value("participant_id", m.participant_id);
  if (j.contains("group")) m.group = parse_group(j.at("group").get<std::string>());
  m.age = j.value("age", m.age);
  if (j.contains("sex")) m.sex = parse_sex(j.at("sex").get<std::string>());
  m.run_index = j.value("run_index", m.run_index);
  return m;
}

nlohmann::json header_to_json(const SessionHeader& h) {
  return {{"type", "header"},
          {"format", kFormat},
          {"version", kLogVersion},
          {"module", to_string(h.module)},
          {"seed", h.seed},
          {"layout_hash", hex64(h.layout_hash)},
          {"config", h.config},
          {"calibration", {h.calibration.pose_offset_left, h.calibration.pose_offset_right}},
          {"participant", to_json(h.participant)}};
}

LogWriter::LogWriter(std::ostream& out, const SessionHeader& header) : out_(out) {
  out_ << header_to_json(header).dump() << '\n';
}

void LogWriter::frame(const FrameRecord& f) { out_ << to_json(f).dump() << '\n'; }

void LogWriter::event(const TaskEvent& e) {
  nlohmann::json j = to_json(e);
  j["event"] = j["type"];
  j["type"] = "event";
  out_ << j.dump() << '\n';
}

void write_log(std::ostream& out, const SessionLog& log) {
  LogWriter w(out, log.header);
  for (const auto& f : log.frames) w.frame(f);
  for (const auto& e : log.events) w.event(e);
}

std::string serialize_log(const SessionLog& log) {
  std::ostringstream os;
  write_log(os, log);
  return os.str();
}

void write_log(const std::string& path, const SessionLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  write_log(out, log);
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

SessionLog read_log(std::istream& in) {
  SessionLog log;
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  bool in_events = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      corrupt(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) corrupt(line_no, "record has no type");
    const std::string type = j["type"].get<std::string>();
    try {
      if (!have_header) {
        if (type != "header" || j.value("format", "") != kFormat) corrupt(line_no, "expected session header");
        const int version = j.at("version").get<int>();
        if (version != kLogVersion) {
          throw Error(ErrorCode::VersionMismatch,
                      "log version " + std::to_string(version) + ", expected " + std::to_string(kLogVersion));
        }
        log.header = header_from_json(j);
        have_header = true;
      } else if (type == "frame") {
        if (in_events) corrupt(line_no, "frame after events");
        FrameRecord f = frame_from_json(j);
        if (!log.frames.empty() && f.t_ms <= log.frames.back().t_ms) {
          corrupt(line_no, "t_ms " + std::to_string(f.t_ms) + " does not increase");
        }
        log.frames.push_back(f);
      } else if (type == "event") {
        in_events = true;
        nlohmann::json e = j;
        e["type"] = j.at("event");
        log.events.push_back(event_from_json(e));
      } else {
        corrupt(line_no, "unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      corrupt(line_no, e.what());
    } catch (const std::invalid_argument& e) {
      corrupt(line_no, e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::VersionMismatch) throw;
      if (e.code() == ErrorCode::CorruptLog && std::string_view(e.what()).starts_with("line ")) throw;
      corrupt(line_no, e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::CorruptLog, "line " + std::to_string(line_no + 1) + ": missing header");
  return log;
}

SessionLog read_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_log(in);
}

SessionLog parse_log(const std::string& text) {
  std::istringstream is(text);
  return read_log(is);
}

TaskState start_from_header(const SessionHeader& h) {
  TaskState state = init_task(h.module, h.config, h.seed, h.calibration);
  if (state.layout_hash != h.layout_hash) {
    throw Error(ErrorCode::SeedMismatch, "seed " + std::to_string(h.seed) + " gives layout " +
                                             hex64(state.layout_hash) + ", log recorded " + hex64(h.layout_hash));
  }
  return state;
}

ReplayResult replay_full(const SessionLog& log) {
  ReplayResult r{start_from_header(log.header), {}, {}};
  for (const auto& f : log.frames) {
    EventList ev = advance(r.final_state, f);
    r.events.insert(r.events.end(), ev.begin(), ev.end());
  }
  r.metrics = finalize_metrics(r.final_state, true);
  return r;
}

MetricsReport replay(const SessionLog& log) { return replay_full(log).metrics; }

MetricsTable export_metrics(const std::vector<SessionLog>& logs) {
  std::vector<SessionResult> results;
  results.reserve(logs.size());
  for (const auto& log : logs) results.push_back({log.header.participant, replay(log)});
  return export_metrics(results);
}

MetricsTable export_metrics(const std::vector<SessionResult>& results) {
  std::vector<std::string> incomplete;
  std::set<std::tuple<std::string, int, TaskKind>> seen;
  for (const auto& r : results) {
    const auto key = std::make_tuple(r.participant.participant_id, r.participant.run_index, r.report.module);
    const std::string id = r.participant.participant_id + "/run" + std::to_string(r.participant.run_index) + "/" +
                           std::string(to_string(r.report.module));
    if (!seen.insert(key).second) throw Error(ErrorCode::DuplicateSession, "duplicate session " + id);
    if (!r.report.completed) incomplete.push_back(id);
  }
  if (!incomplete.empty()) {
    std::string msg = "incomplete sessions:";
    for (const auto& id : incomplete) msg += " " + id;
    throw Error(ErrorCode::IncompleteSession, msg);
  }

  std::vector<const SessionResult*> order;
  for (const auto& r : results) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const SessionResult* a, const SessionResult* b) {
    return std::tie(a->participant.participant_id, a->participant.run_index, a->report.module) <
           std::tie(b->participant.participant_id, b->participant.run_index, b->report.module);
  });

  MetricsTable table;
  for (const SessionResult* r : order) {
    for (const auto& m : r->report.values()) {
      if (!std::isfinite(m.value)) throw Error(ErrorCode::NonFiniteInput, "metric " + m.name + " is not finite");
      const auto& p = r->participant;
      table.rows.push_back({p.participant_id, p.group, p.age, p.sex, p.run_index, r->report.module, m.name, m.value});
    }
  }
  return table;
}

void write_metrics_csv(std::ostream& out, const MetricsTable& table) {
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) out << (i ? "," : "") << kCsvColumns[i];
  out << "\r\n";
  for (const auto& r : table.rows) {
    out << csv_field(r.participant_id) << ',' << to_string(r.group) << ',' << format_double(r.age) << ','
        << to_string(r.sex) << ',' << r.run_index << ',' << to_string(r.module) << ',' << csv_field(r.metric) << ','
        << format_double(r.value) << "\r\n";
  }
}

MetricsTable read_metrics_csv(std::istream& in) {
  const auto records = parse_csv(in);
  if (records.empty() || records[0] != kCsvColumns) {
    throw Error(ErrorCode::CorruptLog, "line 1: metrics CSV header does not match");
  }
  MetricsTable table;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != kCsvColumns.size()) corrupt(i + 1, "expected 8 fields");
    try {
      MetricsRow r;
      r.participant_id = f[0];
      r.group = parse_group(f[1]);
      r.age = std::stod(f[2]);
      r.sex = parse_sex(f[3]);
      r.run_index = std::stoi(f[4]);
      r.module = parse_task_kind(f[5]);
      r.metric = f[6];
      r.value = std::stod(f[7]);
      table.rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      corrupt(i + 1, e.what());
    }
  }
  return table;
}

nlohmann::json to_json(const MetricsTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"participant_id", r.participant_id},
                    {"group", to_string(r.group)},
                    {"age", r.age},
                    {"sex", to_string(r.sex)},
                    {"run_index", r.run_index},
                    {"module", to_string(r.module)},
                    {"metric", r.metric},
                    {"value", r.value}});
  }
  return {{"rows", rows}};
}

MetricsTable metrics_table_from_json(const nlohmann::json& j) {
  try {
    MetricsTable table;
    for (const auto& r : j.at("rows")) {
      table.rows.push_back({r.at("participant_id").get<std::string>(), parse_group(r.at("group").get<std::string>()),
                            r.at("age").get<double>(), parse_sex(r.at("sex").get<std::string>()),
                            r.at("run_index").get<int>(), parse_task_kind(r.at("module").get<std::string>()),
                            r.at("metric").get<std::string>(), r.at("value").get<double>()});
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptLog, std::string("malformed metrics table: ") + e.what());
  }
}

}  // namespace retinavr
