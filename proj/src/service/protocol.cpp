#include <cstdio>

#include "retinavr/error.hpp"
#include "retinavr/service.hpp"

namespace retinavr {

namespace {

using nlohmann::json;

json message(const char* type) { return {{"type", type}, {"v", kProtocolVersion}}; }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json tip_json(const InstrumentState& s) { return {{"tip", s.tip}, {"axis", s.axis}, {"inside_eye", s.inside_eye}}; }

json visuals(const TaskState& state) {
  return std::visit(
      [&](const auto& t) -> json {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, NavigationState>) {
          json spheres = json::array();
          for (const auto& s : t.spheres) spheres.push_back({{"collected", s.collected}, {"exits", s.exits}});
          return {{"spheres", spheres},
                  {"active", t.active_contact ? json(*t.active_contact) : json(nullptr)},
                  {"dwell_ms", t.dwell_ms},
                  {"collected", t.collected_count()}};
        } else if constexpr (std::is_same_v<T, TremorState>) {
          return {{"s_mm", t.s_mm},
                  {"progress", t.path.length() > 0 ? t.s_mm / t.path.length() : 0.0},
                  {"target_center", t.target_center()},
                  {"in_contact", t.in_contact},
                  {"engaged", t.engaged},
                  {"exits", t.exits}};
        } else if constexpr (std::is_same_v<T, PeelingState>) {
          json attached = json::array();
          for (const auto& p : t.patches) attached.push_back(p.attached);
          return {{"attached", attached},
                  {"grasped", t.grasped_patch ? json(*t.grasped_patch) : json(nullptr)},
                  {"detached", t.detached_count()}};
        } else {
          json breaks = json::array();
          for (const auto& b : t.breaks) {
            json cells = json::array();
            for (const auto& c : b.cells) cells.push_back(c.accumulated);
            breaks.push_back({{"coverage", b.coverage_fraction(state.config.treat_threshold)},
                              {"treated", b.treated},
                              {"cells", cells}});
          }
          return {{"breaks", breaks}, {"spots", t.spots.size()}, {"treated", t.treated_count()}};
        }
      },
      state.task);
}

}  // namespace

json layout_json(const TaskState& state) {
  const TrocarRig rig = state.config.rig();
  json j{{"module", to_string(state.kind)},
         {"seed", state.seed},
         {"layout_hash", hex64(state.layout_hash)},
         {"retina_radius_mm", state.config.retina_radius_mm},
         {"trocars", {{"left", rig.trocar_left}, {"right", rig.trocar_right}}}};
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, NavigationState>) {
          json spheres = json::array();
          for (const auto& s : t.spheres) spheres.push_back({{"center", s.center}, {"radius", s.radius}});
          j["spheres"] = spheres;
        } else if constexpr (std::is_same_v<T, TremorState>) {
          j["path"] = {{"circle_center", t.path.circle_center},
                       {"normal", t.path.normal},
                       {"e1", t.path.e1},
                       {"e2", t.path.e2},
                       {"radius", t.path.radius},
                       {"arc_rad", t.path.arc_rad},
                       {"length", t.path.length()}};
          j["target_radius"] = t.target_radius;
        } else if constexpr (std::is_same_v<T, PeelingState>) {
          json patches = json::array();
          for (const auto& p : t.patches) patches.push_back({{"center", p.center}, {"ring", p.ring}, {"sector", p.sector}});
          j["rings"] = t.rings;
          j["sectors"] = t.sectors;
          j["patches"] = patches;
        } else {
          json breaks = json::array();
          for (const auto& b : t.breaks) {
            json cells = json::array();
            for (const auto& c : b.cells) cells.push_back(c.center);
            breaks.push_back({{"center", b.center},
                              {"normal", b.frame.normal},
                              {"r_in", b.r_in},
                              {"r_out", b.r_out},
                              {"rows", b.rows},
                              {"sectors", b.sectors},
                              {"cells", cells}});
          }
          j["breaks"] = breaks;
        }
      },
      state.task);
  return j;
}

json snapshot_json(const TaskState& state) {
  json j = message("state_snapshot");
  j["t_ms"] = state.last_t_ms.value_or(0);
  j["elapsed_ms"] = state.elapsed_ms;
  j["completed"] = state.completed;
  j["magnified"] = state.magnified;
  j["eye_rotation"] = {state.eye_rotation.w, state.eye_rotation.x, state.eye_rotation.y, state.eye_rotation.z};
  j["instruments"] = {{"light_pipe", tip_json(state.light_pipe)}, {"tool", tip_json(state.tool)}};
  j["touches"] = state.touch.touch_count;
  j["task"] = visuals(state);
  j["metrics"] = to_json(finalize_metrics(state, true));
  return j;
}

json error_message(ErrorCode code, const std::string& text) {
  json j = message("error");
  j["code"] = to_string(code);
  j["message"] = text;
  return j;
}

// ------------------------------------------------------------ SessionRegistry

SessionRegistry::SessionRegistry(std::string log_dir) : log_dir_(std::move(log_dir)) {}

SessionRegistry::Entry SessionRegistry::open(TaskKind module, std::uint64_t seed) {
  std::lock_guard lock(mu_);
  Entry e{{}, module, seed, {}};
  for (;;) {
    char id[32];
    std::snprintf(id, sizeof id, "s%05d", next_++);
    e.session_id = id;
    if (log_dir_.empty()) break;
    const auto path = std::filesystem::path(log_dir_) / (e.session_id + ".session.jsonl");
    // Earlier server runs may have used the same ids.
    if (!std::filesystem::exists(path)) {
      e.log_path = path.string();
      break;
    }
  }
  entries_.push_back(e);
  return e;
}

std::vector<SessionRegistry::Entry> SessionRegistry::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

// ------------------------------------------------------------ ProtocolSession

ProtocolSession::ProtocolSession(const ServiceOptions& options, std::shared_ptr<SessionRegistry> registry)
    : options_(options), registry_(std::move(registry)) {
  if (!registry_) registry_ = std::make_shared<SessionRegistry>(options_.log_dir);
}

ProtocolSession::~ProtocolSession() { close_log(); }

std::vector<json> ProtocolSession::handle(const std::string& text) {
  json m;
  try {
    m = json::parse(text);
  } catch (const json::exception& e) {
    return fail(ErrorCode::ProtocolViolation, std::string("message is not JSON: ") + e.what());
  }
  return handle(m);
}

std::vector<json> ProtocolSession::handle(const json& m) {
  if (closed_) return {error_message(ErrorCode::ProtocolViolation, "session already ended")};
  if (!m.is_object() || !m.contains("type") || !m["type"].is_string()) {
    return fail(ErrorCode::ProtocolViolation, "message needs a string 'type'");
  }
  if (!m.contains("v") || m["v"] != kProtocolVersion) {
    return fail(ErrorCode::VersionMismatch, "protocol version must be 1");
  }
  const std::string type = m["type"];
  try {
    if (type == "hello") return {};
    if (type == "create_session") return create(m);
    if (type == "input_frame") return input(m);
    if (type == "end_session") {
      if (!state_) return fail(ErrorCode::ProtocolViolation, "end_session before create_session");
      return finish(true);
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const json::exception& e) {
    return fail(ErrorCode::ProtocolViolation, std::string("malformed ") + type + ": " + e.what());
  }
  return fail(ErrorCode::ProtocolViolation, "unknown message type '" + type + "'");
}

std::vector<json> ProtocolSession::create(const json& m) {
  if (state_) return fail(ErrorCode::ProtocolViolation, "session already created on this connection");
  const TaskKind kind = parse_task_kind(m.at("module").get<std::string>());
  const std::uint64_t seed = m.at("seed").get<std::uint64_t>();
  const ParticipantMeta participant = m.contains("participant") ? participant_from_json(m["participant"]) : ParticipantMeta{};

  state_ = init_task(kind, options_.config, seed);
  const auto entry = registry_->open(kind, seed);
  session_id_ = entry.session_id;
  if (!entry.log_path.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options_.log_dir, ec);
    log_file_.open(entry.log_path);
    if (!log_file_) throw Error(ErrorCode::IoError, "cannot write '" + entry.log_path + "'");
    log_path_ = entry.log_path;
    writer_ = std::make_unique<LogWriter>(log_file_, make_header(*state_, participant));
    log_file_.flush();
  }
  json reply = message("session_created");
  reply["session_id"] = session_id_;
  reply["layout"] = layout_json(*state_);
  return {reply};
}

std::vector<json> ProtocolSession::input(const json& m) {
  if (!state_) return fail(ErrorCode::ProtocolViolation, "input_frame before create_session");
  const FrameRecord frame = frame_from_json(m.at("frame"));
  const EventList events = advance(*state_, frame);
  if (writer_) {
    writer_->frame(frame);
    log_file_.flush();
  }
  pending_events_.insert(pending_events_.end(), events.begin(), events.end());

  std::vector<json> out;
  for (const auto& e : events) {
    json j = message("event");
    j["event"] = to_json(e);
    out.push_back(std::move(j));
  }
  if (state_->completed || !last_snapshot_ms_ || frame.t_ms - *last_snapshot_ms_ >= kSnapshotIntervalMs) {
    out.push_back(snapshot_json(*state_));
    last_snapshot_ms_ = frame.t_ms;
  }
  if (state_->completed) {
    auto done = finish(false);
    out.insert(out.end(), done.begin(), done.end());
  }
  return out;
}

std::vector<json> ProtocolSession::finish(bool force) {
  json j = message("completed");
  j["session_id"] = session_id_;
  j["metrics"] = to_json(finalize_metrics(*state_, force));
  if (!log_path_.empty()) j["log_path"] = log_path_;
  close_log();
  closed_ = true;
  return {j};
}

std::vector<json> ProtocolSession::fail(ErrorCode code, const std::string& text) {
  close_log();
  closed_ = true;
  return {error_message(code, text)};
}

void ProtocolSession::close_log() {
  if (!writer_) return;
  for (const auto& e : pending_events_) writer_->event(e);
  pending_events_.clear();
  writer_.reset();
  log_file_.close();
}

}  // namespace retinavr
