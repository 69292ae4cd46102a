#include <cmath>
#include <string>

#include "retinavr/error.hpp"
#include "retinavr/task.hpp"

namespace retinavr {

namespace {

void validate_input(const TickInput& input) {
  if (!is_finite(input.left_pose) || !is_finite(input.right_pose) ||
      !std::isfinite(input.joystick_right[0]) || !std::isfinite(input.joystick_right[1])) {
    throw Error(ErrorCode::NonFiniteInput, "tick input at t=" + std::to_string(input.t_ms) + " is not finite");
  }
}

}  // namespace

bool task_finished(const TaskState& state) {
  return std::visit(
      [](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, NavigationState>) {
          return t.collected_count() == static_cast<int>(t.spheres.size());
        } else if constexpr (std::is_same_v<T, TremorState>) {
          return t.s_mm >= t.path.length();
        } else if constexpr (std::is_same_v<T, PeelingState>) {
          return t.detached_count() == static_cast<int>(t.patches.size());
        } else {
          return t.treated_count() == static_cast<int>(t.breaks.size());
        }
      },
      state.task);
}

EventList advance(TaskState& state, const TickInput& input) {
  if (state.completed) throw Error(ErrorCode::TaskAlreadyComplete, "task already completed");
  if (state.last_t_ms && input.t_ms <= *state.last_t_ms) {
    throw Error(ErrorCode::NonMonotonicTimestamp,
                "t_ms " + std::to_string(input.t_ms) + " does not follow " + std::to_string(*state.last_t_ms));
  }
  validate_input(input);

  const TaskConfig& cfg = state.config;
  const std::int64_t dt_ms = state.last_t_ms ? input.t_ms - *state.last_t_ms : 0;
  const std::int64_t t = input.t_ms;
  state.last_t_ms = t;
  state.elapsed_ms += dt_ms;

  EventList events;

  state.eye_rotation =
      integrate_eye_rotation(state.eye_rotation, input.joystick_right[0], input.joystick_right[1],
                             static_cast<double>(dt_ms) / 1000.0, cfg.eye_rotation_rate_deg_s);
  const EyeModel eye = state.eye();
  const TrocarRig rig = cfg.rig();
  const InstrumentKind right_tool =
      state.kind == TaskKind::Laser ? InstrumentKind::LaserProbe : InstrumentKind::Vitrector;
  state.light_pipe = map_controller_pose(input.left_pose, rig, state.calibration, Hand::Left, eye);
  state.tool = map_controller_pose(input.right_pose, rig, state.calibration, Hand::Right, eye, right_tool);

  if (input.button_x_left && !state.x_was_down) {
    state.magnified = !state.magnified;
    events.push_back(TaskEvent{EventType::MagnificationToggled, t, -1, {}, state.magnified ? 1.0 : 0.0});
  }
  state.x_was_down = input.button_x_left;

  const int touches_before = state.touch.touch_count;
  state.touch = update_touch(state.touch, state.tool.tip, eye);
  if (state.touch.touch_count != touches_before) {
    events.push_back(TaskEvent{EventType::RetinalTouch, t, -1, state.tool.tip,
                               static_cast<double>(state.touch.touch_count)});
  }

  const Point3 tip = state.tool.tip;
  std::visit(
      [&](auto& task) {
        using T = std::decay_t<decltype(task)>;
        if constexpr (std::is_same_v<T, NavigationState>) {
          navigation_rule(task, tip, dt_ms, t, cfg, events);
        } else if constexpr (std::is_same_v<T, TremorState>) {
          tremor_rule(task, tip, dt_ms, cfg, events, t);
        } else if constexpr (std::is_same_v<T, PeelingState>) {
          peeling_rule(task, tip, input.grip_right, cfg, events, t);
        } else {
          laser_rule(task, state.tool, input.grip_right, t, cfg, eye, events);
        }
      },
      state.task);

  if (task_finished(state)) {
    state.completed = true;
    events.push_back(TaskEvent{EventType::TaskCompleted, t, -1, {}, static_cast<double>(state.elapsed_ms)});
  }
  return events;
}

std::pair<TaskState, EventList> tick(TaskState state, const TickInput& input) {
  EventList events = advance(state, input);
  return {std::move(state), std::move(events)};
}

}  // namespace retinavr
