#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "retinavr/session.hpp"

namespace retinavr {

enum class GraspStrategy { FewLargePulls, ManySmallPulls };

/// Knobs of a simulated operator. Ranges are checked by validate().
struct SkillProfile {
  /// Per-axis stationary SD of the Ornstein-Uhlenbeck hand noise, controller space. [0, 3]
  double tremor_sd_mm = 0.0;
  /// Multiplier on reach, pursuit, pull and sweep speeds. (0, 3]
  double speed_factor = 1.0;
  /// Approach margins, pauses and detours around obstacles. [0, 1]
  double caution = 0.5;
  /// Rate of deliberate over-travel toward the retina. [0, 1]
  double recklessness = 0.0;
  GraspStrategy grasp_strategy = GraspStrategy::FewLargePulls;
  /// Laser aim scatter around the annulus centerline, mm. [0, 2]
  double aim_sd_mm = 0.0;
  /// Fraction of laser aim drawn toward the tear center. [0, 1]
  double center_bias = 0.0;

  void validate() const;
  bool operator==(const SkillProfile&) const = default;

  static SkillProfile novice();
  static SkillProfile expert();
  /// Noise-free, fully cautious operator.
  static SkillProfile ideal();
};

/// Parses "novice", "expert" or "ideal".
SkillProfile profile_by_name(std::string_view name);

nlohmann::json to_json(const SkillProfile& p);

/// Multiplicative per-run improvement: run r scales noise by kRunImprovement^(r-1)
/// and divides timing by it.
inline constexpr double kRunImprovement = 0.85;

struct GeneratedSession {
  SessionLog log;
  MetricsReport live;  // metrics of the engine that ran alongside generation
};

/// Runs the engine closed-loop while synthesizing ~90 Hz controller frames.
/// The layout comes from `seed`; behaviour noise from (seed, kind, run_index).
/// Throws GenerationTimeout when the task is not finished within `max_seconds`.
GeneratedSession generate(TaskKind kind, const SkillProfile& profile, std::uint64_t seed, int run_index,
                          const ParticipantMeta& participant = {}, const TaskConfig& config = {},
                          double max_seconds = 900.0);

SessionLog generate_session(TaskKind kind, const SkillProfile& profile, std::uint64_t seed, int run_index);

/// A group of synthetic participants, each doing every module `runs` times.
struct CohortOptions {
  SkillProfile profile;
  Group group = Group::Novice;
  int participants = 10;
  int runs = 3;
  std::uint64_t seed = 1;
  std::vector<TaskKind> modules{std::begin(kAllTasks), std::end(kAllTasks)};
  std::string id_prefix = "p";
  TaskConfig config;
};

/// Layout seed of one session; participants and runs never share a layout.
std::uint64_t session_seed(std::uint64_t base, int participant, int run_index);

/// Demographics drawn from `seed`: novices aged 22-30 and mostly female,
/// experts aged 35-60 and mostly male.
ParticipantMeta synthetic_participant(Group group, int index, std::uint64_t seed, const std::string& id_prefix);

std::vector<GeneratedSession> synthesize_cohort(const CohortOptions& options);

}  // namespace retinavr
