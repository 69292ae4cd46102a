#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "retinavr/session.hpp"
#include "retinavr/task.hpp"

namespace retinavr {

// ----------------------------------------------------------- Descriptives

struct GroupSummary {
  int n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample (n - 1); 0 when n == 1
  double min = 0.0;
  double max = 0.0;
};

/// Single-pass (Welford) summary. Throws EmptyInput.
GroupSummary summarize(const std::vector<double>& values);

enum class EffectBand { None, Minimal, Small, Medium, Large, VeryLarge };

std::string_view to_string(EffectBand band);
/// |d| < 0.01 is None; then cutoffs 0.20 / 0.50 / 0.80 / 1.00.
EffectBand effect_band(double d);

struct EffectSize {
  double d = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  EffectBand band = EffectBand::None;
};

/// Standardized mean difference (a - b) / pooled SD with a normal-theory 95% CI.
/// By convention a is the Novice group. Throws EmptyInput when either n < 2 and
/// DegeneratePooledSD when both SDs are zero but the means differ.
EffectSize cohens_d(const GroupSummary& a, const GroupSummary& b);

// ------------------------------------------------------------ Mixed model

/// Random-intercept data: y = X beta + b[group] + e.
struct LmmData {
  std::vector<std::string> names;  // one per column of X
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> group;  // 0-based cluster index per row
  int group_count = 0;
};

struct LmmOptions {
  double lambda_max = 1e4;
  double tolerance = 1e-10;
  int max_iterations = 500;
};

struct LmmFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::VectorXd p_value;
  double sigma_b2 = 0.0;
  double sigma_e2 = 0.0;
  double lambda = 0.0;  // sigma_b2 / sigma_e2
  double reml_criterion = 0.0;
  bool converged = false;
  int iterations = 0;

  std::pair<double, double> ci95(int k) const {
    return {beta[k] - 1.959963984540054 * se[k], beta[k] + 1.959963984540054 * se[k]};
  }
};

/// -2 x restricted log-likelihood with the residual variance profiled out,
/// up to an additive constant. Throws SingularDesign.
double reml_criterion(const LmmData& data, double lambda);

/// REML fit by bracketing on a log grid, then golden-section search in lambda.
/// Throws SingularDesign or NonConvergence.
LmmFit fit_lmm(const LmmData& data, const LmmOptions& options = {});

/// Builds the design [intercept, expertise (novice = 1), age, sex (male = 1), run]
/// for one (module, metric) response, clustered by participant.
LmmData build_lmm_data(const MetricsTable& table, TaskKind module, const std::string& metric);

// --------------------------------------------------------------- Heatmaps

struct HeatmapGrid {
  std::string group;
  int break_index = 0;
  int grid = 21;
  double extent_mm = 6.6;  // cells cover [-extent, extent] on both axes
  std::vector<int> counts;  // row-major, rows ascend in local y
  int total = 0;
  int dropped = 0;

  int at(int row, int col) const { return counts[static_cast<std::size_t>(row * grid + col)]; }
  std::vector<double> normalized() const;
};

/// Bins spots by assigned break on a G x G grid spanning +-3 r_out in the
/// break's gnomonic tangent plane. Spots outside the extent are dropped and counted.
std::vector<HeatmapGrid> heatmap(const std::vector<SpotRecord>& spots, int break_count, double r_out,
                                 int grid = 21, const std::string& group = "");

void write_heatmap_csv(std::ostream& out, const HeatmapGrid& grid);

/// Fraction of spots whose geodesic distance from their break lies in [r_in, r_out].
double ring_mass(const std::vector<SpotRecord>& spots, double r_in, double r_out);

// ------------------------------------------------------ Published tables

/// One row of the published descriptive tables; run is "1", "2", "3" or "combined".
struct PublishedSummary {
  TaskKind module = TaskKind::Navigation;
  std::string metric;
  std::string run;
  Group group = Group::Novice;
  GroupSummary summary;
};

struct PublishedEffect {
  TaskKind module = TaskKind::Navigation;
  std::string metric;
  std::string run;
  EffectSize effect;
};

std::vector<PublishedSummary> read_published_summaries(std::istream& in);
std::vector<PublishedEffect> read_published_effects(std::istream& in);

struct EffectComparison {
  PublishedEffect published;
  EffectSize computed;
  bool within(double d_tol, double ci_tol) const;
};

/// Recomputes every published effect from the matching Novice/Expert summaries.
std::vector<EffectComparison> reproduce_effects(const std::vector<PublishedSummary>& summaries,
                                                const std::vector<PublishedEffect>& effects);

// ---------------------------------------------------------------- Reports

struct ModuleMetricAnalysis {
  TaskKind module = TaskKind::Navigation;
  std::string metric;
  /// Keyed by run label ("1", "2", "3", "combined").
  std::map<std::string, GroupSummary> novice;
  std::map<std::string, GroupSummary> expert;
  std::map<std::string, EffectSize> effect;
  std::optional<LmmFit> lmm;
  std::string lmm_error;
};

struct AnalysisReport {
  std::vector<ModuleMetricAnalysis> entries;
  std::vector<HeatmapGrid> heatmaps;
  std::map<std::string, double> ring_mass;  // per group

  const ModuleMetricAnalysis* find(TaskKind module, const std::string& metric) const;
};

/// Descriptives, effect sizes per run and combined, and the adjusted model for
/// every (module, metric). `laser_spots` holds spot records per group label.
AnalysisReport analyze(const MetricsTable& table,
                       const std::map<std::string, std::vector<SpotRecord>>& laser_spots = {},
                       const TaskConfig& config = {});

/// Replays every log, builds the metrics table and pools laser spots per group
/// ("novice", "expert") before calling analyze().
AnalysisReport analyze_sessions(const std::vector<SessionLog>& logs, const TaskConfig& config = {});

nlohmann::json to_json(const GroupSummary& s);
nlohmann::json to_json(const EffectSize& e);
nlohmann::json to_json(const LmmFit& fit);
nlohmann::json to_json(const AnalysisReport& report);

/// Writes report.json, effect_sizes.csv, lmm.csv and heatmap_<group>_break<k>.csv.
void write_report(const AnalysisReport& report, const std::string& dir);

}  // namespace retinavr
