#include <filesystem>
#include <fstream>

#include "retinavr/analytics.hpp"
#include "retinavr/error.hpp"

namespace retinavr {

namespace {

const std::vector<std::string> kRunLabels = {"1", "2", "3", "combined"};

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + p.string() + "'");
  return out;
}

}  // namespace

const ModuleMetricAnalysis* AnalysisReport::find(TaskKind module, const std::string& metric) const {
  for (const auto& e : entries) {
    if (e.module == module && e.metric == metric) return &e;
  }
  return nullptr;
}

AnalysisReport analyze(const MetricsTable& table, const std::map<std::string, std::vector<SpotRecord>>& laser_spots,
                       const TaskConfig& config) {
  AnalysisReport report;
  for (TaskKind module : kAllTasks) {
    for (const auto& metric : metric_names(module)) {
      ModuleMetricAnalysis a;
      a.module = module;
      a.metric = metric;
      std::map<std::string, std::vector<double>> novice, expert;
      for (const auto& r : table.rows) {
        if (r.module != module || r.metric != metric) continue;
        auto& bucket = r.group == Group::Novice ? novice : expert;
        bucket[std::to_string(r.run_index)].push_back(r.value);
        bucket["combined"].push_back(r.value);
      }
      if (novice.empty() && expert.empty()) continue;
      for (const auto& run : kRunLabels) {
        if (novice.count(run)) a.novice[run] = summarize(novice[run]);
        if (expert.count(run)) a.expert[run] = summarize(expert[run]);
        if (a.novice.count(run) && a.expert.count(run)) {
          try {
            a.effect[run] = cohens_d(a.novice[run], a.expert[run]);
          } catch (const Error&) {
            // Too few sessions or a constant metric; the effect is left out.
          }
        }
      }
      try {
        a.lmm = fit_lmm(build_lmm_data(table, module, metric));
      } catch (const Error& e) {
        a.lmm_error = std::string(to_string(e.code())) + ": " + e.what();
      }
      report.entries.push_back(std::move(a));
    }
  }
  for (const auto& [group, spots] : laser_spots) {
    auto grids = heatmap(spots, config.break_count, config.break_outer_mm, 21, group);
    report.heatmaps.insert(report.heatmaps.end(), grids.begin(), grids.end());
    report.ring_mass[group] = ring_mass(spots, config.break_inner_mm, config.break_outer_mm);
  }
  return report;
}

AnalysisReport analyze_sessions(const std::vector<SessionLog>& logs, const TaskConfig& config) {
  std::vector<SessionResult> results;
  std::map<std::string, std::vector<SpotRecord>> spots;
  results.reserve(logs.size());
  for (const auto& log : logs) {
    results.push_back({log.header.participant, replay(log)});
    if (log.header.module == TaskKind::Laser) {
      auto& pool = spots[log.header.participant.group == Group::Novice ? "novice" : "expert"];
      pool.insert(pool.end(), results.back().report.spots.begin(), results.back().report.spots.end());
    }
  }
  return analyze(export_metrics(results), spots, config);
}

nlohmann::json to_json(const GroupSummary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}};
}

nlohmann::json to_json(const EffectSize& e) {
  return {{"d", e.d}, {"ci_low", e.ci_low}, {"ci_high", e.ci_high}, {"band", to_string(e.band)}};
}

nlohmann::json to_json(const LmmFit& fit) {
  nlohmann::json terms = nlohmann::json::array();
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
    const auto [lo, hi] = fit.ci95(static_cast<int>(k));
    terms.push_back({{"term", fit.names[k]},
                     {"beta", fit.beta[k]},
                     {"se", fit.se[k]},
                     {"p_value", fit.p_value[k]},
                     {"ci_low", lo},
                     {"ci_high", hi}});
  }
  return {{"terms", terms},
          {"sigma_b2", fit.sigma_b2},
          {"sigma_e2", fit.sigma_e2},
          {"lambda", fit.lambda},
          {"reml_criterion", fit.reml_criterion},
          {"converged", fit.converged}};
}

nlohmann::json to_json(const AnalysisReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& a : report.entries) {
    nlohmann::json e{{"module", to_string(a.module)}, {"metric", a.metric}};
    for (const auto& [run, s] : a.novice) e["novice"][run] = to_json(s);
    for (const auto& [run, s] : a.expert) e["expert"][run] = to_json(s);
    for (const auto& [run, d] : a.effect) e["effect"][run] = to_json(d);
    if (a.lmm) e["lmm"] = to_json(*a.lmm);
    if (!a.lmm_error.empty()) e["lmm_error"] = a.lmm_error;
    entries.push_back(e);
  }
  nlohmann::json heatmaps = nlohmann::json::array();
  for (const auto& g : report.heatmaps) {
    heatmaps.push_back({{"group", g.group},
                        {"break", g.break_index},
                        {"grid", g.grid},
                        {"extent_mm", g.extent_mm},
                        {"total", g.total},
                        {"dropped", g.dropped},
                        {"normalized", g.normalized()}});
  }
  return {{"entries", entries}, {"heatmaps", heatmaps}, {"ring_mass", report.ring_mass}};
}

void write_report(const AnalysisReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir + "': " + ec.message());
  const fs::path root(dir);

  open_out(root / "report.json") << to_json(report).dump(2) << "\n";

  auto effects = open_out(root / "effect_sizes.csv");
  effects << "module,metric,run,n_novice,n_expert,mean_novice,mean_expert,d,ci_low,ci_high,band\n";
  for (const auto& a : report.entries) {
    for (const auto& [run, e] : a.effect) {
      effects << to_string(a.module) << ',' << a.metric << ',' << run << ',' << a.novice.at(run).n << ','
              << a.expert.at(run).n << ',' << a.novice.at(run).mean << ',' << a.expert.at(run).mean << ',' << e.d
              << ',' << e.ci_low << ',' << e.ci_high << ',' << to_string(e.band) << '\n';
    }
  }

  auto lmm = open_out(root / "lmm.csv");
  lmm << "module,metric,term,beta,se,p_value,ci_low,ci_high,sigma_b2,sigma_e2\n";
  for (const auto& a : report.entries) {
    if (!a.lmm) continue;
    for (Eigen::Index k = 0; k < a.lmm->beta.size(); ++k) {
      const auto [lo, hi] = a.lmm->ci95(static_cast<int>(k));
      lmm << to_string(a.module) << ',' << a.metric << ',' << a.lmm->names[k] << ',' << a.lmm->beta[k] << ','
          << a.lmm->se[k] << ',' << a.lmm->p_value[k] << ',' << lo << ',' << hi << ',' << a.lmm->sigma_b2 << ','
          << a.lmm->sigma_e2 << '\n';
    }
  }

  for (const auto& g : report.heatmaps) {
    auto out = open_out(root / ("heatmap_" + g.group + "_break" + std::to_string(g.break_index) + ".csv"));
    write_heatmap_csv(out, g);
  }
}

}  // namespace retinavr
