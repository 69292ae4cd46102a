#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include "retinavr/analytics.hpp"
#include "retinavr/error.hpp"

namespace retinavr {

namespace {

constexpr double kZ95 = 1.959963984540054;

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

/// Reads a headed CSV without quoting, checking the header.
std::vector<std::vector<std::string>> read_simple_csv(std::istream& in, const std::string& header) {
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (rows.empty() && line_no == 1) {
      if (line != header) throw Error(ErrorCode::CorruptLog, "line 1: expected header '" + header + "'");
      rows.emplace_back();  // header placeholder
      continue;
    }
    rows.push_back(split_commas(line));
    if (rows.back().size() != split_commas(header).size()) {
      throw Error(ErrorCode::CorruptLog, "line " + std::to_string(line_no) + ": wrong field count");
    }
  }
  if (!rows.empty()) rows.erase(rows.begin());
  return rows;
}

}  // namespace

GroupSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "cannot summarize an empty sample");
  GroupSummary s;
  double m2 = 0.0;
  s.min = s.max = values.front();
  for (double v : values) {
    ++s.n;
    const double delta = v - s.mean;
    s.mean += delta / s.n;
    m2 += delta * (v - s.mean);
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.sd = s.n > 1 ? std::sqrt(std::max(0.0, m2 / (s.n - 1))) : 0.0;
  return s;
}

std::string_view to_string(EffectBand band) {
  switch (band) {
    case EffectBand::None: return "none";
    case EffectBand::Minimal: return "minimal";
    case EffectBand::Small: return "small";
    case EffectBand::Medium: return "medium";
    case EffectBand::Large: return "large";
    case EffectBand::VeryLarge: return "very large";
  }
  return "none";
}

EffectBand effect_band(double d) {
  const double a = std::abs(d);
  if (a < 0.01) return EffectBand::None;
  if (a < 0.20) return EffectBand::Minimal;
  if (a < 0.50) return EffectBand::Small;
  if (a < 0.80) return EffectBand::Medium;
  if (a < 1.00) return EffectBand::Large;
  return EffectBand::VeryLarge;
}

EffectSize cohens_d(const GroupSummary& a, const GroupSummary& b) {
  if (a.n < 2 || b.n < 2) throw Error(ErrorCode::EmptyInput, "effect size needs at least two values per group");
  const double na = a.n, nb = b.n;
  const double pooled = std::sqrt(((na - 1) * a.sd * a.sd + (nb - 1) * b.sd * b.sd) / (na + nb - 2));
  double d = 0.0;
  if (pooled == 0.0) {
    if (a.mean != b.mean) throw Error(ErrorCode::DegeneratePooledSD, "pooled SD is zero but the means differ");
  } else {
    d = (a.mean - b.mean) / pooled;
  }
  const double se = std::sqrt((na + nb) / (na * nb) + d * d / (2.0 * (na + nb)));
  return EffectSize{d, d - kZ95 * se, d + kZ95 * se, effect_band(d)};
}

std::vector<PublishedSummary> read_published_summaries(std::istream& in) {
  std::vector<PublishedSummary> out;
  for (const auto& f : read_simple_csv(in, "module,metric,run,group,n,mean,sd,min,max")) {
    PublishedSummary p;
    p.module = parse_task_kind(f[0]);
    p.metric = f[1];
    p.run = f[2];
    p.group = parse_group(f[3]);
    p.summary = GroupSummary{std::stoi(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7]), std::stod(f[8])};
    out.push_back(p);
  }
  return out;
}

std::vector<PublishedEffect> read_published_effects(std::istream& in) {
  std::vector<PublishedEffect> out;
  for (const auto& f : read_simple_csv(in, "module,metric,run,d,ci_low,ci_high")) {
    PublishedEffect p;
    p.module = parse_task_kind(f[0]);
    p.metric = f[1];
    p.run = f[2];
    const double d = std::stod(f[3]);
    p.effect = EffectSize{d, std::stod(f[4]), std::stod(f[5]), effect_band(d)};
    out.push_back(p);
  }
  return out;
}

bool EffectComparison::within(double d_tol, double ci_tol) const {
  return std::abs(computed.d - published.effect.d) <= d_tol &&
         std::abs(computed.ci_low - published.effect.ci_low) <= ci_tol &&
         std::abs(computed.ci_high - published.effect.ci_high) <= ci_tol;
}

std::vector<EffectComparison> reproduce_effects(const std::vector<PublishedSummary>& summaries,
                                                const std::vector<PublishedEffect>& effects) {
  auto find = [&](const PublishedEffect& e, Group g) -> const GroupSummary& {
    for (const auto& s : summaries) {
      if (s.module == e.module && s.metric == e.metric && s.run == e.run && s.group == g) return s.summary;
    }
    throw Error(ErrorCode::EmptyInput, "no " + std::string(to_string(g)) + " summary for " +
                                           std::string(to_string(e.module)) + "/" + e.metric + " run " + e.run);
  };
  std::vector<EffectComparison> out;
  for (const auto& e : effects) out.push_back({e, cohens_d(find(e, Group::Novice), find(e, Group::Expert))});
  return out;
}

}  // namespace retinavr
