#include <cmath>
#include <ostream>

#include "retinavr/analytics.hpp"

namespace retinavr {

std::vector<double> HeatmapGrid::normalized() const {
  std::vector<double> out(counts.size(), 0.0);
  if (total == 0) return out;
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / total;
  return out;
}

std::vector<HeatmapGrid> heatmap(const std::vector<SpotRecord>& spots, int break_count, double r_out, int grid,
                                 const std::string& group) {
  const double extent = 3.0 * r_out;
  const double cell = 2.0 * extent / grid;
  std::vector<HeatmapGrid> grids(static_cast<std::size_t>(break_count));
  for (int b = 0; b < break_count; ++b) {
    grids[b].group = group;
    grids[b].break_index = b;
    grids[b].grid = grid;
    grids[b].extent_mm = extent;
    grids[b].counts.assign(static_cast<std::size_t>(grid * grid), 0);
  }
  auto bin = [&](double v) {
    if (!(v >= -extent && v <= extent)) return -1;
    return std::min(grid - 1, static_cast<int>(std::floor((v + extent) / cell)));
  };
  for (const auto& s : spots) {
    if (s.break_index < 0 || s.break_index >= break_count) continue;
    HeatmapGrid& g = grids[s.break_index];
    const int col = bin(s.local_x_mm);
    const int row = bin(s.local_y_mm);
    if (col < 0 || row < 0) {
      ++g.dropped;
      continue;
    }
    ++g.counts[static_cast<std::size_t>(row * grid + col)];
    ++g.total;
  }
  return grids;
}

void write_heatmap_csv(std::ostream& out, const HeatmapGrid& g) {
  out << "# group=" << g.group << " break=" << g.break_index << " extent_mm=" << g.extent_mm << " grid=" << g.grid
      << " total=" << g.total << " dropped=" << g.dropped << "\n";
  for (int row = 0; row < g.grid; ++row) {
    for (int col = 0; col < g.grid; ++col) out << (col ? "," : "") << g.at(row, col);
    out << "\n";
  }
}

double ring_mass(const std::vector<SpotRecord>& spots, double r_in, double r_out) {
  int assigned = 0, in_ring = 0;
  for (const auto& s : spots) {
    if (s.break_index < 0) continue;
    ++assigned;
    if (s.geodesic_mm >= r_in && s.geodesic_mm <= r_out) ++in_ring;
  }
  return assigned == 0 ? 0.0 : static_cast<double>(in_ring) / assigned;
}

}  // namespace retinavr
