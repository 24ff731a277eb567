#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "catdif/cat.hpp"

namespace catdif {

/// Equal-width grid over the ability range; provisional estimates bin at the
/// nearest grid point.
struct IntervalGrid {
  double lo = -4.0;
  double hi = 4.0;
  double step = 0.1;

  int n_points() const {
    return static_cast<int>((hi - lo) / step + 0.5) + 1;
  }
};

struct FrameRow {
  int y = 0;
  int g = 0;
  double theta_K = 0.0;
  double theta_s = 0.0;
  int j = 0;  // interval index, 1-based
};

/// Per-studied-item nested analysis table: rows (level 1) within
/// provisional-ability intervals (level 2).
struct ItemFrame {
  std::string item_id;
  std::vector<FrameRow> rows;
  std::map<int, int> cluster_sizes;  // j -> n_j

  int n_intervals() const { return static_cast<int>(cluster_sizes.size()); }
};

struct DropReport {
  std::vector<std::string> step1_polytomous;
  std::vector<std::string> step2_first_slot_only;
  std::vector<std::string> step3a_single_cluster;
  std::vector<std::string> step3b_single_response;
  std::vector<std::string> step3c_too_few_rows;
  int total_administered = 0;  // distinct items seen in the logs

  int dropped() const {
    return static_cast<int>(step1_polytomous.size() +
                            step2_first_slot_only.size() +
                            step3a_single_cluster.size() +
                            step3b_single_response.size() +
                            step3c_too_few_rows.size());
  }
};

int bin_provisional(double theta_s, const IntervalGrid& grid);

/// Cleaning steps: (1) polytomous removal (no-op on binary pools, still
/// reported), (2) row-level first-slot removal, (3) items with one cluster,
/// one response value, or no more rows than random effects.
std::pair<std::map<std::string, ItemFrame>, DropReport> build_frames(
    const std::vector<AdministrationLog>& logs, const IntervalGrid& grid,
    int random_effect_count);

std::map<std::string, ItemFrame> apply_strict_filter(
    const std::map<std::string, ItemFrame>& frames, int min_intervals = 50,
    int min_n = 1000);

/// CSV columns: item_id, y, g, theta_K, theta_s, interval_j.
void write_frames_csv(std::ostream& os,
                      const std::map<std::string, ItemFrame>& frames);
std::map<std::string, ItemFrame> read_frames_csv(std::istream& is);

}  // namespace catdif
