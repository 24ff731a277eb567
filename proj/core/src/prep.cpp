#include "catdif/prep.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace catdif {

int bin_provisional(double theta_s, const IntervalGrid& grid) {
  // Nearest grid point, ties broken upward; the epsilon keeps midpoints
  // such as 0.05 on the upper side despite binary rounding of the division.
  int j = static_cast<int>(
              std::floor((theta_s - grid.lo) / grid.step + 0.5 + 1e-9)) +
          1;
  return std::clamp(j, 1, grid.n_points());
}

std::pair<std::map<std::string, ItemFrame>, DropReport> build_frames(
    const std::vector<AdministrationLog>& logs, const IntervalGrid& grid,
    int random_effect_count) {
  std::map<std::string, ItemFrame> building;
  std::set<std::string> administered;
  std::set<std::string> slot1_only;

  for (const AdministrationLog& log : logs) {
    for (const Slot& slot : log.slots) {
      administered.insert(slot.item_id);
      if (slot.k == 1) {
        slot1_only.insert(slot.item_id);
        continue;  // step 2: first-slot responses carry no provisional info
      }
      ItemFrame& frame = building[slot.item_id];
      frame.item_id = slot.item_id;
      FrameRow row;
      row.y = slot.response;
      row.g = log.group;
      row.theta_K = log.theta_final;
      row.theta_s = slot.theta_prev;
      row.j = bin_provisional(slot.theta_prev, grid);
      frame.cluster_sizes[row.j] += 1;
      frame.rows.push_back(row);
    }
  }

  DropReport report;
  report.total_administered = static_cast<int>(administered.size());
  for (const std::string& id : slot1_only)
    if (building.find(id) == building.end())
      report.step2_first_slot_only.push_back(id);

  std::map<std::string, ItemFrame> frames;
  for (auto& [id, frame] : building) {
    if (frame.cluster_sizes.size() < 2) {
      report.step3a_single_cluster.push_back(id);
      continue;
    }
    bool has0 = false, has1 = false;
    for (const FrameRow& row : frame.rows) (row.y ? has1 : has0) = true;
    if (!has0 || !has1) {
      report.step3b_single_response.push_back(id);
      continue;
    }
    if (static_cast<int>(frame.rows.size()) <= random_effect_count) {
      report.step3c_too_few_rows.push_back(id);
      continue;
    }
    frames.emplace(id, std::move(frame));
  }
  return {std::move(frames), std::move(report)};
}

std::map<std::string, ItemFrame> apply_strict_filter(
    const std::map<std::string, ItemFrame>& frames, int min_intervals,
    int min_n) {
  std::map<std::string, ItemFrame> kept;
  for (const auto& [id, frame] : frames)
    if (frame.n_intervals() >= min_intervals &&
        static_cast<int>(frame.rows.size()) >= min_n)
      kept.emplace(id, frame);
  return kept;
}

void write_frames_csv(std::ostream& os,
                      const std::map<std::string, ItemFrame>& frames) {
  os.precision(17);
  os << "item_id,y,g,theta_K,theta_s,interval_j\n";
  for (const auto& [id, frame] : frames)
    for (const FrameRow& row : frame.rows)
      os << id << ',' << row.y << ',' << row.g << ',' << row.theta_K << ','
         << row.theta_s << ',' << row.j << '\n';
}

std::map<std::string, ItemFrame> read_frames_csv(std::istream& is) {
  std::map<std::string, ItemFrame> frames;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, f;
    std::getline(ss, id, ',');
    FrameRow row;
    std::getline(ss, f, ',');
    row.y = std::stoi(f);
    std::getline(ss, f, ',');
    row.g = std::stoi(f);
    std::getline(ss, f, ',');
    row.theta_K = std::stod(f);
    std::getline(ss, f, ',');
    row.theta_s = std::stod(f);
    std::getline(ss, f, ',');
    row.j = std::stoi(f);
    ItemFrame& frame = frames[id];
    frame.item_id = id;
    frame.cluster_sizes[row.j] += 1;
    frame.rows.push_back(row);
  }
  return frames;
}

}  // namespace catdif
