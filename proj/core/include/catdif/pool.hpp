#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "catdif/irt.hpp"

namespace catdif {

struct TruncNormSpec {
  double mean = 0.0;
  double sd = 1.0;
  double min = -1e9;
  double max = 1e9;
};

struct PoolConfig {
  int n_items = 800;
  TruncNormSpec a_dist{1.20, 0.33, 0.53, 2.29};
  TruncNormSpec b_dist{0.53, 0.48, -0.84, 1.55};
  TruncNormSpec c_dist{0.19, 0.10, 0.05, 0.48};
  double p_3pl = 0.46;  // fraction of items that carry a nonzero c
  int n_categories = 4;
  std::vector<double> category_proportions{0.30, 0.25, 0.25, 0.20};

  void validate() const;  // throws std::invalid_argument
};

struct DifConfig {
  char parameter = 'b';  // 'a' or 'b'
  double magnitude = 0.4;
  double proportion = 0.2;
  bool redraw_per_replication = true;
};

struct Examinee {
  int id = 0;
  double theta_true = 0.0;
  int g = 0;  // 1 = focal, 0 = reference
};

struct Cohort {
  std::vector<Examinee> examinees;
};

/// Focal-group parameter overrides for DIF-contaminated items.
struct FocalMap {
  std::unordered_map<std::string, Item> focal;  // item_id -> focal-group Item
  std::unordered_set<std::string> contaminated;

  bool is_contaminated(const std::string& id) const {
    return contaminated.count(id) != 0;
  }
  /// Focal-group view of an item; identical to the reference item when clean.
  const Item& focal_item(const Item& reference) const {
    auto it = focal.find(reference.id);
    return it == focal.end() ? reference : it->second;
  }
};

std::vector<Item> generate_pool(const PoolConfig& cfg, std::uint64_t seed);

FocalMap inject_dif(const std::vector<Item>& pool, const DifConfig& cfg,
                    std::uint64_t seed);

Cohort generate_cohort(int n, std::uint64_t seed);

/// CSV columns: id, a, b, c, category, focal_a, focal_b, is_dif.
void write_pool_csv(std::ostream& os, const std::vector<Item>& pool,
                    const FocalMap& focal);
std::vector<Item> read_pool_csv(std::istream& is);

}  // namespace catdif
