#include "catdif/pool.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "catdif/rng.hpp"

namespace catdif {

void PoolConfig::validate() const {
  if (n_items < 1) throw std::invalid_argument("pool: n_items < 1");
  for (const TruncNormSpec* s : {&a_dist, &b_dist, &c_dist}) {
    if (s->min >= s->max)
      throw std::invalid_argument("pool: degenerate truncation bounds");
    if (s->sd <= 0.0) throw std::invalid_argument("pool: sd <= 0");
  }
  if (p_3pl < 0.0 || p_3pl > 1.0)
    throw std::invalid_argument("pool: p_3pl outside [0,1]");
  if (static_cast<int>(category_proportions.size()) != n_categories)
    throw std::invalid_argument("pool: category proportions size mismatch");
  double sum = std::accumulate(category_proportions.begin(),
                               category_proportions.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("pool: category proportions must sum to 1");
}

std::vector<Item> generate_pool(const PoolConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::vector<Item> pool;
  pool.reserve(cfg.n_items);

  // Category assignment follows the blueprint proportions as closely as the
  // pool size permits, then gets shuffled.
  std::vector<int> categories;
  categories.reserve(cfg.n_items);
  for (int cat = 0; cat < cfg.n_categories; ++cat) {
    int count = static_cast<int>(
        std::floor(cfg.category_proportions[cat] * cfg.n_items + 0.5));
    for (int i = 0; i < count && static_cast<int>(categories.size()) < cfg.n_items; ++i)
      categories.push_back(cat);
  }
  while (static_cast<int>(categories.size()) < cfg.n_items)
    categories.push_back(cfg.n_categories - 1);
  std::shuffle(categories.begin(), categories.end(), rng);

  for (int i = 0; i < cfg.n_items; ++i) {
    Item item;
    std::ostringstream id;
    id << "IT" << (i + 1);
    item.id = id.str();
    item.a = truncated_normal(rng, cfg.a_dist.mean, cfg.a_dist.sd,
                              cfg.a_dist.min, cfg.a_dist.max);
    item.b = truncated_normal(rng, cfg.b_dist.mean, cfg.b_dist.sd,
                              cfg.b_dist.min, cfg.b_dist.max);
    item.c = uniform01(rng) < cfg.p_3pl
                 ? truncated_normal(rng, cfg.c_dist.mean, cfg.c_dist.sd,
                                    cfg.c_dist.min, cfg.c_dist.max)
                 : 0.0;
    item.category = categories[i];
    pool.push_back(std::move(item));
  }
  return pool;
}

FocalMap inject_dif(const std::vector<Item>& pool, const DifConfig& cfg,
                    std::uint64_t seed) {
  if (pool.empty()) throw std::invalid_argument("inject_dif: empty pool");
  if (cfg.magnitude < 0.0)
    throw std::invalid_argument("inject_dif: negative magnitude");
  if (cfg.proportion < 0.0 || cfg.proportion > 1.0)
    throw std::invalid_argument("inject_dif: proportion outside [0,1]");

  FocalMap out;
  int n_contaminated =
      static_cast<int>(std::floor(cfg.proportion * pool.size()));
  if (n_contaminated == 0) return out;

  Rng rng(seed);
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);

  for (int k = 0; k < n_contaminated; ++k) {
    const Item& ref = pool[idx[k]];
    Item focal = ref;
    if (cfg.parameter == 'a')
      focal.a += cfg.magnitude;
    else
      focal.b += cfg.magnitude;
    out.focal.emplace(ref.id, std::move(focal));
    out.contaminated.insert(ref.id);
  }
  return out;
}

Cohort generate_cohort(int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_cohort: n < 2");
  Rng rng(seed);
  Cohort cohort;
  cohort.examinees.reserve(n);
  std::vector<int> groups(n);
  for (int i = 0; i < n; ++i) groups[i] = i < n / 2 ? 1 : 0;
  std::shuffle(groups.begin(), groups.end(), rng);
  for (int i = 0; i < n; ++i) {
    Examinee e;
    e.id = i + 1;
    e.theta_true = normal(rng);
    e.g = groups[i];
    cohort.examinees.push_back(e);
  }
  return cohort;
}

void write_pool_csv(std::ostream& os, const std::vector<Item>& pool,
                    const FocalMap& focal) {
  os.precision(17);
  os << "id,a,b,c,category,focal_a,focal_b,is_dif\n";
  for (const Item& item : pool) {
    const Item& f = focal.focal_item(item);
    os << item.id << ',' << item.a << ',' << item.b << ',' << item.c << ','
       << item.category << ',' << f.a << ',' << f.b << ','
       << (focal.is_contaminated(item.id) ? 1 : 0) << '\n';
  }
}

std::vector<Item> read_pool_csv(std::istream& is) {
  std::vector<Item> pool;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    Item item;
    std::getline(ss, item.id, ',');
    std::getline(ss, field, ',');
    item.a = std::stod(field);
    std::getline(ss, field, ',');
    item.b = std::stod(field);
    std::getline(ss, field, ',');
    item.c = std::stod(field);
    std::getline(ss, field, ',');
    item.category = std::stoi(field);
    pool.push_back(std::move(item));
  }
  return pool;
}

}  // namespace catdif
