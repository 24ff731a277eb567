#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <doctest.h>

#include "catdif/cat.hpp"

using namespace catdif;

namespace {

std::vector<Item> small_pool(int n, std::uint64_t seed) {
  PoolConfig cfg;
  cfg.n_items = n;
  return generate_pool(cfg, seed);
}

CatConfig quick_config(int k = 10) {
  CatConfig cfg;
  cfg.test_length = k;
  return cfg;
}

}  // namespace

TEST_CASE("selection reduces to maximum information without content weight") {
  std::vector<Item> pool = small_pool(40, 3);
  CatConfig cfg = quick_config();
  cfg.w_content = 0.0;
  cfg.randomesque_k = 1;

  CatState state;
  state.administered.assign(pool.size(), 0);
  state.category_counts.assign(4, 0);
  state.theta_provisional = 0.7;
  ExposureTallies tallies(pool.size());
  Rng rng(1);

  std::size_t picked = select_next_item(state, pool, cfg, tallies, rng);
  double best = -1.0;
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    double info = fisher_information(0.7, pool[i], cfg.irt);
    if (info > best) {
      best = info;
      best_idx = i;
    }
  }
  CHECK(picked == best_idx);
}

TEST_CASE("selection returns the single eligible item regardless of weights") {
  std::vector<Item> pool = small_pool(6, 4);
  CatConfig cfg = quick_config();
  cfg.w_content = 9.0;
  cfg.w_info = 0.1;

  CatState state;
  state.administered.assign(pool.size(), 1);
  state.administered[3] = 0;
  state.category_counts.assign(4, 0);
  ExposureTallies tallies(pool.size());
  Rng rng(1);
  CHECK(select_next_item(state, pool, cfg, tallies, rng) == 3);

  state.administered[3] = 1;
  CHECK_THROWS_AS(select_next_item(state, pool, cfg, tallies, rng),
                  NoEligibleItem);
}

TEST_CASE("single-slot administration starts at theta_start") {
  std::vector<Item> pool = small_pool(20, 5);
  CatConfig cfg = quick_config(1);
  ExposureTallies tallies(pool.size());
  Rng rng(2);
  Examinee e{1, 0.3, 0};
  AdministrationLog log = administer(e, pool, FocalMap{}, cfg, tallies, rng);
  REQUIRE(log.slots.size() == 1);
  CHECK(log.slots[0].k == 1);
  CHECK(log.slots[0].theta_prev == 0.0);
}

TEST_CASE("cohort run: exposure caps, no repeats, determinism") {
  std::vector<Item> pool = small_pool(100, 6);
  CatConfig cfg = quick_config(10);
  cfg.max_exposure = 0.33;
  Cohort cohort = generate_cohort(500, 30);

  CohortResult r1 = simulate_cohort(cohort, pool, FocalMap{}, cfg, 71);
  CohortResult r2 = simulate_cohort(cohort, pool, FocalMap{}, cfg, 71);

  REQUIRE(r1.logs.size() == 500);
  std::map<std::string, int> exposures;
  for (const AdministrationLog& log : r1.logs) {
    std::set<std::string> seen;
    REQUIRE(log.slots.size() == 10);
    for (const Slot& s : log.slots) {
      CHECK(seen.insert(s.item_id).second);  // no within-examinee repeats
      ++exposures[s.item_id];
    }
  }
  int cap = static_cast<int>(std::ceil(0.33 * 500));
  int warmup_allowance = static_cast<int>(std::ceil(1.0 / 0.33)) + 1;
  for (const auto& [id, count] : exposures)
    CHECK(count <= cap + warmup_allowance);

  // bit-identical rerun
  for (std::size_t i = 0; i < r1.logs.size(); ++i) {
    CHECK(r1.logs[i].theta_final == r2.logs[i].theta_final);
    for (std::size_t k = 0; k < r1.logs[i].slots.size(); ++k) {
      CHECK(r1.logs[i].slots[k].item_id == r2.logs[i].slots[k].item_id);
      CHECK(r1.logs[i].slots[k].response == r2.logs[i].slots[k].response);
      CHECK(r1.logs[i].slots[k].theta_prev == r2.logs[i].slots[k].theta_prev);
    }
  }
}

TEST_CASE("provisional chain reconstructs from the logged prefix") {
  std::vector<Item> pool = small_pool(80, 7);
  std::map<std::string, Item> by_id;
  for (const Item& it : pool) by_id[it.id] = it;

  for (Estimator prov : {Estimator::MLE, Estimator::EAP}) {
    CatConfig cfg = quick_config(12);
    cfg.provisional_estimator = prov;
    Cohort cohort = generate_cohort(20, 31);
    CohortResult res = simulate_cohort(cohort, pool, FocalMap{}, cfg, 72);

    for (const AdministrationLog& log : res.logs) {
      ResponseVector prefix;
      double theta = cfg.theta_start;
      for (std::size_t s = 0; s < log.slots.size(); ++s) {
        CHECK(std::abs(log.slots[s].theta_prev - theta) < 1e-9);
        prefix.add(by_id.at(log.slots[s].item_id), log.slots[s].response);
        if (s + 1 < log.slots.size())
          theta = prov == Estimator::EAP
                      ? estimate_eap(prefix, cfg.irt).theta
                      : estimate_mle(prefix, cfg.irt, theta).theta;
      }
      // the final estimate warm-starts from the last provisional value
      double final_theta = estimate_mle(prefix, cfg.irt, theta).theta;
      CHECK(std::abs(log.theta_final - final_theta) < 1e-9);
    }
  }
}

TEST_CASE("uniform DIF in b depresses focal success at equal ability") {
  std::vector<Item> pool = small_pool(60, 8);
  DifConfig dc;
  dc.parameter = 'b';
  dc.magnitude = 0.4;
  dc.proportion = 1.0;
  FocalMap fm = inject_dif(pool, dc, 9);

  CatConfig cfg = quick_config(10);
  Cohort cohort;
  for (int i = 0; i < 2000; ++i)
    cohort.examinees.push_back({i, 0.0, i < 1000 ? 0 : 1});

  CohortResult res = simulate_cohort(cohort, pool, fm, cfg, 73);
  double ref = 0.0, foc = 0.0;
  for (const AdministrationLog& log : res.logs) {
    double correct = 0.0;
    for (const Slot& s : log.slots) correct += s.response;
    (log.group ? foc : ref) += correct / log.slots.size();
  }
  CHECK(ref / 1000.0 > foc / 1000.0);
}

TEST_CASE("content balancing narrows the blueprint gap") {
  std::vector<Item> pool = small_pool(120, 10);
  Cohort cohort = generate_cohort(100, 32);

  auto mean_gap = [&](double w_content) {
    CatConfig cfg = quick_config(20);
    cfg.w_content = w_content;
    CohortResult res = simulate_cohort(cohort, pool, FocalMap{}, cfg, 74);
    std::map<std::string, int> cat_of;
    for (const Item& it : pool) cat_of[it.id] = it.category;
    double total = 0.0;
    for (const AdministrationLog& log : res.logs) {
      std::vector<double> counts(4, 0.0);
      for (const Slot& s : log.slots) counts[cat_of[s.item_id]] += 1.0;
      double gap = 0.0;
      const std::vector<double> bp{0.30, 0.25, 0.25, 0.20};
      for (int c = 0; c < 4; ++c)
        gap += std::abs(counts[c] / log.slots.size() - bp[c]);
      total += gap / 4.0;
    }
    return total / res.logs.size();
  };

  CHECK(mean_gap(1.0) < mean_gap(0.0));
}

TEST_CASE("two-examinee cohort returns finite metrics") {
  std::vector<Item> pool = small_pool(30, 11);
  CatConfig cfg = quick_config(5);
  Cohort cohort = generate_cohort(2, 33);
  CohortResult res = simulate_cohort(cohort, pool, FocalMap{}, cfg, 75);
  CHECK(std::isfinite(res.precision.bias));
  CHECK(std::isfinite(res.precision.mse));
  CHECK(std::isfinite(res.precision.csem));
  CHECK(res.precision.csem > 0.0);
}

TEST_CASE("logs CSV round-trip preserves structure") {
  std::vector<Item> pool = small_pool(40, 12);
  CatConfig cfg = quick_config(6);
  Cohort cohort = generate_cohort(10, 34);
  CohortResult res = simulate_cohort(cohort, pool, FocalMap{}, cfg, 76);

  std::stringstream ss;
  write_logs_csv(ss, res.logs);
  std::vector<AdministrationLog> back = read_logs_csv(ss);
  REQUIRE(back.size() == res.logs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].examinee_id == res.logs[i].examinee_id);
    CHECK(back[i].group == res.logs[i].group);
    CHECK(back[i].theta_final ==
          doctest::Approx(res.logs[i].theta_final).epsilon(1e-12));
    REQUIRE(back[i].slots.size() == res.logs[i].slots.size());
    for (std::size_t k = 0; k < back[i].slots.size(); ++k) {
      CHECK(back[i].slots[k].item_id == res.logs[i].slots[k].item_id);
      CHECK(back[i].slots[k].theta_prev ==
            doctest::Approx(res.logs[i].slots[k].theta_prev).epsilon(1e-12));
    }
  }
}
