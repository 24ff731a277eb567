#include "catdif/cat.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace catdif {

std::size_t select_next_item(const CatState& state,
                             const std::vector<Item>& pool,
                             const CatConfig& cfg,
                             const ExposureTallies& tallies, Rng& rng) {
  int warmup = static_cast<int>(std::ceil(1.0 / cfg.max_exposure));
  bool enforce_exposure = tallies.examinees_started > warmup;

  std::vector<std::size_t> eligible;
  eligible.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (state.administered[i]) continue;
    if (enforce_exposure &&
        static_cast<double>(tallies.counts[i]) /
                tallies.examinees_started >=
            cfg.max_exposure)
      continue;
    eligible.push_back(i);
  }
  if (eligible.empty()) throw NoEligibleItem();
  if (eligible.size() == 1) return eligible[0];

  // Information penalty: rank of -I(theta_hat), scaled to [0,1].
  std::vector<double> info(eligible.size());
  for (std::size_t e = 0; e < eligible.size(); ++e)
    info[e] =
        fisher_information(state.theta_provisional, pool[eligible[e]], cfg.irt);
  std::vector<std::size_t> order(eligible.size());
  for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return info[l] > info[r];
  });
  std::vector<double> info_penalty(eligible.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    info_penalty[order[rank]] =
        static_cast<double>(rank) / static_cast<double>(order.size() - 1);

  // Content penalty: projected overshoot of the blueprint proportion if the
  // item were administered next, scaled by the largest overshoot.
  int administered_so_far = 0;
  for (int c : state.category_counts) administered_so_far += c;
  std::vector<double> content_raw(eligible.size(), 0.0);
  double max_raw = 0.0;
  for (std::size_t e = 0; e < eligible.size(); ++e) {
    int cat = pool[eligible[e]].category;
    double projected =
        static_cast<double>(state.category_counts[cat] + 1) /
        (administered_so_far + 1);
    double target = cat < static_cast<int>(cfg.blueprint.size())
                        ? cfg.blueprint[cat]
                        : 0.0;
    content_raw[e] = std::max(0.0, projected - target);
    max_raw = std::max(max_raw, content_raw[e]);
  }

  std::vector<std::pair<double, std::size_t>> penalized(eligible.size());
  for (std::size_t e = 0; e < eligible.size(); ++e) {
    double content_penalty = max_raw > 0.0 ? content_raw[e] / max_raw : 0.0;
    penalized[e] = {cfg.w_content * content_penalty +
                        cfg.w_info * info_penalty[e],
                    eligible[e]};
  }
  std::stable_sort(penalized.begin(), penalized.end());

  std::size_t k = std::min<std::size_t>(cfg.randomesque_k, penalized.size());
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  return penalized[pick(rng)].second;
}

namespace {

double provisional_estimate(const CatState& state, const CatConfig& cfg) {
  if (cfg.provisional_estimator == Estimator::EAP)
    return estimate_eap(state.prefix, cfg.irt).theta;
  ThetaEstimate est =
      estimate_mle(state.prefix, cfg.irt, state.theta_provisional);
  if (!est.converged && cfg.mle_boundary_fallback_eap)
    return estimate_eap(state.prefix, cfg.irt).theta;
  return est.theta;
}

}  // namespace

AdministrationLog administer(const Examinee& examinee,
                             const std::vector<Item>& pool,
                             const FocalMap& focal, const CatConfig& cfg,
                             ExposureTallies& tallies, Rng& rng) {
  ++tallies.examinees_started;

  CatState state;
  state.administered.assign(pool.size(), 0);
  state.category_counts.assign(
      std::max<std::size_t>(cfg.blueprint.size(), 1), 0);
  state.theta_provisional = cfg.theta_start;

  AdministrationLog log;
  log.examinee_id = examinee.id;
  log.group = examinee.g;
  log.theta_true = examinee.theta_true;

  for (int k = 1; k <= cfg.test_length; ++k) {
    std::size_t idx = select_next_item(state, pool, cfg, tallies, rng);
    const Item& reference = pool[idx];

    // Responses come from focal parameters for contaminated items answered
    // by focal-group examinees; selection and scoring never see them.
    const Item& truth = examinee.g == 1 ? focal.focal_item(reference)
                                        : reference;
    double p = prob_correct(examinee.theta_true, truth, cfg.irt);
    int x = uniform01(rng) < p ? 1 : 0;

    Slot slot;
    slot.k = k;
    slot.item_id = reference.id;
    slot.theta_prev = state.theta_provisional;
    slot.response = x;
    log.slots.push_back(std::move(slot));

    state.administered[idx] = 1;
    if (reference.category < static_cast<int>(state.category_counts.size()))
      ++state.category_counts[reference.category];
    state.responses.push_back(x);
    state.prefix.add(reference, x);
    ++tallies.counts[idx];

    if (k < cfg.test_length)
      state.theta_provisional = provisional_estimate(state, cfg);
  }

  ThetaEstimate final_est =
      cfg.final_estimator == Estimator::EAP
          ? estimate_eap(state.prefix, cfg.irt)
          : estimate_mle(state.prefix, cfg.irt, state.theta_provisional);
  log.theta_final = final_est.theta;
  log.se_final = final_est.se;
  log.final_converged = final_est.converged;
  return log;
}

CohortResult simulate_cohort(const Cohort& cohort,
                             const std::vector<Item>& pool,
                             const FocalMap& focal, const CatConfig& cfg,
                             std::uint64_t seed) {
  Rng rng(seed);
  ExposureTallies tallies(pool.size());
  CohortResult out;
  out.logs.reserve(cohort.examinees.size());

  double sum_err = 0.0, sum_sq = 0.0, sum_csem = 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;

  for (const Examinee& e : cohort.examinees) {
    AdministrationLog log = administer(e, pool, focal, cfg, tallies, rng);

    double err = log.theta_final - e.theta_true;
    sum_err += err;
    sum_sq += err * err;
    sum_csem += log.se_final;
    sx += log.theta_final;
    sy += e.theta_true;
    sxx += log.theta_final * log.theta_final;
    syy += e.theta_true * e.theta_true;
    sxy += log.theta_final * e.theta_true;

    out.logs.push_back(std::move(log));
  }

  double n = static_cast<double>(cohort.examinees.size());
  out.precision.bias = sum_err / n;
  out.precision.mse = sum_sq / n;
  out.precision.csem = sum_csem / n;
  double cov = sxy / n - (sx / n) * (sy / n);
  double vx = sxx / n - (sx / n) * (sx / n);
  double vy = syy / n - (sy / n) * (sy / n);
  out.precision.correlation =
      vx > 0.0 && vy > 0.0 ? cov / std::sqrt(vx * vy) : 0.0;
  return out;
}

void write_logs_csv(std::ostream& os,
                    const std::vector<AdministrationLog>& logs) {
  os.precision(17);
  os << "examinee_id,slot,item_id,theta_prev,response,theta_final,se_final,"
        "group,theta_true\n";
  for (const AdministrationLog& log : logs)
    for (const Slot& s : log.slots)
      os << log.examinee_id << ',' << s.k << ',' << s.item_id << ','
         << s.theta_prev << ',' << s.response << ',' << log.theta_final << ','
         << log.se_final << ',' << log.group << ',' << log.theta_true << '\n';
}

std::vector<AdministrationLog> read_logs_csv(std::istream& is) {
  std::map<int, AdministrationLog> by_id;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string f;
    Slot slot;
    std::getline(ss, f, ',');
    int id = std::stoi(f);
    std::getline(ss, f, ',');
    slot.k = std::stoi(f);
    std::getline(ss, slot.item_id, ',');
    std::getline(ss, f, ',');
    slot.theta_prev = std::stod(f);
    std::getline(ss, f, ',');
    slot.response = std::stoi(f);
    AdministrationLog& log = by_id[id];
    log.examinee_id = id;
    std::getline(ss, f, ',');
    log.theta_final = std::stod(f);
    std::getline(ss, f, ',');
    log.se_final = std::stod(f);
    std::getline(ss, f, ',');
    log.group = std::stoi(f);
    std::getline(ss, f, ',');
    log.theta_true = std::stod(f);
    log.slots.push_back(std::move(slot));
  }
  std::vector<AdministrationLog> logs;
  logs.reserve(by_id.size());
  for (auto& [id, log] : by_id) {
    std::sort(log.slots.begin(), log.slots.end(),
              [](const Slot& a, const Slot& b) { return a.k < b.k; });
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace catdif
