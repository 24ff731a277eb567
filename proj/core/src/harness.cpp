#include "catdif/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "catdif/glm.hpp"

namespace catdif {

void StudyConfig::validate() const {
  if (study != 1 && study != 2)
    throw std::invalid_argument("study must be 1 or 2");
  if (n_replications < 1)
    throw std::invalid_argument("n_replications < 1");
  if (n_examinees < 2) throw std::invalid_argument("n_examinees < 2");
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("alpha outside [0,1]");
  if (estimators.empty() || test_lengths.empty() || exposure_rates.empty())
    throw std::invalid_argument("empty factor list");
  if (study == 2 && (dif_parameters.empty() || dif_proportions.empty()))
    throw std::invalid_argument("study 2 requires a DIF grid");
  if (models.empty()) throw std::invalid_argument("no models configured");
  if (min_item_replications < 1)
    throw std::invalid_argument("min_item_replications < 1");
  for (int k : test_lengths)
    if (k < 1 || k > pool.n_items)
      throw std::invalid_argument("test length outside [1, pool size]");
  for (double r : exposure_rates)
    if (r <= 0.0 || r > 1.0)
      throw std::invalid_argument("exposure rate outside (0,1]");
  pool.validate();
}

std::string DesignCell::id() const {
  std::ostringstream os;
  os << (estimator == Estimator::MLE ? "MLE" : "EAP") << "_K" << test_length
     << "_r" << exposure_rate;
  if (has_dif)
    os << "_dif_" << dif_parameter << "_p" << dif_proportion;
  return os.str();
}

std::vector<DesignCell> enumerate_cells(const StudyConfig& cfg) {
  std::vector<DesignCell> cells;
  int index = 0;
  if (cfg.study == 1) {
    for (Estimator est : cfg.estimators)
      for (int k : cfg.test_lengths)
        for (double r : cfg.exposure_rates) {
          DesignCell cell;
          cell.index = index++;
          cell.estimator = est;
          cell.test_length = k;
          cell.exposure_rate = r;
          cells.push_back(cell);
        }
  } else {
    for (char param : cfg.dif_parameters)
      for (double prop : cfg.dif_proportions)
        for (Estimator est : cfg.estimators)
          for (int k : cfg.test_lengths)
            for (double r : cfg.exposure_rates) {
              DesignCell cell;
              cell.index = index++;
              cell.estimator = est;
              cell.test_length = k;
              cell.exposure_rate = r;
              cell.has_dif = true;
              cell.dif_parameter = param;
              cell.dif_proportion = prop;
              cells.push_back(cell);
            }
  }
  return cells;
}

namespace {

FitRecord fit_one_model(const ItemFrame& frame, const std::string& model,
                        double alpha, const GlmmOptions& glmm_options) {
  FitRecord record;
  record.item_id = frame.item_id;
  record.model = model;
  try {
    if (model == "EMPTY" || (model.size() == 2 && model[0] == 'M')) {
      GlmmFit fit = fit_glmm(frame, GlmmSpec::by_name(model), glmm_options);
      record.converged = fit.converged;
      record.deviance = fit.deviance;
      record.aic = fit.aic;
      record.bic = fit.bic;
      record.tau0_sq = fit.tau0_sq;
      record.tau1_sq = fit.tau1_sq;
      record.tau10 = fit.tau10;
      record.icc = fit.icc;
      record.r2_marginal = fit.r2_marginal;
      record.r2_conditional = fit.r2_conditional;
      if (model != "EMPTY") {
        record.estimate_g = fit.coefficient("g");
        record.se_g = fit.standard_error("g");
        record.p_g = record.se_g > 0.0
                         ? normal_p_value(record.estimate_g / record.se_g)
                         : 1.0;
      }
    } else {
      GlmSpec spec;
      if (model == "S1") spec = GlmSpec::S1();
      else if (model == "S2") spec = GlmSpec::S2();
      else if (model == "S3") spec = GlmSpec::S3();
      else if (model == "MH") spec = GlmSpec::MH();
      else if (model == "LR_ALT") spec = GlmSpec::LR_ALT();
      else throw std::invalid_argument("unknown model: " + model);
      GlmFit fit = fit_glm(frame, spec);
      record.converged = fit.converged;
      record.deviance = fit.deviance;
      record.aic = fit.aic;
      record.bic = fit.bic;
      record.estimate_g = fit.coefficient("g");
      record.se_g = fit.standard_error("g");
      record.p_g = wald_test(fit, "g").p_value;
    }
    record.flagged = record.converged && record.p_g < alpha;
  } catch (const NonConvergence&) {
    record.converged = false;
  } catch (const RankDeficient&) {
    record.converged = false;
  } catch (const DegenerateStrata&) {
    record.converged = false;
  }
  return record;
}

double sd_from_moments(double sum, double sum_sq, int n) {
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = sum / n;
  double var = (sum_sq - n * mean * mean) / (n - 1);
  return std::sqrt(std::max(0.0, var));
}

}  // namespace

ReplicationResult run_replication(const StudyConfig& cfg,
                                  const std::vector<Item>& pool,
                                  const DesignCell& cell, int replication) {
  ReplicationResult result;
  result.replication = replication;

  std::uint64_t seed = mix_seed(cfg.base_seed, cell.index, replication);
  std::uint64_t s = seed;
  std::uint64_t cohort_seed = splitmix64(s);
  std::uint64_t dif_seed = splitmix64(s);
  std::uint64_t cat_seed = splitmix64(s);

  try {
    Cohort cohort = generate_cohort(cfg.n_examinees, cohort_seed);

    FocalMap focal;
    if (cell.has_dif) {
      DifConfig dif;
      dif.parameter = cell.dif_parameter;
      dif.proportion = cell.dif_proportion;
      dif.magnitude = cfg.dif_magnitude;
      // Fixed-subset mode reuses the replication-0 draw.
      std::uint64_t subset_seed =
          cfg.dif_fixed_subset ? mix_seed(cfg.base_seed, cell.index, 0) + 1
                               : dif_seed;
      focal = inject_dif(pool, dif, subset_seed);
    }

    CatConfig cat = cfg.cat;
    cat.test_length = cell.test_length;
    cat.max_exposure = cell.exposure_rate;
    cat.provisional_estimator = cell.estimator;

    CohortResult sim = simulate_cohort(cohort, pool, focal, cat, cat_seed);
    result.precision = sim.precision;

    int q = 2;  // one cleaning pass must serve the largest configured model
    auto [frames, drops] = build_frames(sim.logs, cfg.grid, q);
    result.drops = drops;

    for (const auto& [id, frame] : frames) {
      result.item_is_dif[id] = focal.is_contaminated(id);
      for (const std::string& model : cfg.models)
        result.fits.push_back(
            fit_one_model(frame, model, cfg.alpha, cfg.glmm));
    }
    result.ok = true;
  } catch (const NoEligibleItem& e) {
    result.ok = false;
    result.diagnostic = e.what();
  }
  return result;
}

ConditionResult aggregate(const StudyConfig& cfg, const DesignCell& cell,
                          const std::vector<ReplicationResult>& reps) {
  ConditionResult out;
  out.cell = cell;

  std::vector<const ReplicationResult*> good;
  for (const ReplicationResult& r : reps)
    if (r.ok)
      good.push_back(&r);
    else
      out.notes.push_back("replication " + std::to_string(r.replication) +
                          " excluded: " + r.diagnostic);
  out.successful_replications = static_cast<int>(good.size());
  if (good.empty()) {
    out.notes.push_back("empty cell: no successful replication");
    return out;
  }

  // Per (item, replication): converged-for-all-models filter.
  struct ItemRep {
    bool all_converged = true;
    bool is_dif = false;
    std::map<std::string, bool> flagged;
  };
  std::map<std::string, std::vector<ItemRep>> by_item;
  for (const ReplicationResult* r : good) {
    std::map<std::string, ItemRep> this_rep;
    for (const FitRecord& f : r->fits) {
      ItemRep& ir = this_rep[f.item_id];
      ir.is_dif = r->item_is_dif.at(f.item_id);
      ir.all_converged = ir.all_converged && f.converged;
      ir.flagged[f.model] = f.flagged;
    }
    for (auto& [id, ir] : this_rep) by_item[id].push_back(std::move(ir));
  }

  // Per-item rates conditional on the item's DIF status in each
  // replication, then summarized across items.
  struct Accum {
    double sum = 0.0, sum_sq = 0.0;
    int n = 0;
  };
  std::map<std::string, Accum> type1_acc, power_acc;

  for (const auto& [id, item_reps] : by_item) {
    int kept = 0;
    std::map<std::string, int> flags_clean, flags_dif;
    int kept_clean = 0, kept_dif = 0;
    for (const ItemRep& ir : item_reps) {
      if (!ir.all_converged) continue;
      ++kept;
      (ir.is_dif ? kept_dif : kept_clean) += 1;
      for (const auto& [model, flagged] : ir.flagged)
        if (flagged) (ir.is_dif ? flags_dif : flags_clean)[model] += 1;
    }
    out.kept_replications[id] = kept;
    if (kept_clean >= cfg.min_item_replications) {
      for (const std::string& model : cfg.models) {
        double rate =
            static_cast<double>(flags_clean[model]) / kept_clean;
        Accum& a = type1_acc[model];
        a.sum += rate;
        a.sum_sq += rate * rate;
        a.n += 1;
      }
    }
    if (kept_dif >= cfg.min_item_replications) {
      for (const std::string& model : cfg.models) {
        double rate = static_cast<double>(flags_dif[model]) / kept_dif;
        Accum& a = power_acc[model];
        a.sum += rate;
        a.sum_sq += rate * rate;
        a.n += 1;
      }
    }
  }

  for (const std::string& model : cfg.models) {
    if (type1_acc.count(model)) {
      const Accum& a = type1_acc[model];
      out.type1[model] = {a.sum / a.n, sd_from_moments(a.sum, a.sum_sq, a.n),
                          a.n};
    }
    if (power_acc.count(model)) {
      const Accum& a = power_acc[model];
      out.power[model] = {a.sum / a.n, sd_from_moments(a.sum, a.sum_sq, a.n),
                          a.n};
    }
  }

  // Precision and drop aggregates over successful replications.
  auto mean_sd = [&](auto getter, double& mean, double& sd) {
    double sum = 0.0, sum_sq = 0.0;
    for (const ReplicationResult* r : good) {
      double v = getter(*r);
      sum += v;
      sum_sq += v * v;
    }
    int n = static_cast<int>(good.size());
    mean = sum / n;
    sd = sd_from_moments(sum, sum_sq, n);
  };
  mean_sd([](const ReplicationResult& r) { return r.precision.bias; },
          out.precision_mean.bias, out.precision_sd.bias);
  mean_sd([](const ReplicationResult& r) { return r.precision.mse; },
          out.precision_mean.mse, out.precision_sd.mse);
  mean_sd([](const ReplicationResult& r) { return r.precision.correlation; },
          out.precision_mean.correlation, out.precision_sd.correlation);
  mean_sd([](const ReplicationResult& r) { return r.precision.csem; },
          out.precision_mean.csem, out.precision_sd.csem);

  {
    double psum = 0.0, psum_sq = 0.0, csum = 0.0, csum_sq = 0.0;
    double tsum = 0.0, tsum_sq = 0.0;
    int cmin = std::numeric_limits<int>::max(), cmax = 0;
    int tmin = std::numeric_limits<int>::max(), tmax = 0;
    for (const ReplicationResult* r : good) {
      int dropped = r->drops.dropped();
      int total = r->drops.total_administered;
      double prop = total > 0 ? static_cast<double>(dropped) / total : 0.0;
      psum += prop;
      psum_sq += prop * prop;
      csum += dropped;
      csum_sq += static_cast<double>(dropped) * dropped;
      tsum += total;
      tsum_sq += static_cast<double>(total) * total;
      cmin = std::min(cmin, dropped);
      cmax = std::max(cmax, dropped);
      tmin = std::min(tmin, total);
      tmax = std::max(tmax, total);
    }
    int n = static_cast<int>(good.size());
    out.drops.proportion_mean = psum / n;
    out.drops.proportion_sd = sd_from_moments(psum, psum_sq, n);
    out.drops.count_mean = csum / n;
    out.drops.count_sd = sd_from_moments(csum, csum_sq, n);
    out.drops.count_min = cmin;
    out.drops.count_max = cmax;
    out.drops.total_mean = tsum / n;
    out.drops.total_sd = sd_from_moments(tsum, tsum_sq, n);
    out.drops.total_min = tmin;
    out.drops.total_max = tmax;
  }
  return out;
}

StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();

  StudyReport report;
  report.config = cfg;

  std::uint64_t pool_seed = mix_seed(cfg.base_seed, 0xFF, 0);
  std::vector<Item> pool = generate_pool(cfg.pool, pool_seed);

  std::vector<DesignCell> cells = enumerate_cells(cfg);
  for (const DesignCell& cell : cells) {
    std::vector<ReplicationResult> reps(cfg.n_replications);
    int workers = std::max(1, cfg.workers);
    if (workers == 1) {
      for (int r = 0; r < cfg.n_replications; ++r)
        reps[r] = run_replication(cfg, pool, cell, r);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> threads;
      threads.reserve(workers);
      for (int w = 0; w < workers; ++w)
        threads.emplace_back([&] {
          for (int r = next.fetch_add(1); r < cfg.n_replications;
               r = next.fetch_add(1))
            reps[r] = run_replication(cfg, pool, cell, r);
        });
      for (std::thread& t : threads) t.join();
    }

    for (ReplicationResult& r : reps) {
      for (const FitRecord& f : r.fits) {
        report.all_fits.push_back(f);
        report.fit_origin.emplace_back(cell.index, r.replication);
        report.fit_status_dif.push_back(r.item_is_dif.at(f.item_id));
      }
    }

    if (cfg.keep_exemplar_frames && cell.index == 0 &&
        report.exemplar_frames.empty()) {
      // Rebuild the frames of replication 0 for plot emission.
      ReplicationResult probe = reps[0];
      if (probe.ok) {
        std::uint64_t seed = mix_seed(cfg.base_seed, cell.index, 0);
        std::uint64_t s = seed;
        std::uint64_t cohort_seed = splitmix64(s);
        std::uint64_t dif_seed = splitmix64(s);
        std::uint64_t cat_seed = splitmix64(s);
        Cohort cohort = generate_cohort(cfg.n_examinees, cohort_seed);
        FocalMap focal;
        if (cell.has_dif) {
          DifConfig dif;
          dif.parameter = cell.dif_parameter;
          dif.proportion = cell.dif_proportion;
          dif.magnitude = cfg.dif_magnitude;
          focal = inject_dif(pool, dif,
                             cfg.dif_fixed_subset
                                 ? mix_seed(cfg.base_seed, cell.index, 0) + 1
                                 : dif_seed);
        }
        CatConfig cat = cfg.cat;
        cat.test_length = cell.test_length;
        cat.max_exposure = cell.exposure_rate;
        cat.provisional_estimator = cell.estimator;
        CohortResult sim = simulate_cohort(cohort, pool, focal, cat, cat_seed);
        report.exemplar_frames = build_frames(sim.logs, cfg.grid, 2).first;
      }
    }

    report.cells.push_back(aggregate(cfg, cell, reps));
  }

  auto t1 = std::chrono::steady_clock::now();
  report.wall_clock_seconds =
      std::chrono::duration<double>(t1 - t0).count();
  return report;
}

}  // namespace catdif
