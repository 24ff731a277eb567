#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catdif/cat.hpp"
#include "catdif/glmm.hpp"
#include "catdif/pool.hpp"
#include "catdif/prep.hpp"

namespace catdif {

struct StudyConfig {
  int study = 1;  // 1 = DIF-free, 2 = DIF grid
  int n_replications = 100;
  int n_examinees = 5000;
  std::vector<Estimator> estimators{Estimator::MLE, Estimator::EAP};
  std::vector<int> test_lengths{25, 35};
  std::vector<double> exposure_rates{0.20, 0.33};
  std::vector<char> dif_parameters{'a', 'b'};
  std::vector<double> dif_proportions{0.2, 0.4};
  double dif_magnitude = 0.4;
  bool dif_fixed_subset = false;  // default re-draws the subset per replication
  double alpha = 0.05;
  std::vector<std::string> models{"M6", "S1", "S2", "S3"};
  std::uint64_t base_seed = 20240101;
  int min_item_replications = 10;
  int workers = 1;
  bool keep_exemplar_frames = true;
  PoolConfig pool;
  CatConfig cat;         // per-cell factors override the matching fields
  IntervalGrid grid;
  GlmmOptions glmm;

  void validate() const;
};

struct DesignCell {
  int index = 0;
  Estimator estimator = Estimator::MLE;
  int test_length = 25;
  double exposure_rate = 0.33;
  bool has_dif = false;
  char dif_parameter = 'b';
  double dif_proportion = 0.0;

  std::string id() const;
};

std::vector<DesignCell> enumerate_cells(const StudyConfig& cfg);

/// One fitted (item, model) record within a replication.
struct FitRecord {
  std::string item_id;
  std::string model;
  bool converged = false;
  bool flagged = false;
  double p_g = 1.0;
  double estimate_g = 0.0;
  double se_g = 0.0;
  double deviance = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double tau0_sq = 0.0;
  double tau1_sq = 0.0;
  double tau10 = 0.0;
  double icc = 0.0;
  double r2_marginal = 0.0;
  double r2_conditional = 0.0;
};

struct ReplicationResult {
  int replication = 0;
  bool ok = false;
  std::string diagnostic;
  std::map<std::string, bool> item_is_dif;  // administered items only
  std::vector<FitRecord> fits;
  PrecisionSummary precision;
  DropReport drops;
};

struct RateSummary {
  double mean = 0.0;
  double sd = 0.0;       // NaN when n_items < 2
  int n_items = 0;
};

struct DropSummary {
  double proportion_mean = 0.0, proportion_sd = 0.0;
  double count_mean = 0.0, count_sd = 0.0;
  int count_min = 0, count_max = 0;
  double total_mean = 0.0, total_sd = 0.0;
  int total_min = 0, total_max = 0;
};

struct ConditionResult {
  DesignCell cell;
  std::map<std::string, RateSummary> type1;  // model -> summary
  std::map<std::string, RateSummary> power;
  PrecisionSummary precision_mean;
  PrecisionSummary precision_sd;
  DropSummary drops;
  int successful_replications = 0;
  std::map<std::string, int> kept_replications;  // item -> kept count
  std::vector<std::string> notes;
};

struct StudyReport {
  StudyConfig config;
  std::vector<ConditionResult> cells;
  std::vector<FitRecord> all_fits;               // with cell/rep annotations
  std::vector<std::pair<int, int>> fit_origin;   // (cell index, replication)
  std::vector<bool> fit_status_dif;              // item DIF status per record
  std::map<std::string, ItemFrame> exemplar_frames;  // cell 0, replication 0
  double wall_clock_seconds = 0.0;
};

ReplicationResult run_replication(const StudyConfig& cfg,
                                  const std::vector<Item>& pool,
                                  const DesignCell& cell, int replication);

ConditionResult aggregate(const StudyConfig& cfg, const DesignCell& cell,
                          const std::vector<ReplicationResult>& reps);

StudyReport run_study(const StudyConfig& cfg);

}  // namespace catdif
