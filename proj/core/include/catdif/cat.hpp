#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "catdif/irt.hpp"
#include "catdif/pool.hpp"
#include "catdif/rng.hpp"

namespace catdif {

enum class Estimator { MLE, EAP };

struct NoEligibleItem : std::runtime_error {
  NoEligibleItem() : std::runtime_error("exposure control exhausted the pool") {}
};

struct CatConfig {
  int test_length = 25;
  double max_exposure = 0.33;
  Estimator provisional_estimator = Estimator::MLE;
  Estimator final_estimator = Estimator::MLE;
  double theta_start = 0.0;
  double w_content = 1.0;
  double w_info = 1.0;
  int randomesque_k = 5;
  // When true, a boundary-clamped provisional MLE is replaced by the EAP
  // value for item selection; default keeps the clamped estimate.
  bool mle_boundary_fallback_eap = false;
  std::vector<double> blueprint{0.30, 0.25, 0.25, 0.20};
  IrtConfig irt;
};

/// Pool-level administration tallies, shared across one cohort.
struct ExposureTallies {
  std::vector<int> counts;   // per pool index
  int examinees_started = 0;

  explicit ExposureTallies(std::size_t pool_size) : counts(pool_size, 0) {}
};

/// Per-examinee running state during one administration.
struct CatState {
  std::vector<char> administered;  // per pool index
  std::vector<int> responses;
  std::vector<int> category_counts;
  double theta_provisional = 0.0;
  ResponseVector prefix;  // reference-parameter view of administered items
};

struct Slot {
  int k = 0;
  std::string item_id;
  double theta_prev = 0.0;
  int response = 0;
};

struct AdministrationLog {
  int examinee_id = 0;
  int group = 0;
  double theta_true = 0.0;
  std::vector<Slot> slots;
  double theta_final = 0.0;
  double se_final = 0.0;
  bool final_converged = false;
};

struct PrecisionSummary {
  double bias = 0.0;
  double mse = 0.0;
  double correlation = 0.0;
  double csem = 0.0;
};

/// WPM selection with conditional randomesque exposure control; returns a
/// pool index.
std::size_t select_next_item(const CatState& state,
                             const std::vector<Item>& pool,
                             const CatConfig& cfg,
                             const ExposureTallies& tallies, Rng& rng);

AdministrationLog administer(const Examinee& examinee,
                             const std::vector<Item>& pool,
                             const FocalMap& focal, const CatConfig& cfg,
                             ExposureTallies& tallies, Rng& rng);

struct CohortResult {
  std::vector<AdministrationLog> logs;
  PrecisionSummary precision;
};

CohortResult simulate_cohort(const Cohort& cohort,
                             const std::vector<Item>& pool,
                             const FocalMap& focal, const CatConfig& cfg,
                             std::uint64_t seed);

/// CSV columns: examinee_id, slot, item_id, theta_prev, response,
/// theta_final, se_final, group, theta_true.
void write_logs_csv(std::ostream& os,
                    const std::vector<AdministrationLog>& logs);
std::vector<AdministrationLog> read_logs_csv(std::istream& is);

}  // namespace catdif
