#pragma once

#include <string>
#include <utility>
#include <vector>

namespace catdif {

/// Calibrated 3PL item: discrimination a, difficulty b, pseudo-guessing c,
/// plus a content-domain label used for balancing.
struct Item {
  std::string id;
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  int category = 0;

  bool valid() const { return a > 0.0 && c >= 0.0 && c < 1.0; }
};

struct IrtConfig {
  double D = 1.0;  // logistic scaling factor
  double theta_min = -4.0;
  double theta_max = 4.0;
  int quad_points = 81;
};

/// Ordered (item, binary response) pairs for one examinee.
struct ResponseVector {
  std::vector<std::pair<Item, int>> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  void add(const Item& item, int x) { entries.emplace_back(item, x); }
};

struct ThetaEstimate {
  double theta = 0.0;
  double se = 0.0;
  bool converged = false;
};

double prob_correct(double theta, const Item& item, const IrtConfig& cfg);

/// Sum of Bernoulli log-densities; 0 for an empty vector.
double log_likelihood(double theta, const ResponseVector& responses,
                      const IrtConfig& cfg);

/// d/dtheta of log_likelihood.
double score(double theta, const ResponseVector& responses,
             const IrtConfig& cfg);

double fisher_information(double theta, const Item& item,
                          const IrtConfig& cfg);

/// Test information: sum of item informations over the vector.
double test_information(double theta, const ResponseVector& responses,
                        const IrtConfig& cfg);

/// Newton-type iteration on the score with step-halving; estimates are
/// clamped to [theta_min, theta_max] and boundary fits report
/// converged=false.
ThetaEstimate estimate_mle(const ResponseVector& responses,
                           const IrtConfig& cfg, double start = 0.0);

/// Posterior mean/SD under a normal prior, fixed-node rectangle quadrature
/// on the quad_points grid spanning [theta_min, theta_max].
ThetaEstimate estimate_eap(const ResponseVector& responses,
                           const IrtConfig& cfg, double prior_mean = 0.0,
                           double prior_sd = 1.0);

}  // namespace catdif
