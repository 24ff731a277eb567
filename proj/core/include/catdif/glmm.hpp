#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catdif/prep.hpp"

namespace catdif {

struct NonConvergence : std::runtime_error {
  NonConvergence() : std::runtime_error("glmm outer optimization failed") {}
};

struct TooLarge : std::runtime_error {
  TooLarge() : std::runtime_error("frame too large for quadrature oracle") {}
};

enum class GlmmFixed { Intercept, G, Nj, ThetaK, ThetaKxG };

/// Two-level model specification: fixed terms plus random intercept and,
/// optionally, a random slope on g, both keyed by the provisional-ability
/// interval.
struct GlmmSpec {
  std::string name;
  std::vector<GlmmFixed> fixed;
  bool random_slope_g = false;

  int q() const { return random_slope_g ? 2 : 1; }

  static GlmmSpec EMPTY();  // intercept only, random intercept
  static GlmmSpec M1();     // int + g | random int
  static GlmmSpec M2();     // M1 + n_j
  static GlmmSpec M3();     // int + g + theta_K + theta_K*g | random int
  static GlmmSpec M4();     // M3 + n_j
  static GlmmSpec M5();     // int + g | random int + random g
  static GlmmSpec M6();     // M5 + n_j
  static GlmmSpec M7();     // M3 | random int + random g
  static GlmmSpec M8();     // M7 + n_j
  static GlmmSpec by_name(const std::string& name);
};

struct GlmmFit {
  std::string model;
  std::vector<std::string> term_names;
  Eigen::VectorXd fixed_effects;
  Eigen::VectorXd standard_errors;
  double tau0_sq = 0.0;
  double tau1_sq = 0.0;
  double tau10 = 0.0;
  double deviance = 0.0;  // -2 * Laplace log-likelihood
  double aic = 0.0;
  double bic = 0.0;
  double icc = 0.0;
  double r2_marginal = 0.0;
  double r2_conditional = 0.0;
  bool converged = false;
  bool boundary = false;  // a variance component pinned at zero
  int n_level1 = 0;
  int n_level2 = 0;

  double coefficient(const std::string& term) const;
  double standard_error(const std::string& term) const;
};

struct GlmmOptions {
  bool force_zero_variance = false;
  double outer_tol = 1e-6;
  int outer_max_evals = 500;
  int restarts = 3;
};

/// Parameters for evaluating a model likelihood at a fixed point.
struct GlmmParams {
  Eigen::VectorXd beta;
  double tau0_sq = 0.0;
  double tau1_sq = 0.0;
  double tau10 = 0.0;
};

GlmmFit fit_glmm(const ItemFrame& frame, const GlmmSpec& spec,
                 const GlmmOptions& options = {});

/// Laplace marginal log-likelihood at fixed parameters.
double laplace_loglik(const ItemFrame& frame, const GlmmSpec& spec,
                      const GlmmParams& params);

/// Adaptive Gauss-Hermite marginal log-likelihood (verification oracle;
/// q=1 uses 61 nodes, q=2 a 31x31 tensor grid at the conditional mode).
double oracle_loglik(const ItemFrame& frame, const GlmmSpec& spec,
                     const GlmmParams& params);

double icc(double tau_sq);

struct IccScreenEntry {
  double rho = 0.0;
  bool converged = false;
};

struct IccScreenSummary {
  std::map<std::string, IccScreenEntry> per_item;
  double mean = 0.0;
  double variance = 0.0;
  double share_above_02 = 0.0;
  int n_converged = 0;
};

IccScreenSummary icc_screen(const std::map<std::string, ItemFrame>& frames);

}  // namespace catdif
