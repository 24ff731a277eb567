#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catdif/prep.hpp"

namespace catdif {

struct RankDeficient : std::runtime_error {
  RankDeficient() : std::runtime_error("collinear design matrix") {}
};

struct DegenerateStrata : std::runtime_error {
  DegenerateStrata() : std::runtime_error("fewer distinct values than strata") {}
};

enum class GlmTerm { Intercept, G, ThetaK, ThetaKxG, ThetaS, ThetaSxG, Strata };

struct GlmSpec {
  std::string name;
  std::vector<GlmTerm> terms;
  int n_strata = 5;  // only used when Strata present

  static GlmSpec S1();   // intercept + g + theta_K + theta_K*g
  static GlmSpec S2();   // S1 + theta_s
  static GlmSpec S3();   // intercept + g + theta_s + theta_s*g
  static GlmSpec MH(int L = 5);  // intercept + strata dummies + g
  static GlmSpec LR_ALT();       // identical to S1
};

struct GlmFit {
  std::string model;
  std::vector<std::string> term_names;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  double deviance = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int n = 0;
  bool converged = false;
  int iterations = 0;

  double coefficient(const std::string& term) const;
  double standard_error(const std::string& term) const;
};

struct WaldTest {
  double z = 0.0;
  double p_value = 1.0;
};

/// Equal-frequency strata over theta_K values; labels in 0..L-1.
std::vector<int> make_strata(const std::vector<double>& values, int L);

/// Design matrix plus column names for a spec over a frame.
std::pair<Eigen::MatrixXd, std::vector<std::string>> build_design(
    const ItemFrame& frame, const GlmSpec& spec);

GlmFit fit_glm(const ItemFrame& frame, const GlmSpec& spec);

WaldTest wald_test(const GlmFit& fit, const std::string& term);

/// Two-sided standard-normal p-value.
double normal_p_value(double z);

}  // namespace catdif
