#include "catdif/glm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace catdif {

GlmSpec GlmSpec::S1() {
  return {"S1",
          {GlmTerm::Intercept, GlmTerm::G, GlmTerm::ThetaK, GlmTerm::ThetaKxG}};
}
GlmSpec GlmSpec::S2() {
  return {"S2",
          {GlmTerm::Intercept, GlmTerm::G, GlmTerm::ThetaK, GlmTerm::ThetaKxG,
           GlmTerm::ThetaS}};
}
GlmSpec GlmSpec::S3() {
  return {"S3",
          {GlmTerm::Intercept, GlmTerm::G, GlmTerm::ThetaS, GlmTerm::ThetaSxG}};
}
GlmSpec GlmSpec::MH(int L) {
  GlmSpec spec{"MH", {GlmTerm::Intercept, GlmTerm::Strata, GlmTerm::G}};
  spec.n_strata = L;
  return spec;
}
GlmSpec GlmSpec::LR_ALT() {
  GlmSpec spec = S1();
  spec.name = "LR_ALT";
  return spec;
}

double GlmFit::coefficient(const std::string& term) const {
  for (std::size_t i = 0; i < term_names.size(); ++i)
    if (term_names[i] == term) return coefficients[static_cast<int>(i)];
  throw std::invalid_argument("unknown term: " + term);
}

double GlmFit::standard_error(const std::string& term) const {
  for (std::size_t i = 0; i < term_names.size(); ++i)
    if (term_names[i] == term) return standard_errors[static_cast<int>(i)];
  throw std::invalid_argument("unknown term: " + term);
}

std::vector<int> make_strata(const std::vector<double>& values, int L) {
  if (L < 2) throw std::invalid_argument("make_strata: L < 2");
  std::vector<double> distinct(values);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  if (static_cast<int>(distinct.size()) < L) throw DegenerateStrata();

  // Rank-based equal-frequency assignment; ties share a stratum via the
  // value's first rank.
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<int> labels(values.size(), 0);
  std::size_t n = values.size();
  for (std::size_t rank = 0; rank < n; ++rank)
    labels[order[rank]] = static_cast<int>(rank * L / n);
  return labels;
}

std::pair<Eigen::MatrixXd, std::vector<std::string>> build_design(
    const ItemFrame& frame, const GlmSpec& spec) {
  int n = static_cast<int>(frame.rows.size());

  std::vector<int> strata;
  int n_strata_cols = 0;
  bool has_strata = std::find(spec.terms.begin(), spec.terms.end(),
                              GlmTerm::Strata) != spec.terms.end();
  if (has_strata) {
    std::vector<double> theta_K(n);
    for (int i = 0; i < n; ++i) theta_K[i] = frame.rows[i].theta_K;
    strata = make_strata(theta_K, spec.n_strata);
    n_strata_cols = spec.n_strata - 1;  // stratum 0 is the reference
  }

  int p = 0;
  for (GlmTerm t : spec.terms)
    p += t == GlmTerm::Strata ? n_strata_cols : 1;

  Eigen::MatrixXd X(n, p);
  std::vector<std::string> names;
  int col = 0;
  for (GlmTerm t : spec.terms) {
    switch (t) {
      case GlmTerm::Intercept:
        X.col(col).setOnes();
        names.push_back("intercept");
        ++col;
        break;
      case GlmTerm::G:
        for (int i = 0; i < n; ++i) X(i, col) = frame.rows[i].g;
        names.push_back("g");
        ++col;
        break;
      case GlmTerm::ThetaK:
        for (int i = 0; i < n; ++i) X(i, col) = frame.rows[i].theta_K;
        names.push_back("theta_K");
        ++col;
        break;
      case GlmTerm::ThetaKxG:
        for (int i = 0; i < n; ++i)
          X(i, col) = frame.rows[i].theta_K * frame.rows[i].g;
        names.push_back("theta_K:g");
        ++col;
        break;
      case GlmTerm::ThetaS:
        for (int i = 0; i < n; ++i) X(i, col) = frame.rows[i].theta_s;
        names.push_back("theta_s");
        ++col;
        break;
      case GlmTerm::ThetaSxG:
        for (int i = 0; i < n; ++i)
          X(i, col) = frame.rows[i].theta_s * frame.rows[i].g;
        names.push_back("theta_s:g");
        ++col;
        break;
      case GlmTerm::Strata:
        for (int s = 1; s < spec.n_strata; ++s) {
          for (int i = 0; i < n; ++i) X(i, col) = strata[i] == s ? 1.0 : 0.0;
          names.push_back("stratum" + std::to_string(s + 1));
          ++col;
        }
        break;
    }
  }
  return {std::move(X), std::move(names)};
}

namespace {

double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double d = 0.0;
  for (int i = 0; i < y.size(); ++i)
    d += y[i] > 0.5 ? std::log(mu[i]) : std::log1p(-mu[i]);
  return -2.0 * d;
}

Eigen::VectorXd logistic_vec(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    double e = std::exp(t);
    return e / (1.0 + e);
  });
}

}  // namespace

GlmFit fit_glm(const ItemFrame& frame, const GlmSpec& spec) {
  auto [X, names] = build_design(frame, spec);
  int n = static_cast<int>(X.rows());
  int p = static_cast<int>(X.cols());

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-8);
  if (qr.rank() < p) throw RankDeficient();

  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = frame.rows[i].y;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd mu = logistic_vec(X * beta);
  double deviance = binomial_deviance(y, mu);
  Eigen::MatrixXd XtWX(p, p);
  bool converged = false;
  int iterations = 0;

  constexpr int kMaxIter = 50;
  constexpr double kTol = 1e-8;
  for (int iter = 1; iter <= kMaxIter; ++iter) {
    iterations = iter;
    Eigen::VectorXd w =
        (mu.array() * (1.0 - mu.array())).cwiseMax(1e-10).matrix();
    Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd z = eta + ((y - mu).array() / w.array()).matrix();

    XtWX = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd XtWz = X.transpose() * (w.asDiagonal() * z);
    Eigen::VectorXd beta_new = XtWX.ldlt().solve(XtWz);

    // Step-halving keeps the deviance monotone.
    Eigen::VectorXd step = beta_new - beta;
    double new_dev = binomial_deviance(y, logistic_vec(X * beta_new));
    int halvings = 0;
    while (new_dev > deviance + 1e-12 && halvings < 30) {
      step *= 0.5;
      beta_new = beta + step;
      new_dev = binomial_deviance(y, logistic_vec(X * beta_new));
      ++halvings;
    }

    double max_change = step.cwiseAbs().maxCoeff();
    beta = beta_new;
    mu = logistic_vec(X * beta);
    deviance = new_dev;
    if (max_change < kTol) {
      converged = true;
      break;
    }
  }

  // Separation shows up as runaway coefficients at convergence failure.
  if (!converged && beta.cwiseAbs().maxCoeff() > 15.0) converged = false;

  GlmFit fit;
  fit.model = spec.name;
  fit.term_names = std::move(names);
  fit.coefficients = beta;
  Eigen::MatrixXd cov = XtWX.inverse();
  fit.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.deviance = deviance;
  fit.aic = deviance + 2.0 * p;
  fit.bic = deviance + p * std::log(static_cast<double>(n));
  fit.n = n;
  fit.converged = converged;
  fit.iterations = iterations;
  return fit;
}

double normal_p_value(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

WaldTest wald_test(const GlmFit& fit, const std::string& term) {
  WaldTest out;
  double est = fit.coefficient(term);
  double se = fit.standard_error(term);
  if (se <= 0.0) {
    out.z = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.z = est / se;
  out.p_value = normal_p_value(out.z);
  return out;
}

}  // namespace catdif
