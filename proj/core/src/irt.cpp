#include "catdif/irt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace catdif {

namespace {

// exp(t)/(1+exp(t)) without overflow for large |t|.
double logistic(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

double prob_correct(double theta, const Item& item, const IrtConfig& cfg) {
  double t = cfg.D * item.a * (theta - item.b);
  return item.c + (1.0 - item.c) * logistic(t);
}

double log_likelihood(double theta, const ResponseVector& responses,
                      const IrtConfig& cfg) {
  double ll = 0.0;
  for (const auto& [item, x] : responses.entries) {
    double p = prob_correct(theta, item, cfg);
    ll += x ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

double score(double theta, const ResponseVector& responses,
             const IrtConfig& cfg) {
  double s = 0.0;
  for (const auto& [item, x] : responses.entries) {
    double p = prob_correct(theta, item, cfg);
    // dP/dtheta = D*a*(P-c)*(1-P)/(1-c); the x==1 and x==0 terms collapse to
    // D*a*(x-P)*(P-c) / (P*(1-c)).
    s += cfg.D * item.a * (x - p) * (p - item.c) / (p * (1.0 - item.c));
  }
  return s;
}

double fisher_information(double theta, const Item& item,
                          const IrtConfig& cfg) {
  double p = prob_correct(theta, item, cfg);
  double u = (p - item.c) / (1.0 - item.c);
  return cfg.D * cfg.D * item.a * item.a * u * u * (1.0 - p) / p;
}

double test_information(double theta, const ResponseVector& responses,
                        const IrtConfig& cfg) {
  double info = 0.0;
  for (const auto& [item, x] : responses.entries) {
    (void)x;
    info += fisher_information(theta, item, cfg);
  }
  return info;
}

ThetaEstimate estimate_mle(const ResponseVector& responses,
                           const IrtConfig& cfg, double start) {
  constexpr int kMaxIter = 100;
  constexpr int kMaxHalvings = 30;
  constexpr double kTol = 1e-6;

  double theta = std::clamp(start, cfg.theta_min, cfg.theta_max);
  double nll = -log_likelihood(theta, responses, cfg);

  for (int iter = 0; iter < kMaxIter; ++iter) {
    double s = score(theta, responses, cfg);
    if (std::abs(s) < kTol) break;
    double info = test_information(theta, responses, cfg);
    if (info <= 0.0) break;
    double step = s / info;
    // Guard against wild steps from tiny information.
    step = std::clamp(step, -2.0, 2.0);

    double cand = std::clamp(theta + step, cfg.theta_min, cfg.theta_max);
    double cand_nll = -log_likelihood(cand, responses, cfg);
    int halvings = 0;
    while (cand_nll > nll && halvings < kMaxHalvings) {
      step *= 0.5;
      cand = std::clamp(theta + step, cfg.theta_min, cfg.theta_max);
      cand_nll = -log_likelihood(cand, responses, cfg);
      ++halvings;
    }
    if (std::abs(cand - theta) < 1e-12) break;
    theta = cand;
    nll = cand_nll;
  }

  ThetaEstimate out;
  out.theta = theta;
  double info = test_information(theta, responses, cfg);
  out.se = info > 0.0 ? 1.0 / std::sqrt(info)
                      : std::numeric_limits<double>::infinity();
  bool interior = theta > cfg.theta_min && theta < cfg.theta_max;
  out.converged = interior && std::abs(score(theta, responses, cfg)) < kTol;
  return out;
}

ThetaEstimate estimate_eap(const ResponseVector& responses,
                           const IrtConfig& cfg, double prior_mean,
                           double prior_sd) {
  int n = cfg.quad_points;
  double step = (cfg.theta_max - cfg.theta_min) / (n - 1);

  // Rectangle rule; the constant prior normalization and the step width
  // cancel in the posterior moments.
  double max_lw = -std::numeric_limits<double>::infinity();
  std::vector<double> lw(n);
  for (int i = 0; i < n; ++i) {
    double th = cfg.theta_min + i * step;
    double z = (th - prior_mean) / prior_sd;
    lw[i] = -0.5 * z * z + log_likelihood(th, responses, cfg);
    max_lw = std::max(max_lw, lw[i]);
  }
  double norm = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double th = cfg.theta_min + i * step;
    double w = std::exp(lw[i] - max_lw);
    norm += w;
    m1 += w * th;
    m2 += w * th * th;
  }
  ThetaEstimate out;
  out.theta = m1 / norm;
  double var = std::max(0.0, m2 / norm - out.theta * out.theta);
  out.se = std::sqrt(var);
  out.converged = true;
  return out;
}

}  // namespace catdif
