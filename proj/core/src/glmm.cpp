#include "catdif/glmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "catdif/gauss_hermite.hpp"
#include "catdif/rng.hpp"
#include "catdif/simplex.hpp"

namespace catdif {

GlmmSpec GlmmSpec::EMPTY() { return {"EMPTY", {GlmmFixed::Intercept}, false}; }
GlmmSpec GlmmSpec::M1() {
  return {"M1", {GlmmFixed::Intercept, GlmmFixed::G}, false};
}
GlmmSpec GlmmSpec::M2() {
  return {"M2", {GlmmFixed::Intercept, GlmmFixed::G, GlmmFixed::Nj}, false};
}
GlmmSpec GlmmSpec::M3() {
  return {"M3",
          {GlmmFixed::Intercept, GlmmFixed::G, GlmmFixed::ThetaK,
           GlmmFixed::ThetaKxG},
          false};
}
GlmmSpec GlmmSpec::M4() {
  return {"M4",
          {GlmmFixed::Intercept, GlmmFixed::G, GlmmFixed::Nj,
           GlmmFixed::ThetaK, GlmmFixed::ThetaKxG},
          false};
}
GlmmSpec GlmmSpec::M5() {
  return {"M5", {GlmmFixed::Intercept, GlmmFixed::G}, true};
}
GlmmSpec GlmmSpec::M6() {
  return {"M6", {GlmmFixed::Intercept, GlmmFixed::G, GlmmFixed::Nj}, true};
}
GlmmSpec GlmmSpec::M7() {
  return {"M7",
          {GlmmFixed::Intercept, GlmmFixed::G, GlmmFixed::ThetaK,
           GlmmFixed::ThetaKxG},
          true};
}
GlmmSpec GlmmSpec::M8() {
  return {"M8",
          {GlmmFixed::Intercept, GlmmFixed::G, GlmmFixed::Nj,
           GlmmFixed::ThetaK, GlmmFixed::ThetaKxG},
          true};
}
GlmmSpec GlmmSpec::by_name(const std::string& name) {
  if (name == "EMPTY") return EMPTY();
  if (name == "M1") return M1();
  if (name == "M2") return M2();
  if (name == "M3") return M3();
  if (name == "M4") return M4();
  if (name == "M5") return M5();
  if (name == "M6") return M6();
  if (name == "M7") return M7();
  if (name == "M8") return M8();
  throw std::invalid_argument("unknown glmm model: " + name);
}

double GlmmFit::coefficient(const std::string& term) const {
  for (std::size_t i = 0; i < term_names.size(); ++i)
    if (term_names[i] == term) return fixed_effects[static_cast<int>(i)];
  throw std::invalid_argument("unknown term: " + term);
}

double GlmmFit::standard_error(const std::string& term) const {
  for (std::size_t i = 0; i < term_names.size(); ++i)
    if (term_names[i] == term) return standard_errors[static_cast<int>(i)];
  throw std::invalid_argument("unknown term: " + term);
}

double icc(double tau_sq) {
  if (tau_sq < 0.0) throw std::invalid_argument("icc: negative variance");
  return tau_sq / (tau_sq + M_PI * M_PI / 3.0);
}

namespace {

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

/// Frame flattened for a given spec: fixed design, cluster index per row,
/// raw random-effect covariates per row (intercept and, with q=2, g).
struct GlmmData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::MatrixXd Z;              // n x q
  std::vector<int> cluster;       // row -> 0..J-1
  std::vector<std::vector<int>> cluster_rows;
  std::vector<std::string> names;
  int n = 0, p = 0, q = 1, J = 0;
};

GlmmData make_data(const ItemFrame& frame, const GlmmSpec& spec) {
  GlmmData d;
  d.n = static_cast<int>(frame.rows.size());
  d.q = spec.q();
  d.p = static_cast<int>(spec.fixed.size());
  d.X.resize(d.n, d.p);
  d.y.resize(d.n);
  d.Z.resize(d.n, d.q);

  std::map<int, int> cluster_index;
  for (const auto& [j, nj] : frame.cluster_sizes) {
    int idx = static_cast<int>(cluster_index.size());
    cluster_index.emplace(j, idx);
  }
  d.J = static_cast<int>(cluster_index.size());
  d.cluster.resize(d.n);
  d.cluster_rows.assign(d.J, {});

  for (int i = 0; i < d.n; ++i) {
    const FrameRow& row = frame.rows[i];
    d.y[i] = row.y;
    int col = 0;
    for (GlmmFixed t : spec.fixed) {
      switch (t) {
        case GlmmFixed::Intercept: d.X(i, col) = 1.0; break;
        case GlmmFixed::G: d.X(i, col) = row.g; break;
        case GlmmFixed::Nj:
          d.X(i, col) = frame.cluster_sizes.at(row.j);
          break;
        case GlmmFixed::ThetaK: d.X(i, col) = row.theta_K; break;
        case GlmmFixed::ThetaKxG: d.X(i, col) = row.theta_K * row.g; break;
      }
      ++col;
    }
    d.Z(i, 0) = 1.0;
    if (d.q == 2) d.Z(i, 1) = row.g;
    d.cluster[i] = cluster_index.at(row.j);
    d.cluster_rows[d.cluster[i]].push_back(i);
  }
  for (GlmmFixed t : spec.fixed) {
    switch (t) {
      case GlmmFixed::Intercept: d.names.push_back("intercept"); break;
      case GlmmFixed::G: d.names.push_back("g"); break;
      case GlmmFixed::Nj: d.names.push_back("n_j"); break;
      case GlmmFixed::ThetaK: d.names.push_back("theta_K"); break;
      case GlmmFixed::ThetaKxG: d.names.push_back("theta_K:g"); break;
    }
  }
  return d;
}

/// Result of the penalized IRLS profiling step at one covariance value.
struct PirlsResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd v;           // J x q spherical random effects
  double laplace_loglik = 0.0;
  Eigen::MatrixXd beta_cov;    // conditional covariance of beta
  bool converged = false;
};

/// Joint (beta, v) mode for u_j = Lambda v_j, v ~ N(0, I); the joint
/// penalized problem is strictly concave, so the mode is unique. The
/// normal-equations system is solved per iteration via the Schur
/// complement over the cluster blocks.
PirlsResult pirls(const GlmmData& d, const Eigen::MatrixXd& lambda,
                  const Eigen::VectorXd& beta0, const Eigen::MatrixXd& v0) {
  const int n = d.n, p = d.p, q = d.q, J = d.J;
  Eigen::VectorXd beta = beta0;
  Eigen::MatrixXd v = v0;

  auto eta_of = [&](const Eigen::VectorXd& b, const Eigen::MatrixXd& vv) {
    Eigen::VectorXd eta = d.X * b;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd ztilde = lambda.transpose() * d.Z.row(i).transpose();
      eta[i] += ztilde.dot(vv.row(d.cluster[i]));
    }
    return eta;
  };
  auto penalized_nll = [&](const Eigen::VectorXd& b, const Eigen::MatrixXd& vv) {
    Eigen::VectorXd eta = eta_of(b, vv);
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      double mu = logistic(eta[i]);
      ll += d.y[i] > 0.5 ? std::log(mu) : std::log1p(-mu);
    }
    return -ll + 0.5 * vv.squaredNorm();
  };

  double obj = penalized_nll(beta, v);
  bool converged = false;

  Eigen::MatrixXd schur(p, p);
  std::vector<Eigen::MatrixXd> A(J);   // q x q per-cluster blocks
  std::vector<Eigen::MatrixXd> B(J);   // q x p cross blocks

  constexpr int kMaxIter = 50;
  constexpr double kTol = 1e-9;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    Eigen::VectorXd eta = eta_of(beta, v);
    Eigen::VectorXd mu(n), w(n), z(n);
    for (int i = 0; i < n; ++i) {
      mu[i] = logistic(eta[i]);
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
      z[i] = eta[i] + (d.y[i] - mu[i]) / w[i];
    }

    Eigen::MatrixXd Sxx = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rx = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < J; ++j) {
      A[j] = Eigen::MatrixXd::Identity(q, q);
      B[j] = Eigen::MatrixXd::Zero(q, p);
    }
    std::vector<Eigen::VectorXd> c(J, Eigen::VectorXd::Zero(q));

    for (int i = 0; i < n; ++i) {
      int j = d.cluster[i];
      Eigen::VectorXd x = d.X.row(i).transpose();
      Eigen::VectorXd ztilde = lambda.transpose() * d.Z.row(i).transpose();
      Sxx.noalias() += w[i] * x * x.transpose();
      rx.noalias() += w[i] * z[i] * x;
      A[j].noalias() += w[i] * ztilde * ztilde.transpose();
      B[j].noalias() += w[i] * ztilde * x.transpose();
      c[j].noalias() += w[i] * z[i] * ztilde;
    }

    schur = Sxx;
    Eigen::VectorXd rhs = rx;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> Achol(J);
    for (int j = 0; j < J; ++j) {
      Achol[j].compute(A[j]);
      Eigen::MatrixXd AiB = Achol[j].solve(B[j]);
      schur.noalias() -= B[j].transpose() * AiB;
      rhs.noalias() -= B[j].transpose() * Achol[j].solve(c[j]);
    }

    Eigen::VectorXd beta_new = schur.ldlt().solve(rhs);
    Eigen::MatrixXd v_new(J, q);
    for (int j = 0; j < J; ++j)
      v_new.row(j) = Achol[j].solve(c[j] - B[j] * beta_new).transpose();

    Eigen::VectorXd db = beta_new - beta;
    Eigen::MatrixXd dv = v_new - v;
    double new_obj = penalized_nll(beta_new, v_new);
    double t = 1.0;
    int halvings = 0;
    while (new_obj > obj + 1e-12 && halvings < 30) {
      t *= 0.5;
      beta_new = beta + t * db;
      v_new = v + t * dv;
      new_obj = penalized_nll(beta_new, v_new);
      ++halvings;
    }

    double change = std::max(db.cwiseAbs().maxCoeff() * t,
                             dv.size() ? dv.cwiseAbs().maxCoeff() * t : 0.0);
    beta = beta_new;
    v = v_new;
    obj = new_obj;
    if (change < kTol) {
      converged = true;
      break;
    }
  }

  // Laplace correction uses curvature at the mode.
  Eigen::VectorXd eta = eta_of(beta, v);
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    double mu = logistic(eta[i]);
    ll += d.y[i] > 0.5 ? std::log(mu) : std::log1p(-mu);
  }
  double logdet = 0.0;
  {
    std::vector<Eigen::MatrixXd> Am(J, Eigen::MatrixXd::Identity(q, q));
    Eigen::MatrixXd Sxx = Eigen::MatrixXd::Zero(p, p);
    std::vector<Eigen::MatrixXd> Bm(J, Eigen::MatrixXd::Zero(q, p));
    for (int i = 0; i < n; ++i) {
      double mu = logistic(eta[i]);
      double w = std::max(mu * (1.0 - mu), 1e-10);
      int j = d.cluster[i];
      Eigen::VectorXd x = d.X.row(i).transpose();
      Eigen::VectorXd ztilde = lambda.transpose() * d.Z.row(i).transpose();
      Am[j].noalias() += w * ztilde * ztilde.transpose();
      Bm[j].noalias() += w * ztilde * x.transpose();
      Sxx.noalias() += w * x * x.transpose();
    }
    Eigen::MatrixXd schur_final = Sxx;
    for (int j = 0; j < J; ++j) {
      Eigen::LLT<Eigen::MatrixXd> llt(Am[j]);
      logdet += 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
      schur_final.noalias() -= Bm[j].transpose() * llt.solve(Bm[j]);
    }
    PirlsResult out;
    out.beta = beta;
    out.v = v;
    out.laplace_loglik = ll - 0.5 * v.squaredNorm() - 0.5 * logdet;
    out.beta_cov = schur_final.inverse();
    out.converged = converged;
    return out;
  }
}

Eigen::MatrixXd lambda_from_theta(const Eigen::VectorXd& theta, int q) {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(q, q);
  if (q == 1) {
    lambda(0, 0) = theta[0];
  } else {
    lambda(0, 0) = theta[0];
    lambda(1, 0) = theta[1];
    lambda(1, 1) = theta[2];
  }
  return lambda;
}

Eigen::MatrixXd lambda_from_params(const GlmmParams& params, int q) {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(q, q);
  double l00 = std::sqrt(std::max(0.0, params.tau0_sq));
  lambda(0, 0) = l00;
  if (q == 2) {
    double l10 = l00 > 0.0 ? params.tau10 / l00 : 0.0;
    lambda(1, 0) = l10;
    lambda(1, 1) = std::sqrt(std::max(0.0, params.tau1_sq - l10 * l10));
  }
  return lambda;
}

}  // namespace

double laplace_loglik(const ItemFrame& frame, const GlmmSpec& spec,
                      const GlmmParams& params) {
  GlmmData d = make_data(frame, spec);
  Eigen::MatrixXd lambda = lambda_from_params(params, d.q);

  // beta is held fixed: only the cluster modes are profiled, each via its
  // own Newton iteration with step-halving.
  const Eigen::VectorXd eta_fixed = d.X * params.beta;
  double total = 0.0;
  for (int j = 0; j < d.J; ++j) {
    const std::vector<int>& rows = d.cluster_rows[j];
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d.q);

    auto neg_joint = [&](const Eigen::VectorXd& vv) {
      double ll = 0.0;
      for (int i : rows) {
        double eta = eta_fixed[i] +
                     (lambda.transpose() * d.Z.row(i).transpose()).dot(vv);
        double mu = logistic(eta);
        ll += d.y[i] > 0.5 ? std::log(mu) : std::log1p(-mu);
      }
      return -ll + 0.5 * vv.squaredNorm();
    };

    double obj = neg_joint(v);
    for (int iter = 0; iter < 50; ++iter) {
      Eigen::VectorXd grad = v;
      Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(d.q, d.q);
      for (int i : rows) {
        Eigen::VectorXd ztilde = lambda.transpose() * d.Z.row(i).transpose();
        double eta = eta_fixed[i] + ztilde.dot(v);
        double mu = logistic(eta);
        grad.noalias() -= (d.y[i] - mu) * ztilde;
        hess.noalias() += mu * (1.0 - mu) * ztilde * ztilde.transpose();
      }
      Eigen::VectorXd step = hess.llt().solve(-grad);
      if (step.cwiseAbs().maxCoeff() < 1e-10) break;
      Eigen::VectorXd cand = v + step;
      double cand_obj = neg_joint(cand);
      int halvings = 0;
      while (cand_obj > obj + 1e-12 && halvings < 30) {
        step *= 0.5;
        cand = v + step;
        cand_obj = neg_joint(cand);
        ++halvings;
      }
      v = cand;
      obj = cand_obj;
    }

    double ll = 0.0;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(d.q, d.q);
    for (int i : rows) {
      Eigen::VectorXd ztilde = lambda.transpose() * d.Z.row(i).transpose();
      double eta = eta_fixed[i] + ztilde.dot(v);
      double mu = logistic(eta);
      ll += d.y[i] > 0.5 ? std::log(mu) : std::log1p(-mu);
      hess.noalias() += mu * (1.0 - mu) * ztilde * ztilde.transpose();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    double logdet =
        2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    total += ll - 0.5 * v.squaredNorm() - 0.5 * logdet;
  }
  return total;
}

GlmmFit fit_glmm(const ItemFrame& frame, const GlmmSpec& spec,
                 const GlmmOptions& options) {
  GlmmData d = make_data(frame, spec);
  const int q = d.q;
  const int n_theta = q == 1 ? 1 : 3;

  // Warm starts persist across outer evaluations.
  Eigen::VectorXd beta_ws = Eigen::VectorXd::Zero(d.p);
  Eigen::MatrixXd v_ws = Eigen::MatrixXd::Zero(d.J, q);

  auto deviance_at = [&](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd lambda = lambda_from_theta(theta, q);
    PirlsResult r = pirls(d, lambda, beta_ws, v_ws);
    beta_ws = r.beta;
    v_ws = r.v;
    return -2.0 * r.laplace_loglik;
  };

  SimplexResult best;
  best.value = std::numeric_limits<double>::infinity();
  bool any_converged = false;

  if (options.force_zero_variance) {
    best.x = Eigen::VectorXd::Zero(n_theta);
    best.value = deviance_at(best.x);
    best.converged = true;
    any_converged = true;
  } else {
    Eigen::VectorXd start(n_theta);
    if (q == 1)
      start << 0.5;
    else
      start << 0.5, 0.0, 0.5;

    best = nelder_mead(deviance_at, start, 0.4, options.outer_tol,
                       options.outer_max_evals);
    any_converged = best.converged;

    // Extra starts guard against a poor simplex path; they only run when
    // the first pass looks suspect.
    bool suspicious = !best.converged || std::abs(best.x[0]) < 1e-4;
    if (suspicious) {
      Rng rng(0x5eedULL + static_cast<std::uint64_t>(d.n) * 31 + d.J);
      for (int r = 0; r < options.restarts; ++r) {
        Eigen::VectorXd s(n_theta);
        for (int i = 0; i < n_theta; ++i) s[i] = 0.8 * uniform01(rng);
        SimplexResult alt = nelder_mead(deviance_at, s, 0.3, options.outer_tol,
                                        options.outer_max_evals / 2);
        any_converged = any_converged || alt.converged;
        if (alt.value < best.value - 1e-9) best = alt;
      }
    }
  }

  Eigen::MatrixXd lambda = lambda_from_theta(best.x, q);
  PirlsResult final_fit = pirls(d, lambda, beta_ws, v_ws);

  if (!any_converged && !options.force_zero_variance) throw NonConvergence();

  Eigen::MatrixXd sigma = lambda * lambda.transpose();

  GlmmFit fit;
  fit.model = spec.name;
  fit.term_names = d.names;
  fit.fixed_effects = final_fit.beta;
  fit.standard_errors =
      final_fit.beta_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.tau0_sq = sigma(0, 0);
  if (q == 2) {
    fit.tau1_sq = sigma(1, 1);
    fit.tau10 = sigma(1, 0);
  }
  fit.deviance = -2.0 * final_fit.laplace_loglik;
  int p_total = d.p + n_theta;
  fit.aic = fit.deviance + 2.0 * p_total;
  fit.bic = fit.deviance + p_total * std::log(static_cast<double>(d.n));
  fit.icc = icc(fit.tau0_sq);
  fit.n_level1 = d.n;
  fit.n_level2 = d.J;

  // Latent-scale R2 decomposition.
  Eigen::VectorXd fixed_pred = d.X * final_fit.beta;
  double mean_pred = fixed_pred.mean();
  double var_fixed =
      (fixed_pred.array() - mean_pred).square().sum() / d.n;
  double mean_g = 0.0, mean_g2 = 0.0;
  if (q == 2) {
    double sg = 0.0, sg2 = 0.0;
    for (int i = 0; i < d.n; ++i) {
      sg += d.Z(i, 1);
      sg2 += d.Z(i, 1) * d.Z(i, 1);
    }
    mean_g = sg / d.n;
    mean_g2 = sg2 / d.n;
  }
  double tau_total = fit.tau0_sq + fit.tau1_sq * mean_g2 + 2.0 * fit.tau10 * mean_g;
  double denom = var_fixed + tau_total + M_PI * M_PI / 3.0;
  fit.r2_marginal = var_fixed / denom;
  fit.r2_conditional = (var_fixed + tau_total) / denom;

  fit.boundary = fit.tau0_sq < 1e-6 || (q == 2 && fit.tau1_sq < 1e-6);
  fit.converged = final_fit.converged && fit.fixed_effects.allFinite() &&
                  std::isfinite(fit.deviance) &&
                  (any_converged || options.force_zero_variance);
  return fit;
}

double oracle_loglik(const ItemFrame& frame, const GlmmSpec& spec,
                     const GlmmParams& params) {
  GlmmData d = make_data(frame, spec);
  const int q = d.q;
  if ((q == 1 && d.J > 20) || (q == 2 && d.J > 10)) throw TooLarge();

  Eigen::MatrixXd sigma(q, q);
  sigma(0, 0) = params.tau0_sq;
  if (q == 2) {
    sigma(1, 1) = params.tau1_sq;
    sigma(0, 1) = sigma(1, 0) = params.tau10;
  }

  const Eigen::VectorXd eta_fixed = d.X * params.beta;

  auto cluster_loglik_at_zero = [&](int j) {
    double ll = 0.0;
    for (int i : d.cluster_rows[j]) {
      double mu = logistic(eta_fixed[i]);
      ll += d.y[i] > 0.5 ? std::log(mu) : std::log1p(-mu);
    }
    return ll;
  };

  // Degenerate covariance: the integral collapses to the plain GLM value.
  if (sigma.norm() < 1e-14) {
    double total = 0.0;
    for (int j = 0; j < d.J; ++j) total += cluster_loglik_at_zero(j);
    return total;
  }

  Eigen::MatrixXd sigma_inv = sigma.inverse();
  double logdet_sigma = std::log(sigma.determinant());
  const int nodes_1d = q == 1 ? 61 : 31;
  GaussHermiteRule rule = gauss_hermite(nodes_1d);

  double total = 0.0;
  for (int j = 0; j < d.J; ++j) {
    const std::vector<int>& rows = d.cluster_rows[j];

    // log joint density of (y_j, u); the Gaussian normalization is kept so
    // the cluster value is the true marginal log-likelihood contribution.
    auto log_joint = [&](const Eigen::VectorXd& u) {
      double ll = 0.0;
      for (int i : rows) {
        double eta = eta_fixed[i] + d.Z.row(i) * u;
        double mu = logistic(eta);
        ll += d.y[i] > 0.5 ? std::log(mu) : std::log1p(-mu);
      }
      double quad = u.dot(sigma_inv * u);
      return ll - 0.5 * quad - 0.5 * q * std::log(2.0 * M_PI) -
             0.5 * logdet_sigma;
    };

    // Conditional mode and curvature for the adaptive centering.
    Eigen::VectorXd u = Eigen::VectorXd::Zero(q);
    double obj = -log_joint(u);
    for (int iter = 0; iter < 100; ++iter) {
      Eigen::VectorXd grad = sigma_inv * u;
      Eigen::MatrixXd hess = sigma_inv;
      for (int i : rows) {
        Eigen::VectorXd zi = d.Z.row(i).transpose();
        double eta = eta_fixed[i] + zi.dot(u);
        double mu = logistic(eta);
        grad.noalias() -= (d.y[i] - mu) * zi;
        hess.noalias() += mu * (1.0 - mu) * zi * zi.transpose();
      }
      Eigen::VectorXd step = hess.llt().solve(-grad);
      if (step.cwiseAbs().maxCoeff() < 1e-12) break;
      Eigen::VectorXd cand = u + step;
      double cand_obj = -log_joint(cand);
      int halvings = 0;
      while (cand_obj > obj + 1e-12 && halvings < 30) {
        step *= 0.5;
        cand = u + step;
        cand_obj = -log_joint(cand);
        ++halvings;
      }
      u = cand;
      obj = cand_obj;
    }

    Eigen::MatrixXd hess = sigma_inv;
    for (int i : rows) {
      Eigen::VectorXd zi = d.Z.row(i).transpose();
      double eta = eta_fixed[i] + zi.dot(u);
      double mu = logistic(eta);
      hess.noalias() += mu * (1.0 - mu) * zi * zi.transpose();
    }
    Eigen::MatrixXd scale = hess.inverse().llt().matrixL();

    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    if (q == 1) {
      terms.reserve(nodes_1d);
      for (int k = 0; k < nodes_1d; ++k) {
        Eigen::VectorXd pt =
            u + std::sqrt(2.0) * scale.col(0) * rule.nodes[k];
        double t = log_joint(pt) + rule.nodes[k] * rule.nodes[k] +
                   std::log(rule.weights[k]);
        terms.push_back(t);
        max_term = std::max(max_term, t);
      }
    } else {
      terms.reserve(nodes_1d * nodes_1d);
      for (int k1 = 0; k1 < nodes_1d; ++k1) {
        for (int k2 = 0; k2 < nodes_1d; ++k2) {
          Eigen::Vector2d t2(rule.nodes[k1], rule.nodes[k2]);
          Eigen::VectorXd pt = u + std::sqrt(2.0) * (scale * t2);
          double t = log_joint(pt) + t2.squaredNorm() +
                     std::log(rule.weights[k1] * rule.weights[k2]);
          terms.push_back(t);
          max_term = std::max(max_term, t);
        }
      }
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - max_term);
    double log_integral = max_term + std::log(sum) +
                          0.5 * q * std::log(2.0) +
                          std::log(scale.diagonal().prod());
    total += log_integral;
  }
  return total;
}

IccScreenSummary icc_screen(const std::map<std::string, ItemFrame>& frames) {
  IccScreenSummary summary;
  double sum = 0.0, sum_sq = 0.0;
  int above = 0;
  for (const auto& [id, frame] : frames) {
    IccScreenEntry entry;
    try {
      GlmmFit fit = fit_glmm(frame, GlmmSpec::EMPTY());
      entry.rho = fit.icc;
      entry.converged = fit.converged;
    } catch (const NonConvergence&) {
      entry.converged = false;
    }
    if (entry.converged) {
      sum += entry.rho;
      sum_sq += entry.rho * entry.rho;
      if (entry.rho > 0.2) ++above;
      ++summary.n_converged;
    }
    summary.per_item.emplace(id, entry);
  }
  if (summary.n_converged > 0) {
    summary.mean = sum / summary.n_converged;
    summary.variance =
        std::max(0.0, sum_sq / summary.n_converged - summary.mean * summary.mean);
    summary.share_above_02 =
        static_cast<double>(above) / summary.n_converged;
  }
  return summary;
}

}  // namespace catdif
