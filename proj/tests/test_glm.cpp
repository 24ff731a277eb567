#include <algorithm>
#include <cmath>
#include <doctest.h>

#include "catdif/glm.hpp"
#include "catdif/rng.hpp"
#include "catdif/simplex.hpp"

using namespace catdif;

namespace {

ItemFrame frame_from(const std::vector<FrameRow>& rows) {
  ItemFrame frame;
  frame.item_id = "T";
  frame.rows = rows;
  for (const FrameRow& r : rows) ++frame.cluster_sizes[r.j];
  return frame;
}

// Logistic data over a modest interval structure; coefficients chosen so
// every spec below is estimable.
ItemFrame random_frame(Rng& rng, int n, double beta_g = 0.4) {
  std::vector<FrameRow> rows;
  for (int i = 0; i < n; ++i) {
    FrameRow r;
    r.g = i % 2;
    r.theta_K = normal(rng);
    r.theta_s = r.theta_K + 0.3 * normal(rng);
    r.j = 1 + (i % 7);
    double eta = -0.2 + beta_g * r.g + 0.8 * r.theta_K - 0.3 * r.g * r.theta_K;
    r.y = uniform01(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
    rows.push_back(r);
  }
  return frame_from(rows);
}

double glm_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    double e = eta[i];
    // log(1+exp(e)) computed stably
    double lse = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y[i] * e - lse;
  }
  return ll;
}

// Independent maximizer: chained Nelder-Mead restarts from the zero vector.
Eigen::VectorXd maximize_loglik(const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& y) {
  auto negll = [&](const Eigen::VectorXd& b) { return -glm_loglik(X, y, b); };
  Eigen::VectorXd start = Eigen::VectorXd::Zero(X.cols());
  double step = 0.5;
  for (int round = 0; round < 6; ++round) {
    SimplexResult res = nelder_mead(negll, start, step, 1e-13, 20000);
    start = res.x;
    step *= 0.1;
  }
  return start;
}

bool mixed_y(const ItemFrame& f) {
  bool a0 = false, a1 = false;
  for (const FrameRow& r : f.rows) (r.y ? a1 : a0) = true;
  return a0 && a1;
}

}  // namespace

TEST_CASE("intercept-only fits recover the sample logit") {
  std::vector<FrameRow> rows;
  for (int i = 0; i < 40; ++i) {
    FrameRow r;
    r.y = i < 20 ? 1 : 0;
    r.j = 1 + i % 3;
    rows.push_back(r);
  }
  GlmSpec spec;
  spec.name = "INT";
  spec.terms = {GlmTerm::Intercept};
  GlmFit fit = fit_glm(frame_from(rows), spec);
  CHECK(fit.converged);
  CHECK(fit.coefficient("intercept") == doctest::Approx(0.0).epsilon(1e-8));

  for (int i = 0; i < 40; ++i) rows[i].y = i < 30 ? 1 : 0;
  GlmFit fit75 = fit_glm(frame_from(rows), spec);
  CHECK(fit75.coefficient("intercept") ==
        doctest::Approx(std::log(3.0)).epsilon(1e-6));
}

TEST_CASE("IRLS matches direct likelihood maximization") {
  Rng rng(41);
  int done = 0;
  while (done < 5) {
    ItemFrame frame = random_frame(rng, 200);
    if (!mixed_y(frame)) continue;
    GlmFit fit = fit_glm(frame, GlmSpec::S1());
    if (!fit.converged) continue;
    auto [X, names] = build_design(frame, GlmSpec::S1());
    Eigen::VectorXd y(X.rows());
    for (std::size_t i = 0; i < frame.rows.size(); ++i) y[i] = frame.rows[i].y;
    Eigen::VectorXd oracle = maximize_loglik(X, y);
    for (int c = 0; c < X.cols(); ++c)
      CHECK(std::abs(fit.coefficients[c] - oracle[c]) < 1e-5);
    ++done;
  }
}

TEST_CASE("score equations hold at convergence") {
  Rng rng(43);
  for (int rep = 0; rep < 5; ++rep) {
    ItemFrame frame = random_frame(rng, 300);
    for (const GlmSpec& spec :
         {GlmSpec::S1(), GlmSpec::S2(), GlmSpec::S3(), GlmSpec::MH()}) {
      GlmFit fit = fit_glm(frame, spec);
      if (!fit.converged) continue;
      auto [X, names] = build_design(frame, spec);
      Eigen::VectorXd eta = X * fit.coefficients;
      Eigen::VectorXd resid(X.rows());
      for (int i = 0; i < X.rows(); ++i)
        resid[i] = frame.rows[i].y - 1.0 / (1.0 + std::exp(-eta[i]));
      Eigen::VectorXd grad = X.transpose() * resid;
      for (int c = 0; c < grad.size(); ++c) CHECK(std::abs(grad[c]) < 1e-6);
    }
  }
}

TEST_CASE("AIC/BIC bookkeeping and nested deviance") {
  Rng rng(47);
  ItemFrame frame = random_frame(rng, 400);
  GlmFit s1 = fit_glm(frame, GlmSpec::S1());
  GlmFit s2 = fit_glm(frame, GlmSpec::S2());
  REQUIRE(s1.converged);
  REQUIRE(s2.converged);
  int p1 = static_cast<int>(s1.coefficients.size());
  CHECK(s1.aic == doctest::Approx(s1.deviance + 2.0 * p1).epsilon(1e-12));
  CHECK(s1.bic ==
        doctest::Approx(s1.deviance + p1 * std::log(s1.n)).epsilon(1e-12));
  CHECK(s2.deviance <= s1.deviance + 1e-9);  // S2 nests S1
}

TEST_CASE("wald test values and symmetry") {
  GlmFit fit;
  fit.term_names = {"intercept", "g"};
  fit.coefficients = Eigen::Vector2d(0.3, 0.0);
  fit.standard_errors = Eigen::Vector2d(0.1, 0.2);
  WaldTest zero = wald_test(fit, "g");
  CHECK(zero.p_value == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(normal_p_value(1.959964) == doctest::Approx(0.05).epsilon(1e-4));
  Rng rng(53);
  for (int i = 0; i < 10; ++i) {
    double z = 3.0 * normal(rng);
    CHECK(normal_p_value(z) == doctest::Approx(normal_p_value(-z)).epsilon(1e-12));
  }
}

TEST_CASE("make_strata equal-frequency construction") {
  std::vector<int> s = make_strata({-1.0, -1.0, 1.0, 1.0}, 2);
  CHECK(std::count(s.begin(), s.end(), 0) == 2);
  CHECK(std::count(s.begin(), s.end(), 1) == 2);

  Rng rng(59);
  std::vector<double> values;
  for (int i = 0; i < 1000; ++i) values.push_back(normal(rng));
  std::vector<int> strata = make_strata(values, 5);
  for (int l = 0; l < 5; ++l) {
    long count = std::count(strata.begin(), strata.end(), l);
    CHECK(count >= 199);
    CHECK(count <= 201);
  }

  CHECK_THROWS_AS(make_strata({1.0, 1.0, 1.0}, 2), DegenerateStrata);
}

TEST_CASE("MH fit approximates the direct common odds ratio") {
  Rng rng(61);
  int done = 0;
  while (done < 3) {
    ItemFrame frame = random_frame(rng, 2000, 0.5);
    GlmFit fit = fit_glm(frame, GlmSpec::MH());
    if (!fit.converged) continue;

    // Mantel-Haenszel common odds ratio over the fitted strata
    std::vector<double> theta;
    for (const FrameRow& r : frame.rows) theta.push_back(r.theta_K);
    std::vector<int> strata = make_strata(theta, 5);
    double num = 0.0, den = 0.0;
    for (int l = 0; l < 5; ++l) {
      double a = 0, b = 0, c = 0, d = 0, n = 0;
      for (std::size_t i = 0; i < frame.rows.size(); ++i) {
        if (strata[i] != l) continue;
        const FrameRow& r = frame.rows[i];
        n += 1;
        if (r.g == 1 && r.y == 1) a += 1;
        if (r.g == 0 && r.y == 1) b += 1;
        if (r.g == 1 && r.y == 0) c += 1;
        if (r.g == 0 && r.y == 0) d += 1;
      }
      num += a * d / n;
      den += b * c / n;
    }
    double log_or_mh = std::log(num / den);
    CHECK(std::abs(fit.coefficient("g") - log_or_mh) < 0.05);
    ++done;
  }
}

TEST_CASE("collinear designs raise RankDeficient") {
  std::vector<FrameRow> rows;
  for (int i = 0; i < 60; ++i) {
    FrameRow r;
    r.y = i % 2;
    r.g = (i / 2) % 2;
    r.theta_K = 1.0;  // constant, collinear with the intercept
    r.theta_s = 1.0;
    r.j = 1 + i % 4;
    rows.push_back(r);
  }
  CHECK_THROWS_AS(fit_glm(frame_from(rows), GlmSpec::S1()), RankDeficient);
}

TEST_CASE("separated data is reported as non-converged") {
  std::vector<FrameRow> rows;
  for (int i = 0; i < 80; ++i) {
    FrameRow r;
    r.g = i % 2;
    r.y = r.g;  // g separates y perfectly
    r.theta_K = 0.01 * i;
    r.theta_s = r.theta_K;
    r.j = 1 + i % 4;
    rows.push_back(r);
  }
  GlmSpec spec;
  spec.name = "GONLY";
  spec.terms = {GlmTerm::Intercept, GlmTerm::G};
  GlmFit fit = fit_glm(frame_from(rows), spec);
  CHECK_FALSE(fit.converged);
}
