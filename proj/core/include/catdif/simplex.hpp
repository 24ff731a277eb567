#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace catdif {

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead minimizer. Stops when the value spread across the simplex
/// drops below tol or the evaluation budget runs out.
inline SimplexResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& start, double initial_step = 0.5,
    double tol = 1e-6, int max_evals = 500) {
  const int n = static_cast<int>(start.size());
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };

  std::vector<std::pair<double, Eigen::VectorXd>> simplex;
  simplex.reserve(n + 1);
  simplex.emplace_back(eval(start), start);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v = start;
    v[i] += initial_step;
    simplex.emplace_back(eval(v), v);
  }
  auto by_value = [](const auto& a, const auto& b) { return a.first < b.first; };
  std::sort(simplex.begin(), simplex.end(), by_value);

  bool converged = false;
  while (evals < max_evals) {
    if (simplex.back().first - simplex.front().first < tol) {
      converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += simplex[i].second;
    centroid /= n;
    const auto& worst = simplex.back();

    Eigen::VectorXd reflected = centroid + (centroid - worst.second);
    double fr = eval(reflected);
    if (fr < simplex.front().first) {
      Eigen::VectorXd expanded = centroid + 2.0 * (centroid - worst.second);
      double fe = eval(expanded);
      simplex.back() = fe < fr ? std::make_pair(fe, expanded)
                               : std::make_pair(fr, reflected);
    } else if (fr < simplex[n - 1].first) {
      simplex.back() = {fr, reflected};
    } else {
      Eigen::VectorXd contracted =
          centroid + 0.5 * (worst.second - centroid);
      double fc = eval(contracted);
      if (fc < worst.first) {
        simplex.back() = {fc, contracted};
      } else {
        for (int i = 1; i <= n; ++i) {
          simplex[i].second =
              simplex[0].second + 0.5 * (simplex[i].second - simplex[0].second);
          simplex[i].first = eval(simplex[i].second);
        }
      }
    }
    std::sort(simplex.begin(), simplex.end(), by_value);
  }

  SimplexResult out;
  out.x = simplex.front().second;
  out.value = simplex.front().first;
  out.evaluations = evals;
  out.converged = converged;
  return out;
}

}  // namespace catdif
