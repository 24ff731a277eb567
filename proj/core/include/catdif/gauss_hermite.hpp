#pragma once

#include <vector>

namespace catdif {

struct GaussHermiteRule {
  std::vector<double> nodes;    // roots of H_n, weight function exp(-x^2)
  std::vector<double> weights;
};

/// Golub-Welsch construction from the Jacobi matrix.
GaussHermiteRule gauss_hermite(int n);

}  // namespace catdif
