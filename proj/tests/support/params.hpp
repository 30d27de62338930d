#pragma once

// Test-only helpers for treating network parameters as one flat vector.

#include "pso/neural.hpp"

#include <limits>
#include <vector>

namespace pso::testing {

inline VectorXd flatten(const MlpParams<double>& p) {
  std::vector<double> out;
  for (const auto& l : p) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return Eigen::Map<VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline void unflatten(const VectorXd& x, MlpParams<double>& p) {
  Eigen::Index k = 0;
  for (auto& l : p) {
    l.weight = Eigen::Map<const MatrixXd>(x.data() + k, l.weight.rows(), l.weight.cols());
    k += l.weight.size();
    l.bias = x.segment(k, l.bias.size());
    k += l.bias.size();
  }
}

/// Smallest |pre-activation| of any hidden unit. Finite-difference probes
/// are safe when this is well above the probe size.
inline double kink_margin(const Model& m, const MatrixXd& x) {
  ForwardCache<double> cache;
  mlp_forward(m, x, &cache);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < cache.preactivations.size(); ++l)
    margin = std::min(margin, cache.preactivations[l].cwiseAbs().minCoeff());
  return margin;
}

}  // namespace pso::testing
