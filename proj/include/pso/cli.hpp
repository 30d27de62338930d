#pragma once

#include "pso/neural.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pso {

/// Hyperparameter ranges tried for one dataset, plus the best setting found.
struct HyperGrid {
  Task task = Task::Regression;
  std::vector<int> k;
  std::vector<double> t;
  std::vector<int> n;
  std::vector<double> sigma;
  int best_k = 15;
  double best_t = 1e-3;
  int best_n = 0;
  double best_sigma = 1e-3;
  std::optional<int> pca_dims;
};

const std::map<std::string, HyperGrid>& builtin_grids();

/// Log-spaced weight-decay values from 1e-5 to 1e1.
std::vector<double> l2_grid();

/// Cartesian product over (k, t, n, sigma), k varying slowest.
std::vector<TrainConfig> expand_grid(const TrainConfig& base, const HyperGrid& grid);

/// Relative drop from the validation loss just before `start` to the lowest
/// value over epochs start+1 .. start+window. The phase at `start` runs after
/// that epoch's validation pass, so epoch start+1 is the first one it affects.
double validation_drop(const std::vector<double>& validation_loss, int start, int window);

/// Runs the command line. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pso
