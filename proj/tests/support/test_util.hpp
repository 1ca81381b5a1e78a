#pragma once

#include <random>

#include "dcgnn/tensor.hpp"

namespace dcgnn::testing {

using ad::Mat;
using ad::Vec;

inline Mat random_mat(std::mt19937_64& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

// max-abs difference relative to the reference's max-abs entry
inline double rel_err(const Mat& got, const Mat& want) {
  double scale = want.cwiseAbs().maxCoeff();
  return (got - want).cwiseAbs().maxCoeff() / std::max(scale, 1e-12);
}

}  // namespace dcgnn::testing
