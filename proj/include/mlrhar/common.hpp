#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>

namespace mlrhar {

using Index = Eigen::Index;
using Ranks = std::array<Index, 3>;

// Precondition failure: caller passed something structurally wrong.
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Numerical failure: inputs were admissible but the computation cannot proceed.
inline void ensure(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

}  // namespace mlrhar
