#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace trcm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using IndexList = std::vector<Index>;

/// A matrix cell. Lists of cells are kept in column-major (vec) order.
struct Cell {
  Index row = 0;
  Index col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

}  // namespace trcm
