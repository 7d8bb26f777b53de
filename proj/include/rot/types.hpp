#pragma once

#include <Eigen/Dense>

#include <vector>

namespace rot {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
/// Plans and cost tables are stored row-major so that entry (i, j) sits at
/// position i * cols + j of the vectorized form.
using RowMatrix = RowMatrixX<double>;

using IndexList = std::vector<Index>;

}  // namespace rot
