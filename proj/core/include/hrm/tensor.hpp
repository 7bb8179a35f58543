#pragma once

#include <Eigen/Core>

namespace hrm {

// Activations are stored row-major as [batch * seq_len, hidden_dim]; weight
// matrices are [fan_in, fan_out] and applied as `x * W`.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

}  // namespace hrm
