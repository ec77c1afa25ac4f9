#pragma once

#include <Eigen/Dense>

namespace ideolens {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Matd = Mat<double>;
using Vecd = Vec<double>;
using RowVecd = RowVec<double>;
using Matf = Mat<float>;
using Vecf = Vec<float>;

}  // namespace ideolens
