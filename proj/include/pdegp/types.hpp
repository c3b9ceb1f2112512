#pragma once

#include <Eigen/Core>

namespace pdegp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

}  // namespace pdegp
