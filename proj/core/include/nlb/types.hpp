#pragma once

#include <Eigen/Dense>

namespace nlb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

}  // namespace nlb
