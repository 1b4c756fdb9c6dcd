#pragma once

#include <Eigen/Dense>

namespace fslab {

/// Row-major dense matrix used for pose frames and network tensors alike.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace fslab
