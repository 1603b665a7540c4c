#pragma once

#include <Eigen/Dense>

namespace reprocs {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// n x T stack of frames, one column per time instant (column-major, like the
// on-disk sequence format).
using FrameSequence = Eigen::MatrixXd;

}  // namespace reprocs
