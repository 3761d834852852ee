#pragma once

#include <Eigen/Dense>

namespace figs {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec14 = Eigen::Matrix<double, 14, 1>;
using Vec15 = Eigen::Matrix<double, 15, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat14 = Eigen::Matrix<double, 14, 14>;
using Mat14x4 = Eigen::Matrix<double, 14, 4>;
using Mat4x14 = Eigen::Matrix<double, 4, 14>;

}  // namespace figs
