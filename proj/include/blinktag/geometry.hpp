#pragma once

#include <Eigen/Dense>
#include <array>

namespace blinktag {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Applies a homography to a 2-D point (perspective divide included).
inline Vec2 apply_homography(const Mat3& h, const Vec2& p) {
    Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
    return {q.x() / q.z(), q.y() / q.z()};
}

// Exact four-point direct linear transform. Maps src[i] -> dst[i];
// result is normalized so h(2,2) == 1. Throws DegenerateQuad when the
// 8x9 system is rank-deficient (e.g. three collinear points).
Mat3 dlt_4pt(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst);

// Nearest rotation matrix in the Frobenius sense (SVD projection with
// determinant fixed to +1).
Mat3 nearest_rotation(const Mat3& m);

}  // namespace blinktag
