#include "blinktag/geometry.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "blinktag/errors.hpp"

namespace blinktag {

namespace {

// Hartley normalization: centroid to the origin, mean distance sqrt(2).
Mat3 normalizing_transform(const std::array<Vec2, 4>& pts) {
    Vec2 centroid = Vec2::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= 4.0;
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= 4.0;
    double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    Mat3 t;
    t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
    return t;
}

}  // namespace

Mat3 dlt_4pt(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst) {
    const Mat3 ts = normalizing_transform(src);
    const Mat3 td = normalizing_transform(dst);

    Eigen::Matrix<double, 8, 9> a;
    for (int i = 0; i < 4; ++i) {
        const Vec2 s = apply_homography(ts, src[i]);
        const Vec2 d = apply_homography(td, dst[i]);
        a.row(2 * i) << -s.x(), -s.y(), -1, 0, 0, 0, d.x() * s.x(), d.x() * s.y(), d.x();
        a.row(2 * i + 1) << 0, 0, 0, -s.x(), -s.y(), -1, d.y() * s.x(), d.y() * s.y(), d.y();
    }

    Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0 || sv(7) / sv(0) < 1e-10)
        throw DegenerateQuad("DLT system is rank-deficient (collinear corners?)");

    Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
    Mat3 hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

    // collinear corners keep the system at rank 8 but make the solved
    // map singular; hn has unit norm, so its determinant is scale-free
    if (std::abs(hn.determinant()) < 1e-10)
        throw DegenerateQuad("quad corners are collinear");

    Mat3 out = td.inverse() * hn * ts;
    if (std::abs(out(2, 2)) < 1e-14)
        throw DegenerateQuad("homography not normalizable (h33 ~ 0)");
    return out / out(2, 2);
}

Mat3 nearest_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

}  // namespace blinktag
