#include "blinktag/pose.hpp"

#include <cmath>

#include "blinktag/errors.hpp"

namespace blinktag {

Mat3 homography_from_quad(const Quad& quad, double marker_side) {
    if (marker_side <= 0.0) throw ConfigError("marker_side must be positive");
    const double h = marker_side / 2.0;
    // marker-plane corners, same order as the quad: TL, TR, BR, BL
    const std::array<Vec2, 4> plane = {Vec2{-h, -h}, Vec2{h, -h}, Vec2{h, h}, Vec2{-h, h}};
    return dlt_4pt(plane, quad.corners);
}

PoseEstimate decompose(const Mat3& homography, const CameraModel& camera) {
    const Mat3 m = camera.intrinsics().inverse() * homography;
    Vec3 h1 = m.col(0);
    Vec3 h2 = m.col(1);
    Vec3 h3 = m.col(2);

    const double n1 = h1.norm(), n2 = h2.norm();
    if (n1 < 1e-12 || n2 < 1e-12) throw DegeneratePose("homography column collapsed");
    const double lambda = 2.0 / (n1 + n2);

    Vec3 r1 = lambda * h1;
    Vec3 r2 = lambda * h2;
    Vec3 t = lambda * h3;
    if (t.z() < 0.0) {  // marker must sit in front of the camera
        r1 = -r1;
        r2 = -r2;
        t = -t;
    }
    if (t.z() <= 0.0) throw BehindCamera("decomposed pose has non-positive depth");

    Mat3 approx;
    approx.col(0) = r1;
    approx.col(1) = r2;
    approx.col(2) = r1.cross(r2);
    const Mat3 rotation = nearest_rotation(approx);

    PoseEstimate pose;
    pose.rotation = rotation;
    pose.translation = t;
    pose.distance = t.z();
    pose.yaw_deg = std::atan2(-rotation(2, 0), rotation(0, 0)) * 180.0 / M_PI;
    return pose;
}

Vec3 localize(const DetectionResult& detection, const PoseEstimate& pose, const MarkerMap& map) {
    const auto it = map.entries.find(detection.id);
    if (it == map.entries.end())
        throw UnknownMarker("marker " + std::to_string(detection.id) + " not in map");
    const Vec3 camera_in_marker = -(pose.rotation.transpose() * pose.translation);
    return it->second.position + it->second.orientation * camera_in_marker;
}

}  // namespace blinktag
