#pragma once

#include <map>

#include "blinktag/detector.hpp"
#include "blinktag/geometry.hpp"
#include "blinktag/optics.hpp"

namespace blinktag {

// Rigid transform from marker to camera coordinates, plus the two scalars
// the experiments sweep. Frame conventions as documented on ScenePose.
struct PoseEstimate {
    Mat3 rotation;     // marker frame -> camera frame, det +1
    Vec3 translation;  // meters
    double distance = 0.0;  // translation projected on the optical axis
    double yaw_deg = 0.0;   // recovered rotation about the marker's vertical axis
};

// Pre-surveyed world pose per marker ID.
struct MarkerMapEntry {
    Vec3 position;     // marker center in world coordinates, meters
    Mat3 orientation;  // marker frame -> world frame
    double marker_side = 0.16;
};

struct MarkerMap {
    std::map<int, MarkerMapEntry> entries;
};

// Exact DLT mapping the marker corners (+-side/2, +-side/2), ordered TL,
// TR, BR, BL, onto the quad corners. Throws DegenerateQuad on a
// rank-deficient system (collinear corners).
Mat3 homography_from_quad(const Quad& quad, double marker_side);

// Standard planar homography decomposition: K^-1 H = [h1 h2 h3],
// lambda = 2/(|h1|+|h2|), R from (lambda h1, lambda h2, r1 x r2) projected
// to the nearest rotation, t = lambda h3 with positive depth enforced.
// Throws BehindCamera when no sign choice puts the marker in front.
PoseEstimate decompose(const Mat3& homography, const CameraModel& camera);

// Camera world position from one detection: the marker's surveyed pose
// composed with the inverse of the estimated camera-to-marker transform.
// Throws UnknownMarker when the detected ID is not in the map.
Vec3 localize(const DetectionResult& detection, const PoseEstimate& pose, const MarkerMap& map);

}  // namespace blinktag
