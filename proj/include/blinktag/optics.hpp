#pragma once

#include <cstdint>
#include <vector>

#include "blinktag/codec.hpp"
#include "blinktag/geometry.hpp"

namespace blinktag {

// Rolling-shutter pinhole camera. Row v (0-based, top first) is sampled
// at t = t0 + v * frame_scan_time / height; frame_scan_time is the time
// the readout needs to sweep all `height` lines.
struct CameraModel {
    int width = 640;
    int height = 480;
    double fx = 1125.0, fy = 1125.0;  // focal lengths, pixels
    double cx = 320.0, cy = 240.0;    // principal point, pixels
    double frame_scan_time = 0.01;    // seconds

    Mat3 intrinsics() const {
        Mat3 k;
        k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
        return k;
    }
    double line_period() const { return frame_scan_time / height; }
};

// Marker placement relative to the camera.
//
// Frame conventions (fixed throughout the library): camera +x right,
// +y down, +z forward along the optical axis; the marker plane carries
// x right, y down, origin at the panel center, and its +z normal points
// away from the viewer. A frontal view is therefore R = I, t = (0,0,d),
// and the camera center sits at (0,0,-d) in marker coordinates.
struct ScenePose {
    double distance = 0.6;    // meters, camera to marker center along the optical axis
    double yaw_deg = 0.0;     // rotation about the marker's vertical axis; 0 = frontal
    double marker_side = 0.16;  // meters, physical side length of the LED grid
    double roll_deg = 0.0;    // in-plane rotation about the panel normal
};

// 8-bit grayscale image, row-major.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int x, int y) const { return pixels[y * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[y * width + x]; }

    bool operator==(const Frame& o) const = default;
};

// Sensor noise plus a crude stand-in for the physical diffuser:
// `blur_radius` is the sigma of an isotropic Gaussian blur applied before
// noise, and `directivity` dims the panel by cos(view angle)^directivity
// (0 = no angular falloff).
struct NoiseModel {
    double gaussian_sigma = 0.0;  // gray levels
    double ambient = 0.0;         // gray-level offset
    double blur_radius = 0.0;     // pixels (Gaussian sigma); 0 disables
    double directivity = 0.0;     // cosine falloff exponent
    std::uint64_t rng_seed = 0;
};

// Predicted half-period band height in scan lines: n / T / (2 f).
double band_width(const CameraModel& camera, double frequency_hz);

// Square wave evaluation: amplitude while frac((t - phase) * f) < duty,
// else 0. Periodic for all t, including negative arguments.
double sample_wave(const SquareWave& wave, double t);

// Homography taking marker-plane coordinates (meters, x right, y down,
// origin at the panel center) to image pixels, normalized to h(2,2) = 1.
// Throws DegeneratePose when a panel corner would project behind the
// camera.
Mat3 marker_homography(const CameraModel& camera, const ScenePose& pose);

// The four panel corners (TL, TR, BR, BL in marker coordinates) projected
// into the image. Same math as marker_homography applied corner by corner.
std::array<Vec2, 4> project_corners(const CameraModel& camera, const ScenePose& pose);

// Renders one rolling-shutter capture of the blinking panel. Pixel (u,v)
// samples the panel at time t0 + v*T/n, so temporal blinking shows up as
// horizontal bands. Pixels straddling the panel silhouette integrate
// their partial coverage, like a physical sensor; the resulting gray ramp
// is what makes sub-pixel quad refinement possible downstream.
// Deterministic for identical inputs.
Frame render_frame(const CameraModel& camera, const ScenePose& pose,
                   const BlinkAssignment& panel, double t0, const NoiseModel& noise);

}  // namespace blinktag
