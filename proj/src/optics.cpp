#include "blinktag/optics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blinktag/errors.hpp"
#include "blinktag/rng.hpp"

namespace blinktag {

double band_width(const CameraModel& camera, double frequency_hz) {
    return camera.height / camera.frame_scan_time / (2.0 * frequency_hz);
}

double sample_wave(const SquareWave& wave, double t) {
    double cycles = (t - wave.phase) * wave.frequency;
    double frac = cycles - std::floor(cycles);
    return frac < wave.duty ? wave.amplitude : 0.0;
}

namespace {

constexpr double kDegToRad = 0.017453292519943295;

// marker -> camera rotation: in-plane roll about the panel normal, then
// yaw about the marker's vertical (y) axis.
Mat3 pose_rotation(const ScenePose& pose) {
    const double cy = std::cos(pose.yaw_deg * kDegToRad);
    const double sy = std::sin(pose.yaw_deg * kDegToRad);
    const double cr = std::cos(pose.roll_deg * kDegToRad);
    const double sr = std::sin(pose.roll_deg * kDegToRad);
    Mat3 yaw, roll;
    yaw << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
    roll << cr, -sr, 0, sr, cr, 0, 0, 0, 1;
    return yaw * roll;
}

std::array<Vec2, 4> marker_corners_2d(double side) {
    const double h = side / 2.0;
    return {Vec2{-h, -h}, Vec2{h, -h}, Vec2{h, h}, Vec2{-h, h}};  // TL TR BR BL
}

void validate_pose(const ScenePose& pose) {
    if (pose.distance <= 0.0) throw ConfigError("pose distance must be > 0");
    if (std::abs(pose.yaw_deg) >= 90.0) throw ConfigError("|yaw| must be < 90 degrees");
    if (pose.marker_side <= 0.0) throw ConfigError("marker_side must be > 0");
}

}  // namespace

Mat3 marker_homography(const CameraModel& camera, const ScenePose& pose) {
    validate_pose(pose);
    const Mat3 r = pose_rotation(pose);
    const Vec3 t(0.0, 0.0, pose.distance);

    for (const auto& c : marker_corners_2d(pose.marker_side)) {
        const Vec3 cam = r * Vec3(c.x(), c.y(), 0.0) + t;
        if (cam.z() <= 0.0) throw DegeneratePose("marker corner behind the camera");
    }

    Mat3 rt;
    rt.col(0) = r.col(0);
    rt.col(1) = r.col(1);
    rt.col(2) = t;
    Mat3 h = camera.intrinsics() * rt;
    return h / h(2, 2);
}

std::array<Vec2, 4> project_corners(const CameraModel& camera, const ScenePose& pose) {
    validate_pose(pose);
    const Mat3 r = pose_rotation(pose);
    const Vec3 t(0.0, 0.0, pose.distance);

    std::array<Vec2, 4> out;
    int i = 0;
    for (const auto& c : marker_corners_2d(pose.marker_side)) {
        const Vec3 cam = r * Vec3(c.x(), c.y(), 0.0) + t;
        if (cam.z() <= 0.0) throw DegeneratePose("marker corner behind the camera");
        out[i++] = Vec2(camera.fx * cam.x() / cam.z() + camera.cx,
                        camera.fy * cam.y() / cam.z() + camera.cy);
    }
    return out;
}

namespace {

// Separable Gaussian blur, sigma in pixels, replicated edges. Only the
// rectangle [rx0,rx1]x[ry0,ry1] padded by the kernel half-width is
// touched; since everything outside it is zero before the blur, the
// result is identical to a full-frame pass.
void gaussian_blur(std::vector<float>& img, int width, int height, double sigma, int rx0,
                   int ry0, int rx1, int ry1) {
    const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(2 * half + 1);
    float sum = 0.0f;
    for (int i = -half; i <= half; ++i) {
        kernel[i + half] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
        sum += kernel[i + half];
    }
    for (auto& k : kernel) k /= sum;

    rx0 = std::clamp(rx0 - half, 0, width - 1);
    rx1 = std::clamp(rx1 + half, 0, width - 1);
    ry0 = std::clamp(ry0 - half, 0, height - 1);
    ry1 = std::clamp(ry1 + half, 0, height - 1);

    std::vector<float> tmp(img.size(), 0.0f);
    for (int y = ry0; y <= ry1; ++y)
        for (int x = rx0; x <= rx1; ++x) {
            float acc = 0.0f;
            for (int i = -half; i <= half; ++i) {
                int xi = std::clamp(x + i, 0, width - 1);
                acc += kernel[i + half] * img[y * width + xi];
            }
            tmp[y * width + x] = acc;
        }
    for (int y = ry0; y <= ry1; ++y)
        for (int x = rx0; x <= rx1; ++x) {
            float acc = 0.0f;
            for (int i = -half; i <= half; ++i) {
                int yi = std::clamp(y + i, 0, height - 1);
                acc += kernel[i + half] * tmp[yi * width + x];
            }
            img[y * width + x] = acc;
        }
}

// Fraction of the unit pixel footprint centered on p that lies inside the
// convex silhouette quad: Sutherland-Hodgman clip of the pixel square
// against the quad's inward half-planes, then the shoelace area.
double pixel_coverage(const Vec2& p, const std::array<Vec2, 4>& edge_n,
                      const std::array<double, 4>& edge_c) {
    std::array<Vec2, 12> poly{Vec2(p.x() - 0.5, p.y() - 0.5), Vec2(p.x() + 0.5, p.y() - 0.5),
                              Vec2(p.x() + 0.5, p.y() + 0.5), Vec2(p.x() - 0.5, p.y() + 0.5)};
    int count = 4;
    std::array<Vec2, 12> next;
    for (int k = 0; k < 4; ++k) {
        int m = 0;
        for (int i = 0; i < count; ++i) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % count];
            const double da = edge_n[k].dot(a) - edge_c[k];
            const double db = edge_n[k].dot(b) - edge_c[k];
            if (da >= 0.0) next[m++] = a;
            if ((da >= 0.0) != (db >= 0.0)) next[m++] = a + (b - a) * (da / (da - db));
        }
        count = m;
        if (count == 0) return 0.0;
        poly = next;
    }
    double area = 0.0;
    for (int i = 0; i < count; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % count];
        area += a.x() * b.y() - b.x() * a.y();
    }
    return std::abs(0.5 * area);
}

}  // namespace

Frame render_frame(const CameraModel& camera, const ScenePose& pose,
                   const BlinkAssignment& panel, double t0, const NoiseModel& noise) {
    if (panel.grid_size < 1) throw ConfigError("panel has no cells");

    const Mat3 h = marker_homography(camera, pose);
    const Mat3 h_inv = h.inverse();
    const Mat3 r = pose_rotation(pose);
    const Vec3 normal = r.col(2);
    const auto corners = project_corners(camera, pose);

    // Inward unit normals of the silhouette edges; a point q is inside
    // the projected panel iff edge_n[i].q >= edge_c[i] for all i. Pixels
    // near the silhouette integrate partial coverage like a real sensor;
    // interior pixels stay point-sampled (band edges are temporal, not
    // spatial, so they gain nothing from area sampling).
    std::array<Vec2, 4> edge_n;
    std::array<double, 4> edge_c;
    {
        Vec2 centroid(0.0, 0.0);
        for (const auto& c : corners) centroid += c;
        centroid /= 4.0;
        for (int i = 0; i < 4; ++i) {
            const Vec2& a = corners[i];
            const Vec2& b = corners[(i + 1) % 4];
            Vec2 n(-(b - a).y(), (b - a).x());
            n.normalize();
            if (n.dot(centroid - a) < 0.0) n = -n;
            edge_n[i] = n;
            edge_c[i] = n.dot(a);
        }
    }

    // Scan only the projected bounding box; everything else stays dark.
    double min_u = corners[0].x(), max_u = corners[0].x();
    double min_v = corners[0].y(), max_v = corners[0].y();
    for (const auto& c : corners) {
        min_u = std::min(min_u, c.x());
        max_u = std::max(max_u, c.x());
        min_v = std::min(min_v, c.y());
        max_v = std::max(max_v, c.y());
    }
    const int u0 = std::clamp(static_cast<int>(std::floor(min_u)) - 1, 0, camera.width - 1);
    const int u1 = std::clamp(static_cast<int>(std::ceil(max_u)) + 1, 0, camera.width - 1);
    const int v0 = std::clamp(static_cast<int>(std::floor(min_v)) - 1, 0, camera.height - 1);
    const int v1 = std::clamp(static_cast<int>(std::ceil(max_v)) + 1, 0, camera.height - 1);

    const double half_side = pose.marker_side / 2.0;
    const double cell_size = pose.marker_side / panel.grid_size;
    const double line_dt = camera.line_period();

    std::vector<float> img(static_cast<std::size_t>(camera.width) * camera.height, 0.0f);
    for (int v = v0; v <= v1; ++v) {
        const double t_row = t0 + v * line_dt;
        for (int u = u0; u <= u1; ++u) {
            const Vec2 pix(u, v);
            double d_min = std::numeric_limits<double>::max();
            for (int i = 0; i < 4; ++i) d_min = std::min(d_min, edge_n[i].dot(pix) - edge_c[i]);
            if (d_min <= -0.75) continue;  // footprint fully outside
            double coverage = 1.0;
            if (d_min < 0.75) {  // footprint straddles the silhouette
                coverage = pixel_coverage(pix, edge_n, edge_c);
                if (coverage <= 0.0) continue;
            }
            const Vec2 p = apply_homography(h_inv, pix);
            int col = std::clamp(static_cast<int>((p.x() + half_side) / cell_size), 0,
                                 panel.grid_size - 1);
            int row = std::clamp(static_cast<int>((p.y() + half_side) / cell_size), 0,
                                 panel.grid_size - 1);
            double lum = coverage * sample_wave(panel.at(row, col), t_row);
            if (lum > 0.0 && noise.directivity > 0.0) {
                Vec3 ray((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
                double c = ray.normalized().dot(normal);
                lum *= c > 0.0 ? std::pow(c, noise.directivity) : 0.0;
            }
            img[v * camera.width + u] = static_cast<float>(255.0 * lum);
        }
    }

    if (noise.blur_radius > 0.0)
        gaussian_blur(img, camera.width, camera.height, noise.blur_radius, u0, v0, u1, v1);

    Frame frame{camera.width, camera.height,
                std::vector<std::uint8_t>(img.size(), 0)};
    if (noise.gaussian_sigma > 0.0) {
        Rng rng(noise.rng_seed);
        for (std::size_t i = 0; i < img.size(); ++i) {
            double val = img[i] + noise.ambient + rng.normal(0.0, noise.gaussian_sigma);
            frame.pixels[i] =
                static_cast<std::uint8_t>(std::clamp(val + 0.5, 0.0, 255.0));
        }
    } else {
        for (std::size_t i = 0; i < img.size(); ++i) {
            double val = img[i] + noise.ambient;
            frame.pixels[i] =
                static_cast<std::uint8_t>(std::clamp(val + 0.5, 0.0, 255.0));
        }
    }
    return frame;
}

}  // namespace blinktag
