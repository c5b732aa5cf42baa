#include "blinktag/detector.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "blinktag/errors.hpp"
#include "blinktag/image_io.hpp"

namespace blinktag {

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::binarize: return "binarize";
        case Stage::close: return "close";
        case Stage::find_quad: return "find_quad";
        case Stage::measure_cells: return "measure_cells";
        case Stage::reconstruct: return "reconstruct";
        case Stage::decode: return "decode";
    }
    return "?";
}

int CellClassGrid::count(CellClass c) const {
    return static_cast<int>(std::count(classes.begin(), classes.end(), c));
}

// ---------------------------------------------------------------- binarize

int otsu_level(const Frame& frame) {
    std::array<long long, 256> hist{};
    for (auto p : frame.pixels) ++hist[p];

    const long long total = static_cast<long long>(frame.pixels.size());
    long long weighted_sum = 0;
    for (int i = 0; i < 256; ++i) weighted_sum += static_cast<long long>(i) * hist[i];

    int populated = 0;
    for (int i = 0; i < 256; ++i) populated += hist[i] > 0;
    if (populated <= 1) return 128;  // flat histogram, Otsu undefined

    // Maximize between-class variance over splits (<= k | > k).
    double best = -1.0;
    int best_k = 0;
    long long w0 = 0, sum0 = 0;
    for (int k = 0; k < 255; ++k) {
        w0 += hist[k];
        sum0 += static_cast<long long>(k) * hist[k];
        const long long w1 = total - w0;
        if (w0 == 0 || w1 == 0) continue;
        const double m0 = static_cast<double>(sum0) / w0;
        const double m1 = static_cast<double>(weighted_sum - sum0) / w1;
        const double var = static_cast<double>(w0) * static_cast<double>(w1) * (m0 - m1) * (m0 - m1);
        if (var > best) {
            best = var;
            best_k = k;
        }
    }
    return best_k + 1;  // pixels >= level are foreground
}

namespace {

int threshold_level(const Frame& frame, const Threshold& t) {
    return t.kind == Threshold::Kind::otsu ? otsu_level(frame) : t.level;
}

}  // namespace

BinaryImage binarize(const Frame& frame, const Threshold& threshold) {
    const int level = threshold_level(frame, threshold);
    BinaryImage out{frame.width, frame.height,
                    std::vector<std::uint8_t>(frame.pixels.size(), 0)};
    for (std::size_t i = 0; i < frame.pixels.size(); ++i)
        out.bits[i] = frame.pixels[i] >= level;
    return out;
}

// ----------------------------------------------------------- close_vertical

BinaryImage close_vertical(const BinaryImage& b, int run) {
    if (run < 1) throw ConfigError("closing run must be >= 1");
    if (run == 1) return b;

    const int reach_up = (run - 1) / 2;
    const int reach_down = run - 1 - reach_up;
    const int h = b.height;

    BinaryImage out{b.width, b.height, std::vector<std::uint8_t>(b.bits.size(), 0)};
    std::vector<std::pair<int, int>> runs;  // inclusive [start, end] per column
    for (int x = 0; x < b.width; ++x) {
        runs.clear();
        for (int y = 0; y < h; ++y) {
            if (!b.at(x, y)) continue;
            int start = y;
            while (y + 1 < h && b.at(x, y + 1)) ++y;
            runs.emplace_back(start, y);
        }
        if (runs.empty()) continue;

        // dilate, merging runs that come to overlap
        std::vector<std::pair<int, int>> dilated;
        for (auto [s, e] : runs) {
            int ds = std::max(0, s - reach_up);
            int de = std::min(h - 1, e + reach_down);
            if (!dilated.empty() && ds <= dilated.back().second + 1)
                dilated.back().second = std::max(dilated.back().second, de);
            else
                dilated.emplace_back(ds, de);
        }
        // erode; windows are clipped at the image border
        for (auto [s, e] : dilated) {
            int lo = s == 0 ? 0 : s + reach_up;
            int hi = e == h - 1 ? h - 1 : e - reach_down;
            for (int y = lo; y <= hi; ++y) out.set(x, y, true);
        }
    }
    return out;
}

// -------------------------------------------------------------- find_quad

namespace {

struct Pix {
    int x, y;
};

// clockwise 8-neighborhood as drawn (y down)
constexpr std::array<Pix, 8> kDirs = {
    Pix{1, 0}, Pix{1, 1}, Pix{0, 1}, Pix{-1, 1},
    Pix{-1, 0}, Pix{-1, -1}, Pix{0, -1}, Pix{1, -1}};

int dir_between(const Pix& from, const Pix& to) {
    const int dx = to.x - from.x, dy = to.y - from.y;
    for (int d = 0; d < 8; ++d)
        if (kDirs[d].x == dx && kDirs[d].y == dy) return d;
    return -1;
}

// Labels 8-connected components; returns (labels, area per label).
std::pair<std::vector<int>, std::vector<long long>> label_components(const BinaryImage& b) {
    std::vector<int> labels(b.bits.size(), -1);
    std::vector<long long> areas;
    std::vector<int> stack;
    for (int y = 0; y < b.height; ++y)
        for (int x = 0; x < b.width; ++x) {
            const int idx = y * b.width + x;
            if (!b.bits[idx] || labels[idx] >= 0) continue;
            const int lab = static_cast<int>(areas.size());
            areas.push_back(0);
            stack.clear();
            stack.push_back(idx);
            labels[idx] = lab;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                ++areas[lab];
                const int cx = cur % b.width, cy = cur / b.width;
                for (const auto& d : kDirs) {
                    const int nx = cx + d.x, ny = cy + d.y;
                    if (nx < 0 || ny < 0 || nx >= b.width || ny >= b.height) continue;
                    const int nidx = ny * b.width + nx;
                    if (b.bits[nidx] && labels[nidx] < 0) {
                        labels[nidx] = lab;
                        stack.push_back(nidx);
                    }
                }
            }
        }
    return {std::move(labels), std::move(areas)};
}

// Moore-neighbor tracing with backtracking, clockwise, starting from the
// component's topmost-leftmost pixel.
std::vector<Vec2> trace_outer_contour(const BinaryImage& b, const std::vector<int>& labels,
                                      int target, long long area) {
    Pix start{-1, -1};
    for (int y = 0; y < b.height && start.x < 0; ++y)
        for (int x = 0; x < b.width; ++x)
            if (labels[y * b.width + x] == target) {
                start = {x, y};
                break;
            }

    auto is_target = [&](const Pix& p) {
        return p.x >= 0 && p.y >= 0 && p.x < b.width && p.y < b.height &&
               labels[p.y * b.width + p.x] == target;
    };

    std::vector<Vec2> contour;
    contour.emplace_back(start.x, start.y);

    Pix cur = start;
    int back_dir = 4;  // W neighbor of the start pixel is always background
    const int init_back = back_dir;
    const long long max_steps = 4 * (area + 8);
    for (long long step = 0; step < max_steps; ++step) {
        int found = -1;
        for (int k = 1; k <= 8; ++k) {
            const int d = (back_dir + k) % 8;
            const Pix n{cur.x + kDirs[d].x, cur.y + kDirs[d].y};
            if (is_target(n)) {
                found = k;
                break;
            }
        }
        if (found < 0) break;  // isolated pixel

        const int d = (back_dir + found) % 8;
        const int before = (back_dir + found - 1) % 8;
        const Pix next{cur.x + kDirs[d].x, cur.y + kDirs[d].y};
        const Pix checked{cur.x + kDirs[before].x, cur.y + kDirs[before].y};
        const int nb = dir_between(next, checked);
        cur = next;
        back_dir = nb < 0 ? (d + 4) % 8 : nb;
        if (cur.x == start.x && cur.y == start.y && back_dir == init_back) break;
        contour.emplace_back(cur.x, cur.y);
    }
    return contour;
}

double point_line_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len = ab.norm();
    if (len < 1e-12) return (p - a).norm();
    return std::abs(ab.x() * (p.y() - a.y()) - ab.y() * (p.x() - a.x())) / len;
}

void douglas_peucker(const std::vector<Vec2>& pts, std::size_t lo, std::size_t hi, double tol,
                     std::vector<std::size_t>& keep) {
    if (hi <= lo + 1) return;
    double max_d = -1.0;
    std::size_t max_i = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
        const double d = point_line_distance(pts[i], pts[lo], pts[hi]);
        if (d > max_d) {
            max_d = d;
            max_i = i;
        }
    }
    if (max_d > tol) {
        douglas_peucker(pts, lo, max_i, tol, keep);
        keep.push_back(max_i);
        douglas_peucker(pts, max_i, hi, tol, keep);
    }
}

// Simplify a closed contour. The recursion never drops its anchors, so
// they must sit on true corners: the contour is rebased to start at the
// point farthest from the centroid (always a hull vertex for convex
// blobs) and the second anchor is the point farthest from the first.
// Any anchor that still lands mid-edge is removed by a final collinear
// pruning pass.
std::vector<Vec2> simplify_closed(std::vector<Vec2> contour, double tol) {
    const std::size_t n = contour.size();
    if (n < 3) return contour;

    Vec2 centroid(0.0, 0.0);
    for (const auto& p : contour) centroid += p;
    centroid /= static_cast<double>(n);
    std::size_t start = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (contour[i] - centroid).squaredNorm();
        if (d > best) {
            best = d;
            start = i;
        }
    }
    std::rotate(contour.begin(), contour.begin() + start, contour.end());

    std::size_t far = 0;
    best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (contour[i] - contour[0]).squaredNorm();
        if (d > best) {
            best = d;
            far = i;
        }
    }
    if (far == 0) return {contour[0]};

    std::vector<std::size_t> keep;
    keep.push_back(0);
    douglas_peucker(contour, 0, far, tol, keep);
    keep.push_back(far);
    // second half wraps around; operate on a rotated copy
    std::vector<Vec2> second(contour.begin() + far, contour.end());
    second.push_back(contour[0]);
    std::vector<std::size_t> keep2;
    douglas_peucker(second, 0, second.size() - 1, tol, keep2);

    std::vector<Vec2> out;
    for (auto i : keep) out.push_back(contour[i]);
    for (auto i : keep2) out.push_back(second[i]);

    // drop vertices within tol of the chord joining their neighbors
    while (out.size() > 3) {
        double min_d = tol + 1.0;
        std::size_t min_i = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const Vec2& prev = out[(i + out.size() - 1) % out.size()];
            const Vec2& next = out[(i + 1) % out.size()];
            const double d = point_line_distance(out[i], prev, next);
            if (d < min_d) {
                min_d = d;
                min_i = i;
            }
        }
        if (min_d > tol) break;
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(min_i));
    }
    return out;
}

double shoelace_area(const std::array<Vec2, 4>& c) {
    double a = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Vec2& p = c[i];
        const Vec2& q = c[(i + 1) % 4];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;  // positive = clockwise as drawn (y down)
}

// Contour vertices are pixel centers, but a lit pixel's footprint
// reaches half a pixel further out; a quad through the centers is a full
// pixel short per axis. Push every edge outward by `r` and re-intersect.
std::array<Vec2, 4> outset_quad(const std::array<Vec2, 4>& c, double r) {
    const double sign = shoelace_area(c) > 0.0 ? 1.0 : -1.0;
    std::array<Vec2, 4> out;
    for (int i = 0; i < 4; ++i) {
        const Vec2& a = c[(i + 3) % 4];
        const Vec2& b = c[i];
        const Vec2& d = c[(i + 1) % 4];
        const Vec2 e1 = (b - a).normalized();
        const Vec2 e2 = (d - b).normalized();
        // outward normal of a clockwise polygon (y down): (ey, -ex)
        const Vec2 n1 = sign * Vec2(e1.y(), -e1.x());
        const Vec2 n2 = sign * Vec2(e2.y(), -e2.x());
        const Vec2 p1 = a + r * n1;
        const Vec2 p2 = b + r * n2;
        const double cross = e1.x() * e2.y() - e1.y() * e2.x();
        if (std::abs(cross) < 1e-9) {
            out[i] = b + r * n1;
            continue;
        }
        const double t = ((p2 - p1).x() * e2.y() - (p2 - p1).y() * e2.x()) / cross;
        out[i] = p1 + t * e1;
    }
    return out;
}

struct FitLine {
    Vec2 point;
    Vec2 dir;
};

// Total-least-squares line: mean point plus the principal axis of the
// 2x2 scatter matrix. pts must hold at least two distinct points.
FitLine fit_line_tls(const std::vector<Vec2>& pts) {
    Vec2 mean(0.0, 0.0);
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& p : pts) {
        const Vec2 q = p - mean;
        sxx += q.x() * q.x();
        sxy += q.x() * q.y();
        syy += q.y() * q.y();
    }
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double l1 = 0.5 * tr + std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
    Vec2 axis;
    if (std::abs(sxy) > 1e-12)
        axis = Vec2(l1 - syy, sxy).normalized();
    else
        axis = sxx >= syy ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0);
    return {mean, axis};
}

bool intersect_lines(const FitLine& l1, const FitLine& l2, Vec2& out) {
    const double cross = l1.dir.x() * l2.dir.y() - l1.dir.y() * l2.dir.x();
    if (std::abs(cross) < 1e-6) return false;
    const Vec2 rhs = l2.point - l1.point;
    const double t = (rhs.x() * l2.dir.y() - rhs.y() * l2.dir.x()) / cross;
    out = l1.point + t * l1.dir;
    return true;
}

// Sub-pixel corner refinement on the binary contour. Simplified corners
// are single contour pixels and carry up to half a pixel of quantization
// each, which the homography decomposition amplifies badly once the quad
// is small. A total-least-squares line fitted to the contour points
// backing each edge averages the staircase away; adjacent fitted lines
// intersect in the refined corner. Points near the corners (where the
// staircase bends) and points off the initial edge (ragged run-in from
// the closing step) stay out of the fit; an edge with too little support
// keeps its initial line.
std::array<Vec2, 4> refine_corners(const std::vector<Vec2>& contour,
                                   const std::array<Vec2, 4>& corners) {
    std::array<FitLine, 4> lines;
    for (int i = 0; i < 4; ++i) {
        const Vec2& a = corners[i];
        const Vec2& b = corners[(i + 1) % 4];
        const double len = (b - a).norm();
        const Vec2 dir = len > 1e-9 ? Vec2((b - a) / len) : Vec2(1.0, 0.0);
        lines[i] = {a, dir};
        if (len < 8.0) continue;

        std::vector<Vec2> pts;
        for (const auto& p : contour) {
            const double along = (p - a).dot(dir);
            if (along < 3.0 || along > len - 3.0) continue;
            const Vec2 foot = a + along * dir;
            if ((p - foot).norm() > 1.5) continue;
            pts.push_back(p);
        }
        if (pts.size() < 8) continue;
        lines[i] = fit_line_tls(pts);
    }

    std::array<Vec2, 4> out = corners;
    for (int i = 0; i < 4; ++i) {
        Vec2 corner;
        if (intersect_lines(lines[(i + 3) % 4], lines[i], corner)) out[i] = corner;
    }
    return out;
}

bool is_strictly_convex(const std::array<Vec2, 4>& c) {
    int sign = 0;
    for (int i = 0; i < 4; ++i) {
        const Vec2 e1 = c[(i + 1) % 4] - c[i];
        const Vec2 e2 = c[(i + 2) % 4] - c[(i + 1) % 4];
        const double cross = e1.x() * e2.y() - e1.y() * e2.x();
        if (std::abs(cross) < 1e-9) return false;
        const int s = cross > 0 ? 1 : -1;
        if (sign == 0)
            sign = s;
        else if (s != sign)
            return false;
    }
    return true;
}

}  // namespace

Quad find_quad(const BinaryImage& b, double min_area) {
    auto [labels, areas] = label_components(b);
    int best = -1;
    long long best_area = 0;
    for (std::size_t i = 0; i < areas.size(); ++i)
        if (areas[i] > best_area) {
            best_area = areas[i];
            best = static_cast<int>(i);
        }
    if (best < 0 || best_area < static_cast<long long>(min_area))
        throw NoQuad("no component with area >= " + std::to_string(min_area));

    const auto contour = trace_outer_contour(b, labels, best, best_area);
    if (contour.size() < 4) throw NoQuad("contour too short");

    double perimeter = 0.0;
    for (std::size_t i = 0; i < contour.size(); ++i)
        perimeter += (contour[(i + 1) % contour.size()] - contour[i]).norm();

    const auto simplified = simplify_closed(contour, 0.02 * perimeter);
    if (simplified.size() != 4)
        throw NoQuad("simplification yielded " + std::to_string(simplified.size()) +
                     " vertices, expected 4");

    std::array<Vec2, 4> corners{simplified[0], simplified[1], simplified[2], simplified[3]};
    if (!is_strictly_convex(corners)) throw NoQuad("simplified polygon is not convex");
    if (std::abs(shoelace_area(corners)) < min_area)
        throw NoQuad("quad area below min_area");

    const auto refined = refine_corners(contour, corners);
    if (is_strictly_convex(refined)) corners = refined;

    // clockwise as drawn, starting at the corner with the smallest x + y
    if (shoelace_area(corners) < 0.0) std::swap(corners[1], corners[3]);
    int start = 0;
    double best_sum = std::numeric_limits<double>::max();
    for (int i = 0; i < 4; ++i) {
        const double s = corners[i].x() + corners[i].y();
        if (s < best_sum) {
            best_sum = s;
            start = i;
        }
    }
    std::rotate(corners.begin(), corners.begin() + start, corners.end());
    return Quad{outset_quad(corners, 0.5)};
}

namespace {

// Bilinear gray lookup; negative when the neighborhood leaves the frame.
double sample_gray(const Frame& f, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    if (x0 < 0 || y0 < 0 || x0 + 1 >= f.width || y0 + 1 >= f.height) return -1.0;
    const double fx = x - x0;
    const double fy = y - y0;
    return (1.0 - fx) * (1.0 - fy) * f.at(x0, y0) + fx * (1.0 - fy) * f.at(x0 + 1, y0) +
           (1.0 - fx) * fy * f.at(x0, y0 + 1) + fx * fy * f.at(x0 + 1, y0 + 1);
}

}  // namespace

Quad refine_quad(const Frame& frame, const Quad& quad) {
    // Profile samples sit 1 px apart along the inward normal, so sample i
    // stands for a unit strip of the transition. Summing the normalized
    // strip brightness M gives the edge offset directly (e = half + 0.5 -
    // M): the moment estimator is exact for a coverage ramp at unit
    // sampling (a mid-level crossing of the interpolated profile is not;
    // its S-shaped bias tilts the fitted line) and it stays exact under
    // symmetric blur.
    constexpr int kProfileHalf = 4;          // px each side of the edge
    constexpr int kSamples = 2 * kProfileHalf + 1;
    constexpr double kMinContrast = 30.0;    // gray levels across the ramp
    constexpr double kMaxOffset = 2.5;       // px; beyond this the window missed
    constexpr double kTrimPx = 0.75;         // residual cut before the refit
    constexpr std::size_t kMinCrossings = 8;
    constexpr double kMaxCornerShift = 3.5;  // px; larger moves mean a bogus fit

    Vec2 centroid(0.0, 0.0);
    for (const auto& c : quad.corners) centroid += c;
    centroid /= 4.0;

    std::array<FitLine, 4> lines;
    for (int i = 0; i < 4; ++i) {
        const Vec2& a = quad.corners[i];
        const Vec2& b = quad.corners[(i + 1) % 4];
        const double len = (b - a).norm();
        const Vec2 dir = len > 1e-9 ? Vec2((b - a) / len) : Vec2(1.0, 0.0);
        lines[i] = {a, dir};
        if (len < 8.0) continue;
        Vec2 inward(-dir.y(), dir.x());
        if (inward.dot(centroid - a) < 0.0) inward = -inward;

        std::vector<Vec2> crossings;
        for (double t = 3.0; t <= len - 3.0; t += 1.0) {
            const Vec2 base = a + t * dir;
            double prof[kSamples];
            bool in_frame = true;
            for (int s = 0; s < kSamples && in_frame; ++s) {
                const double off = static_cast<double>(s - kProfileHalf);
                prof[s] = sample_gray(frame, base.x() + off * inward.x(),
                                      base.y() + off * inward.y());
                in_frame = prof[s] >= 0.0;
            }
            if (!in_frame) continue;
            const double out_level = 0.5 * (prof[0] + prof[1]);
            const double in_level = 0.5 * (prof[kSamples - 2] + prof[kSamples - 1]);
            const double contrast = in_level - out_level;
            if (contrast < kMinContrast) continue;
            double mass = 0.0;
            for (int s = 0; s < kSamples; ++s)
                mass += std::clamp((prof[s] - out_level) / contrast, 0.0, 1.0);
            const double off = kProfileHalf + 0.5 - mass;
            if (std::abs(off) > kMaxOffset) continue;
            crossings.push_back(base + off * inward);
        }
        if (crossings.size() < kMinCrossings) continue;

        FitLine fit = fit_line_tls(crossings);
        std::vector<Vec2> kept;
        for (const auto& p : crossings) {
            const Vec2 q = p - fit.point;
            const double residual = std::abs(q.x() * fit.dir.y() - q.y() * fit.dir.x());
            if (residual <= kTrimPx) kept.push_back(p);
        }
        if (kept.size() >= kMinCrossings) fit = fit_line_tls(kept);
        lines[i] = fit;
    }

    std::array<Vec2, 4> out = quad.corners;
    for (int i = 0; i < 4; ++i) {
        Vec2 corner;
        if (intersect_lines(lines[(i + 3) % 4], lines[i], corner)) out[i] = corner;
    }
    if (!is_strictly_convex(out)) return quad;
    for (int i = 0; i < 4; ++i)
        if ((out[i] - quad.corners[i]).norm() > kMaxCornerShift) return quad;
    return Quad{out};
}

// ----------------------------------------------------------- measure_cells

namespace {

// Vertical span of a convex polygon cut at column x = u.
bool column_span(const std::array<Vec2, 4>& poly, double u, double& v_lo, double& v_hi) {
    v_lo = std::numeric_limits<double>::max();
    v_hi = std::numeric_limits<double>::lowest();
    bool any = false;
    for (int i = 0; i < 4; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % 4];
        const double dx = b.x() - a.x();
        if (std::abs(dx) < 1e-12) {
            if (std::abs(a.x() - u) < 1e-9) {
                v_lo = std::min({v_lo, a.y(), b.y()});
                v_hi = std::max({v_hi, a.y(), b.y()});
                any = true;
            }
            continue;
        }
        const double s = (u - a.x()) / dx;
        if (s < 0.0 || s > 1.0) continue;
        const double v = a.y() + s * (b.y() - a.y());
        v_lo = std::min(v_lo, v);
        v_hi = std::max(v_hi, v);
        any = true;
    }
    return any && v_hi > v_lo;
}

struct CellEvidence {
    std::vector<double> complete_runs;  // bright and dark, strictly interior
    int max_transitions = 0;            // per sampled column
    double span_lines = 0.0;            // tallest sampled column span
};

CellEvidence gather_cell_evidence(const Frame& frame, const Mat3& grid_to_image, int level,
                                  double gx0, double gy0, double gx1, double gy1,
                                  double min_run) {
    const std::array<Vec2, 4> poly = {
        apply_homography(grid_to_image, {gx0, gy0}), apply_homography(grid_to_image, {gx1, gy0}),
        apply_homography(grid_to_image, {gx1, gy1}), apply_homography(grid_to_image, {gx0, gy1})};

    double min_u = poly[0].x(), max_u = poly[0].x();
    for (const auto& p : poly) {
        min_u = std::min(min_u, p.x());
        max_u = std::max(max_u, p.x());
    }

    CellEvidence ev;
    for (int u = static_cast<int>(std::ceil(min_u)); u <= static_cast<int>(std::floor(max_u));
         ++u) {
        if (u < 0 || u >= frame.width) continue;
        double v_lo, v_hi;
        if (!column_span(poly, u, v_lo, v_hi)) continue;
        const int y0 = std::max(0, static_cast<int>(std::ceil(v_lo)));
        const int y1 = std::min(frame.height - 1, static_cast<int>(std::floor(v_hi)));
        if (y1 - y0 < 2) continue;
        ev.span_lines = std::max(ev.span_lines, static_cast<double>(y1 - y0 + 1));

        int transitions = 0;
        int run_start = y0;
        bool run_val = frame.at(u, y0) >= level;
        bool first_run = true;
        bool prev = run_val;
        for (int y = y0 + 1; y <= y1 + 1; ++y) {
            const bool val = y <= y1 ? frame.at(u, y) >= level : !prev;  // sentinel flush
            if (val == prev && y <= y1) continue;
            if (y <= y1) ++transitions;
            // run [run_start, y-1] of value prev ends here; it is complete
            // only when bounded by opposite samples inside the span.
            const bool touches_start = first_run;
            const bool touches_end = y > y1;
            const double len = y - run_start;
            if (!touches_start && !touches_end && len >= min_run)
                ev.complete_runs.push_back(len);
            run_start = y;
            first_run = false;
            prev = val;
        }
        ev.max_transitions = std::max(ev.max_transitions, transitions);
    }
    return ev;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

CellClassGrid measure_cells(const Frame& frame, const Quad& quad, int grid_size,
                            const Threshold& threshold, const CellMeasureParams& params) {
    if (grid_size < 1) throw ConfigError("grid_size must be >= 1");
    const double g = grid_size;
    const Mat3 grid_to_image = dlt_4pt(
        {Vec2{0, 0}, Vec2{g, 0}, Vec2{g, g}, Vec2{0, g}},
        quad.corners);

    const int level = threshold_level(frame, threshold);
    const double inset_x = (1.0 - params.window_fraction) / 2.0;
    const double inset_y = 0.04;  // dodge blur bleed across the cell boundary

    double min_run = 2.0;
    if (params.expected_widths)
        min_run = std::max(2.0, std::floor(params.expected_widths->second / 3.0));

    CellClassGrid grid{grid_size,
                       std::vector<CellClass>(grid_size * grid_size, CellClass::Unknown),
                       std::vector<double>(grid_size * grid_size,
                                           std::numeric_limits<double>::quiet_NaN())};

    std::vector<CellEvidence> evidence(grid_size * grid_size);
    for (int r = 0; r < grid_size; ++r)
        for (int c = 0; c < grid_size; ++c)
            evidence[r * grid_size + c] = gather_cell_evidence(
                frame, grid_to_image, level, c + inset_x, r + inset_y, c + 1 - inset_x,
                r + 1 - inset_y, min_run);

    if (params.expected_widths) {
        const double w_low = params.expected_widths->first;
        const double w_high = params.expected_widths->second;
        const double split = std::sqrt(w_low * w_high);
        // A high-frequency cell spanning this many lines cannot fail to
        // produce complete bands, so absence of them implies the low class.
        const double low_by_elimination_span = 3.0 * w_high + 2.0;
        for (std::size_t i = 0; i < evidence.size(); ++i) {
            const auto& ev = evidence[i];
            if (ev.complete_runs.size() >= 2) {
                const double m = median_of(ev.complete_runs);
                grid.widths[i] = m;
                grid.classes[i] = m >= split ? CellClass::Low : CellClass::High;
            } else if (ev.span_lines >= low_by_elimination_span) {
                grid.classes[i] = CellClass::Low;
                if (!ev.complete_runs.empty()) grid.widths[i] = ev.complete_runs.front();
            }
        }
    } else {
        // 2-means over the measured widths; valid only when the clusters
        // actually separate.
        std::vector<double> medians(evidence.size(),
                                    std::numeric_limits<double>::quiet_NaN());
        std::vector<double> values;
        for (std::size_t i = 0; i < evidence.size(); ++i)
            if (evidence[i].complete_runs.size() >= 2) {
                medians[i] = median_of(evidence[i].complete_runs);
                values.push_back(medians[i]);
            }
        if (values.size() >= 2) {
            double lo = *std::min_element(values.begin(), values.end());
            double hi = *std::max_element(values.begin(), values.end());
            for (int iter = 0; iter < 32 && hi > lo; ++iter) {
                double sum_lo = 0, sum_hi = 0;
                int n_lo = 0, n_hi = 0;
                for (double v : values) {
                    if (std::abs(v - lo) <= std::abs(v - hi)) {
                        sum_lo += v;
                        ++n_lo;
                    } else {
                        sum_hi += v;
                        ++n_hi;
                    }
                }
                if (n_lo == 0 || n_hi == 0) break;
                const double new_lo = sum_lo / n_lo, new_hi = sum_hi / n_hi;
                if (new_lo == lo && new_hi == hi) break;
                lo = new_lo;
                hi = new_hi;
            }
            if (hi >= 1.6 * lo) {
                const double split = std::sqrt(lo * hi);
                for (std::size_t i = 0; i < medians.size(); ++i) {
                    if (std::isnan(medians[i])) continue;
                    grid.widths[i] = medians[i];
                    grid.classes[i] = medians[i] >= split ? CellClass::Low : CellClass::High;
                }
            }
        }
    }

    const int unknown = grid.count(CellClass::Unknown);
    if (unknown > params.unknown_tolerance * grid_size * grid_size)
        throw TooFewBands(std::to_string(unknown) + "/" +
                          std::to_string(grid_size * grid_size) + " cells unclassifiable");
    return grid;
}

// ------------------------------------------------------------ reconstruct

std::pair<MarkerPattern, MarkerPattern> reconstruct_pattern(const CellClassGrid& cells) {
    if (cells.count(CellClass::Unknown) > 0)
        throw UnknownCells("grid still has unclassified cells");
    MarkerPattern direct{cells.grid_size, std::vector<std::uint8_t>(cells.classes.size())};
    MarkerPattern inverted = direct;
    for (std::size_t i = 0; i < cells.classes.size(); ++i) {
        const bool white = cells.classes[i] == CellClass::High;
        direct.bits[i] = white ? 1 : 0;
        inverted.bits[i] = white ? 0 : 1;
    }
    return {direct, inverted};
}

// ----------------------------------------------------------------- detect

namespace {

void draw_line(Frame& f, const Vec2& a, const Vec2& b, std::uint8_t value) {
    const int steps = static_cast<int>(std::ceil((b - a).norm())) + 1;
    for (int i = 0; i <= steps; ++i) {
        const double s = static_cast<double>(i) / steps;
        const int x = static_cast<int>(std::lround(a.x() + s * (b.x() - a.x())));
        const int y = static_cast<int>(std::lround(a.y() + s * (b.y() - a.y())));
        if (x >= 0 && y >= 0 && x < f.width && y < f.height) f.at(x, y) = value;
    }
}

void dump_cells_debug(const CellClassGrid& cells, const std::string& path) {
    const int scale = 32;
    const int n = cells.grid_size;
    Frame img{n * scale, n * scale, std::vector<std::uint8_t>(n * n * scale * scale, 0)};
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            std::uint8_t v = 0;
            if (cells.at(r, c) == CellClass::Low) v = 80;
            if (cells.at(r, c) == CellClass::High) v = 200;
            for (int y = r * scale; y < (r + 1) * scale; ++y)
                for (int x = c * scale; x < (c + 1) * scale; ++x) img.at(x, y) = v;
        }
    write_pgm(img, path);
}

void dump_pattern_debug(const MarkerPattern& p, const std::string& path) {
    const int scale = 32;
    const int n = p.grid_size + 2;  // synthetic one-cell white border
    Frame img{n * scale, n * scale, std::vector<std::uint8_t>(n * n * scale * scale, 255)};
    for (int r = 0; r < p.grid_size; ++r)
        for (int c = 0; c < p.grid_size; ++c) {
            const std::uint8_t v = p.at(r, c) ? 255 : 0;
            for (int y = (r + 1) * scale; y < (r + 2) * scale; ++y)
                for (int x = (c + 1) * scale; x < (c + 2) * scale; ++x) img.at(x, y) = v;
        }
    write_pgm(img, path);
}

int auto_close_run(const Frame& frame, const DetectorConfig& config) {
    if (!config.expected_frequencies || !config.frame_scan_time)
        throw ConfigError("close_run \"auto\" needs expected_frequencies and frame_scan_time");
    const double w_low =
        frame.height / *config.frame_scan_time / (2.0 * config.expected_frequencies->first);
    return 2 * static_cast<int>(std::lround(w_low)) + 1;
}

}  // namespace

DetectionResult detect(const Frame& frame, const Dictionary& dict,
                       const DetectorConfig& config) {
    const bool debug = !config.debug_dir.empty();
    if (debug) write_pgm(frame, config.debug_dir + "/01_input.pgm");

    BinaryImage binary;
    try {
        binary = binarize(frame, config.threshold);
    } catch (const Error& e) {
        throw RecognitionFailed(Stage::binarize, e.what());
    }
    if (debug) write_pgm(binary_to_frame(binary), config.debug_dir + "/02_binary.pgm");

    // close-run resolution is config validation, not a pipeline stage
    const int run = config.close_run ? *config.close_run : auto_close_run(frame, config);

    BinaryImage closed;
    try {
        closed = close_vertical(binary, run);
    } catch (const Error& e) {
        throw RecognitionFailed(Stage::close, e.what());
    }
    if (debug) write_pgm(binary_to_frame(closed), config.debug_dir + "/03_closed.pgm");

    Quad quad;
    try {
        quad = find_quad(closed, config.min_area);
    } catch (const DetectionFailure& e) {
        throw RecognitionFailed(e.stage, e.what());
    }
    quad = refine_quad(frame, quad);
    if (debug) {
        Frame overlay = frame;
        for (int i = 0; i < 4; ++i)
            draw_line(overlay, quad.corners[i], quad.corners[(i + 1) % 4], 255);
        write_pgm(overlay, config.debug_dir + "/04_quad.pgm");
    }

    CellMeasureParams params;
    params.window_fraction = config.cell_window_fraction;
    if (config.expected_frequencies && config.frame_scan_time) {
        const double scale = frame.height / *config.frame_scan_time;
        params.expected_widths =
            std::make_pair(scale / (2.0 * config.expected_frequencies->first),
                           scale / (2.0 * config.expected_frequencies->second));
    }

    CellClassGrid cells;
    try {
        cells = measure_cells(frame, quad, dict.grid_size, config.threshold, params);
    } catch (const DetectionFailure& e) {
        throw RecognitionFailed(e.stage, e.what());
    }
    if (debug) dump_cells_debug(cells, config.debug_dir + "/05_cells.pgm");

    MarkerPattern direct, inverted;
    try {
        std::tie(direct, inverted) = reconstruct_pattern(cells);
    } catch (const DetectionFailure& e) {
        throw RecognitionFailed(e.stage, e.what());
    }

    std::optional<DecodeResult> hit_direct, hit_inverted;
    try {
        hit_direct = decode(dict, direct);
    } catch (const NoMatch&) {
    }
    try {
        hit_inverted = decode(dict, inverted);
    } catch (const NoMatch&) {
    }

    if (hit_direct && hit_inverted)
        throw AmbiguousMatch("both polarities decode (ids " + std::to_string(hit_direct->id) +
                             " and " + std::to_string(hit_inverted->id) + ")");
    if (!hit_direct && !hit_inverted)
        throw RecognitionFailed(Stage::decode, "no dictionary entry matches either polarity");

    DetectionResult result;
    result.quad = quad;
    result.cell_grid = cells;
    result.polarity_inverted = static_cast<bool>(hit_inverted);
    const DecodeResult hit = hit_direct ? *hit_direct : *hit_inverted;
    result.id = hit.id;
    result.rotation_deg = hit.rotation_deg;
    result.pattern = hit_direct ? direct : inverted;
    if (debug) dump_pattern_debug(rotate(result.pattern, -hit.rotation_deg),
                                  config.debug_dir + "/06_pattern.pgm");
    return result;
}

}  // namespace blinktag
