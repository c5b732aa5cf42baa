#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <algorithm>
#include <array>
#include <vector>

#include "blinktag/codec.hpp"
#include "blinktag/optics.hpp"

namespace blinktag::testutil {

// The 16-entry default dictionary; generated once, shared by the suites.
inline const Dictionary& default_dict() {
    static const Dictionary dict = generate_dictionary(
        kDefaultGridSize, kDefaultDictCount, kDefaultMinHamming, kDefaultDictSeed);
    return dict;
}

// Capture start time that puts a rising edge of a phase-0 wave exactly on
// the panel's top image row, so band boundaries tile flush with the panel
// at frontal poses. Keeps synthetic-geometry tests free of partial bands.
inline double aligned_t0(const CameraModel& camera, const ScenePose& pose) {
    const auto corners = project_corners(camera, pose);
    double v_top = corners[0].y();
    for (const auto& c : corners) v_top = std::min(v_top, c.y());
    return -v_top * camera.line_period();
}

// Reference rotation built from transpose + row reversal, deliberately a
// different construction from the library's, to serve as an oracle.
inline MarkerPattern rotate90_oracle(const MarkerPattern& p) {
    const int n = p.grid_size;
    MarkerPattern out{n, std::vector<std::uint8_t>(p.bits.size())};
    // transpose
    MarkerPattern t = out;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) t.set(c, r, p.at(r, c));
    // reverse each row: transpose + horizontal mirror = 90 degrees clockwise
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) out.set(r, c, t.at(r, n - 1 - c));
    return out;
}

inline MarkerPattern rotate_oracle(const MarkerPattern& p, int degrees) {
    int turns = ((degrees / 90) % 4 + 4) % 4;
    MarkerPattern out = p;
    for (int i = 0; i < turns; ++i) out = rotate90_oracle(out);
    return out;
}

// Complete bright runs (bounded above and below by dark samples) down one
// image column; values in scan lines.
inline std::vector<int> bright_runs(const Frame& frame, int x, int level = 128) {
    std::vector<int> runs;
    int start = -1;
    bool prev_dark = true;
    for (int y = 0; y < frame.height; ++y) {
        const bool on = frame.at(x, y) >= level;
        if (on && prev_dark) start = y;
        if (!on && !prev_dark && start > 0) runs.push_back(y - start);
        prev_dark = !on;
    }
    // a run still open at the last row has no lower bound; drop it
    return runs;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    if (v.empty()) return 0.0;
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// A panel whose every cell drives the same wave; frequency f, phase 0.
inline BlinkAssignment uniform_panel(int grid_size, double f, double duty = 0.5) {
    BlinkAssignment panel;
    panel.grid_size = grid_size;
    panel.cell_waves.assign(grid_size * grid_size, SquareWave{f, 0.0, duty, 1.0});
    return panel;
}

// Constant-on panel: a solid bright quad regardless of capture phase.
inline BlinkAssignment solid_panel(int grid_size) {
    return uniform_panel(grid_size, 1000.0, 1.0);
}

inline MarkerPattern checkerboard(int n) {
    MarkerPattern p{n, std::vector<std::uint8_t>(n * n)};
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) p.set(r, c, (r + c) % 2 == 0);
    return p;
}

}  // namespace blinktag::testutil
