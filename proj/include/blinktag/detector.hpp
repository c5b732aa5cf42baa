#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blinktag/codec.hpp"
#include "blinktag/geometry.hpp"
#include "blinktag/optics.hpp"

namespace blinktag {

struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 0/1, row-major

    bool at(int x, int y) const { return bits[y * width + x] != 0; }
    void set(int x, int y, bool v) { bits[y * width + x] = v ? 1 : 0; }

    bool operator==(const BinaryImage& o) const = default;
};

// Convex quadrilateral in sub-pixel image coordinates, ordered clockwise
// (as drawn, y down) starting from the corner with the smallest x + y.
struct Quad {
    std::array<Vec2, 4> corners;
};

enum class CellClass : std::uint8_t { Low, High, Unknown };

// Per-cell frequency classification plus the measured band widths that
// produced it. width is NaN where no complete band fit inside the cell.
struct CellClassGrid {
    int grid_size = 0;
    std::vector<CellClass> classes;
    std::vector<double> widths;  // scan lines

    CellClass at(int row, int col) const { return classes[row * grid_size + col]; }
    double width_at(int row, int col) const { return widths[row * grid_size + col]; }
    int count(CellClass c) const;
};

struct DetectionResult {
    Quad quad;
    CellClassGrid cell_grid;
    MarkerPattern pattern;  // the dictionary entry actually matched
    int id = -1;
    int rotation_deg = 0;
    bool polarity_inverted = false;  // true when High->black gave the match
};

struct Threshold {
    enum class Kind { otsu, fixed };
    Kind kind = Kind::otsu;
    int level = 128;

    static Threshold otsu() { return {Kind::otsu, 128}; }
    static Threshold fixed(int level) { return {Kind::fixed, level}; }
};

struct DetectorConfig {
    Threshold threshold;
    // Vertical closing run in lines; unset means "auto", i.e.
    // 2 * band_width(f_low) + 1 derived from the scan parameters below.
    std::optional<int> close_run;
    double min_area = 400.0;  // pixels^2, smallest acceptable quad component
    double cell_window_fraction = 0.6;
    // Known blink frequencies (low, high). Together with frame_scan_time
    // they fix the expected band widths; without them measure_cells falls
    // back to 2-means clustering of the measured widths.
    std::optional<std::pair<double, double>> expected_frequencies =
        std::make_pair(kDefaultFLow, kDefaultFHigh);
    std::optional<double> frame_scan_time = 0.01;  // seconds, for width prediction
    std::string debug_dir;  // when non-empty, detect() dumps per-stage PGMs here
};

// Global threshold. Otsu picks the level maximizing between-class
// variance over the 256-bin histogram; a flat histogram (Otsu undefined)
// falls back to fixed(128).
BinaryImage binarize(const Frame& frame, const Threshold& threshold);

// The level binarize(.., otsu) would use. Exposed for tests.
int otsu_level(const Frame& frame);

// Morphological closing (dilate then erode) with a vertical structuring
// element of `run` pixels; merges the on/off bands of one marker into a
// solid region. run == 1 is the identity.
BinaryImage close_vertical(const BinaryImage& b, int run);

// Largest 8-connected component of area >= min_area, outer contour traced
// and Douglas-Peucker simplified (tolerance 2% of the contour perimeter)
// to exactly four vertices. Throws NoQuad when no component qualifies or
// the simplification is not a convex 4-gon.
Quad find_quad(const BinaryImage& b, double min_area);

// Sub-pixel refinement of a binary-accurate quad against the gray frame.
// Intensity profiles perpendicular to each edge locate the silhouette at
// the half-contrast crossing of its antialiased ramp; a trimmed
// least-squares line through the crossings replaces the edge and adjacent
// lines re-intersect into corners. Edges without enough well-contrasted
// crossings (band-truncated or off-frame) keep their input line, and a
// result that breaks convexity or moves a corner by several pixels is
// dropped in favor of the input. Never throws; at worst returns `quad`.
Quad refine_quad(const Frame& frame, const Quad& quad);

struct CellMeasureParams {
    double window_fraction = 0.6;  // central fraction of the cell sampled
    // Expected band widths (low, high) in scan lines, when known.
    std::optional<std::pair<double, double>> expected_widths;
    double unknown_tolerance = 0.25;  // fraction of Unknown cells tolerated
};

// Classifies every cell by the width of its rolling-shutter bands.
// Complete bright and dark runs strictly inside a cell give its width
// estimate (median); cells tall enough that a high-frequency wave could
// not have hidden are classified Low even without a complete band.
// Throws TooFewBands when more than unknown_tolerance of the cells stay
// Unknown.
CellClassGrid measure_cells(const Frame& frame, const Quad& quad, int grid_size,
                            const Threshold& threshold, const CellMeasureParams& params);

// Both polarity readings of a fully classified grid:
// (Low->black, High->white) first, the inversion second.
// Throws UnknownCells when any cell is Unknown.
std::pair<MarkerPattern, MarkerPattern> reconstruct_pattern(const CellClassGrid& cells);

// Full pipeline: binarize -> close_vertical -> find_quad -> measure_cells
// -> reconstruct_pattern -> dictionary decode, trying both polarities.
// Throws RecognitionFailed{stage, cause} on any stage failure and
// AmbiguousMatch when both polarities decode to different valid IDs.
DetectionResult detect(const Frame& frame, const Dictionary& dict, const DetectorConfig& config);

}  // namespace blinktag
