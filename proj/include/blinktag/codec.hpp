#pragma once

#include <cstdint>
#include <vector>

namespace blinktag {

// Square binary cell grid, stored border-less and row-major from the top
// left. true = white cell, false = black cell; the one-cell white border
// of the printed-marker convention is synthesized at detection time.
struct MarkerPattern {
    int grid_size = 0;
    std::vector<std::uint8_t> bits;  // grid_size*grid_size entries of 0/1

    bool at(int row, int col) const { return bits[row * grid_size + col] != 0; }
    void set(int row, int col, bool v) { bits[row * grid_size + col] = v ? 1 : 0; }

    bool operator==(const MarkerPattern& o) const = default;
};

MarkerPattern make_pattern(int grid_size, std::vector<std::uint8_t> bits);
MarkerPattern solid_pattern(int grid_size, bool white);

// Set of patterns with guaranteed rotation-aware pairwise Hamming
// distance >= min_hamming, and self-distance >= min_hamming under the
// three non-trivial rotations. Index in `patterns` is the marker ID.
struct Dictionary {
    int grid_size = 0;
    int min_hamming = 0;
    std::uint64_t seed = 0;
    std::vector<MarkerPattern> patterns;

    int size() const { return static_cast<int>(patterns.size()); }
};

// One LED cell's drive waveform. Normalized luminance `amplitude` while
// on, 0 while off; on-interval starts at `phase` and lasts duty/frequency
// each period.
struct SquareWave {
    double frequency = 0.0;  // Hz
    double phase = 0.0;      // seconds, offset of first rising edge
    double duty = 0.5;       // fraction of the period spent on, in (0,1]
    double amplitude = 1.0;  // normalized luminance in [0,1]
};

// Per-cell waveforms for a whole marker panel, row-major like the pattern.
struct BlinkAssignment {
    int grid_size = 0;
    std::vector<SquareWave> cell_waves;

    const SquareWave& at(int row, int col) const { return cell_waves[row * grid_size + col]; }
};

struct DecodeResult {
    int id = -1;
    int rotation_deg = 0;  // 0, 90, 180 or 270
};

// Bit count of the XOR of two equal-size patterns. Throws SizeMismatch.
int hamming(const MarkerPattern& a, const MarkerPattern& b);

// Grid rotation in multiples of 90 degrees (positive = the direction that
// carries the top-left cell to the top-right). rotate(p, 0) == p and
// rotations compose modulo 360.
MarkerPattern rotate(const MarkerPattern& p, int degrees);

// Seeded rejection sampling over random grids until `count` patterns
// satisfying both distance invariants are found. Deterministic for a
// fixed seed. Throws GenerationExhausted when the attempt budget runs out
// (count/min_hamming infeasible for this grid size).
Dictionary generate_dictionary(int grid_size, int count, int min_hamming, std::uint64_t seed);

// Pure ID -> pattern lookup. Throws UnknownId when out of range.
const MarkerPattern& encode(const Dictionary& dict, int id);

// Finds the unique (id, r) with observed == rotate(patterns[id], r).
// Exact match only; throws NoMatch when nothing in the dictionary fits.
DecodeResult decode(const Dictionary& dict, const MarkerPattern& observed);

// Black cells blink at f_low, white cells at f_high; one shared phase per
// frequency class and a common duty/amplitude, so the time-averaged
// brightness of every cell is identical (flicker-free constraint).
BlinkAssignment assign_frequencies(const MarkerPattern& p, double f_low, double f_high,
                                   double duty = 0.5, double phase_low = 0.0,
                                   double phase_high = 0.0);

// Defaults shared by the CLI, presets and tests.
inline constexpr int kDefaultGridSize = 4;
inline constexpr int kDefaultDictCount = 16;
inline constexpr int kDefaultMinHamming = 4;
inline constexpr std::uint64_t kDefaultDictSeed = 7;
inline constexpr double kDefaultFLow = 500.0;   // Hz
inline constexpr double kDefaultFHigh = 2000.0; // Hz
inline constexpr double kDefaultDuty = 0.5;

}  // namespace blinktag
