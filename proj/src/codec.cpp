#include "blinktag/codec.hpp"

#include <random>
#include <string>

#include "blinktag/errors.hpp"
#include "blinktag/rng.hpp"

namespace blinktag {

MarkerPattern make_pattern(int grid_size, std::vector<std::uint8_t> bits) {
    if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
    if (bits.size() != static_cast<std::size_t>(grid_size) * grid_size)
        throw SizeMismatch("pattern needs grid_size^2 bits");
    for (auto& b : bits) b = b ? 1 : 0;
    return MarkerPattern{grid_size, std::move(bits)};
}

MarkerPattern solid_pattern(int grid_size, bool white) {
    return make_pattern(grid_size,
                        std::vector<std::uint8_t>(grid_size * grid_size, white ? 1 : 0));
}

int hamming(const MarkerPattern& a, const MarkerPattern& b) {
    if (a.grid_size != b.grid_size || a.bits.size() != b.bits.size())
        throw SizeMismatch("hamming: pattern sizes differ");
    int d = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) d += (a.bits[i] != b.bits[i]);
    return d;
}

MarkerPattern rotate(const MarkerPattern& p, int degrees) {
    int turns = ((degrees / 90) % 4 + 4) % 4;
    if (degrees % 90 != 0) throw ConfigError("rotation must be a multiple of 90 degrees");
    if (turns == 0) return p;

    const int n = p.grid_size;
    MarkerPattern out{n, std::vector<std::uint8_t>(p.bits.size())};
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            // one quarter turn: (r, c) <- (n-1-c, r)
            int sr = r, sc = c;
            for (int k = 0; k < turns; ++k) {
                int nr = n - 1 - sc, nc = sr;
                sr = nr;
                sc = nc;
            }
            out.bits[r * n + c] = p.bits[sr * n + sc];
        }
    return out;
}

namespace {

// Minimum rotation-aware distance from candidate to an accepted pattern.
int min_rotated_distance(const MarkerPattern& accepted, const MarkerPattern& candidate) {
    int best = candidate.grid_size * candidate.grid_size + 1;
    for (int r = 0; r < 4; ++r) {
        int d = hamming(accepted, rotate(candidate, r * 90));
        if (d < best) best = d;
    }
    return best;
}

bool self_distance_ok(const MarkerPattern& p, int tau) {
    for (int r = 1; r < 4; ++r)
        if (hamming(p, rotate(p, r * 90)) < tau) return false;
    return true;
}

}  // namespace

Dictionary generate_dictionary(int grid_size, int count, int min_hamming, std::uint64_t seed) {
    if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
    if (count < 1) throw ConfigError("count must be >= 1");
    if (min_hamming < 1) throw ConfigError("min_hamming must be >= 1");
    if (min_hamming > grid_size * grid_size)
        throw ConfigError("min_hamming exceeds the number of cells");

    Dictionary dict{grid_size, min_hamming, seed, {}};
    dict.patterns.reserve(count);

    Rng rng(seed);
    const int cells = grid_size * grid_size;
    const long long budget = 100000LL + 10000LL * count;

    MarkerPattern candidate{grid_size, std::vector<std::uint8_t>(cells, 0)};
    for (long long attempt = 0; attempt < budget; ++attempt) {
        std::uint64_t word = 0;
        for (int i = 0; i < cells; ++i) {
            if (i % 64 == 0) word = rng.bits();
            candidate.bits[i] = (word >> (i % 64)) & 1;
        }
        if (!self_distance_ok(candidate, min_hamming)) continue;
        bool ok = true;
        for (const auto& p : dict.patterns) {
            if (min_rotated_distance(p, candidate) < min_hamming) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        dict.patterns.push_back(candidate);
        if (dict.size() == count) return dict;
    }
    throw GenerationExhausted("no pattern satisfying tau=" + std::to_string(min_hamming) +
                              " found after budget; " + std::to_string(dict.size()) + "/" +
                              std::to_string(count) + " generated");
}

const MarkerPattern& encode(const Dictionary& dict, int id) {
    if (id < 0 || id >= dict.size())
        throw UnknownId("id " + std::to_string(id) + " out of range [0, " +
                        std::to_string(dict.size()) + ")");
    return dict.patterns[id];
}

DecodeResult decode(const Dictionary& dict, const MarkerPattern& observed) {
    if (observed.grid_size != dict.grid_size)
        throw SizeMismatch("observed grid size does not match the dictionary");
    for (int id = 0; id < dict.size(); ++id)
        for (int r = 0; r < 4; ++r)
            if (rotate(dict.patterns[id], r * 90) == observed) return {id, r * 90};
    throw NoMatch("no rotation of the observed pattern is in the dictionary");
}

BlinkAssignment assign_frequencies(const MarkerPattern& p, double f_low, double f_high,
                                   double duty, double phase_low, double phase_high) {
    if (f_low <= 0.0 || f_low >= f_high)
        throw BadFrequencies("need 0 < f_low < f_high");
    if (duty <= 0.0 || duty >= 1.0) throw ConfigError("duty must be in (0,1)");

    BlinkAssignment out{p.grid_size, {}};
    out.cell_waves.reserve(p.bits.size());
    for (auto bit : p.bits) {
        // white -> f_high, black -> f_low; shared duty and amplitude keep
        // the time-averaged brightness of both classes identical.
        if (bit)
            out.cell_waves.push_back(SquareWave{f_high, phase_high, duty, 1.0});
        else
            out.cell_waves.push_back(SquareWave{f_low, phase_low, duty, 1.0});
    }
    return out;
}

}  // namespace blinktag
