#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blinktag/codec.hpp"
#include "blinktag/detector.hpp"
#include "blinktag/optics.hpp"

namespace blinktag {

// Monte-Carlo recognition benchmark: one swept variable (camera distance
// or yaw angle), trials_per_value independent captures per value.
struct SweepSpec {
    enum class Variable { distance, yaw };
    Variable variable = Variable::distance;
    std::vector<double> values;
    int trials_per_value = 1;
    ScenePose base_pose;      // the non-swept coordinates
    CameraModel camera;
    NoiseModel noise;
    Dictionary dictionary;
    int marker_id = 0;
    double f_low = kDefaultFLow;
    double f_high = kDefaultFHigh;
    double duty = kDefaultDuty;
    std::uint64_t seed = 0;
    DetectorConfig detector;  // threshold etc.; scan fields filled from camera
};

// Failure counts use the CSV buckets: binarize covers the two image
// conditioning stages, decode covers reconstruction, dictionary rejection
// and wrong-ID decodes.
struct ValueStats {
    double value = 0.0;
    int trials = 0;
    int successes = 0;
    int fail_binarize = 0;
    int fail_quad = 0;
    int fail_bands = 0;
    int fail_decode = 0;

    double rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

struct RecognitionStats {
    std::vector<ValueStats> per_value;

    bool operator==(const RecognitionStats& o) const;
};

// Runs the whole sweep. Each trial draws its capture phase t0 uniformly
// over one f_low period and a fresh noise stream, both from a seed mixed
// out of (spec.seed, value index, trial index), so results do not depend
// on scheduling. threads == 0 picks hardware concurrency; threads == 1
// forces serial execution. Throws ConfigError for inconsistent specs.
RecognitionStats run_sweep(const SweepSpec& spec, int threads = 0);

// CSV with header value,trials,successes,rate,fail_binarize,fail_quad,
// fail_bands,fail_decode. Rates carry 6 decimals.
std::string stats_to_csv(const RecognitionStats& stats);
RecognitionStats stats_from_csv(const std::string& csv);

// Single polyline rate-vs-value chart.
std::string stats_to_svg(const RecognitionStats& stats, const std::string& x_label);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace blinktag
