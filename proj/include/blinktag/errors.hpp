#pragma once

#include <stdexcept>
#include <string>

namespace blinktag {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- codec ----
struct GenerationExhausted : Error {
    using Error::Error;
};
struct UnknownId : Error {
    using Error::Error;
};
struct NoMatch : Error {
    using Error::Error;
};
struct BadFrequencies : Error {
    using Error::Error;
};
struct SizeMismatch : Error {
    using Error::Error;
};

// ---- optics ----
struct DegeneratePose : Error {
    using Error::Error;
};

// ---- detector ----

// Pipeline stage that caused a recognition failure. Order mirrors the
// processing chain; the sweep harness buckets failures by this value.
enum class Stage { binarize, close, find_quad, measure_cells, reconstruct, decode };

const char* stage_name(Stage s);

struct DetectionFailure : Error {
    Stage stage;
    DetectionFailure(Stage s, const std::string& msg) : Error(msg), stage(s) {}
};

struct NoQuad : DetectionFailure {
    explicit NoQuad(const std::string& msg) : DetectionFailure(Stage::find_quad, msg) {}
};
struct TooFewBands : DetectionFailure {
    explicit TooFewBands(const std::string& msg) : DetectionFailure(Stage::measure_cells, msg) {}
};
struct UnknownCells : DetectionFailure {
    explicit UnknownCells(const std::string& msg) : DetectionFailure(Stage::reconstruct, msg) {}
};
struct AmbiguousMatch : DetectionFailure {
    explicit AmbiguousMatch(const std::string& msg) : DetectionFailure(Stage::decode, msg) {}
};

// Wrapper detect() throws after tagging the failing stage.
struct RecognitionFailed : Error {
    Stage stage;
    std::string cause;
    RecognitionFailed(Stage s, const std::string& c)
        : Error(std::string(stage_name(s)) + ": " + c), stage(s), cause(c) {}
};

// ---- pose ----
struct DegenerateQuad : Error {
    using Error::Error;
};
struct BehindCamera : Error {
    using Error::Error;
};
struct UnknownMarker : Error {
    using Error::Error;
};

// ---- harness / IO ----
struct ConfigError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

}  // namespace blinktag
