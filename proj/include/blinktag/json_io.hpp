#pragma once

#include <json.hpp>

#include <string>

#include "blinktag/codec.hpp"
#include "blinktag/detector.hpp"
#include "blinktag/optics.hpp"
#include "blinktag/pose.hpp"
#include "blinktag/sweep.hpp"

namespace blinktag {

using Json = nlohmann::json;

// Schemas are documented in the README. All parsers throw ConfigError on
// malformed or out-of-range input.

Json dictionary_to_json(const Dictionary& dict);
Dictionary dictionary_from_json(const Json& j);

Json camera_to_json(const CameraModel& cam);
CameraModel camera_from_json(const Json& j);

Json noise_to_json(const NoiseModel& noise);
NoiseModel noise_from_json(const Json& j);

Json detector_config_to_json(const DetectorConfig& config);
DetectorConfig detector_config_from_json(const Json& j);

Json marker_map_to_json(const MarkerMap& map);
MarkerMap marker_map_from_json(const Json& j);

// SweepSpec references its dictionary either inline
// ({"generate": {grid_size, count, min_hamming, seed}}) or as a path
// relative to `base_dir` (the directory of the spec file).
SweepSpec sweep_spec_from_json(const Json& j, const std::string& base_dir);
Json sweep_spec_to_json(const SweepSpec& spec);

Json load_json_file(const std::string& path);
void save_json_file(const Json& j, const std::string& path);

}  // namespace blinktag
