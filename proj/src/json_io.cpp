#include "blinktag/json_io.hpp"

#include <fstream>
#include <sstream>

#include "blinktag/errors.hpp"

namespace blinktag {

namespace {

// nlohmann throws its own exceptions; funnel every schema problem into
// ConfigError with the offending key in the message.
template <typename T>
T require(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("field \"") + key + "\": " + e.what());
    }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("field \"") + key + "\": " + e.what());
    }
}

std::string bits_to_string(const MarkerPattern& p) {
    std::string s;
    s.reserve(p.bits.size());
    for (auto b : p.bits) s.push_back(b ? '1' : '0');
    return s;
}

MarkerPattern pattern_from_string(int grid_size, const std::string& s) {
    if (static_cast<int>(s.size()) != grid_size * grid_size)
        throw ConfigError("pattern string length " + std::to_string(s.size()) +
                          " does not match grid_size " + std::to_string(grid_size));
    std::vector<std::uint8_t> bits(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '0' && s[i] != '1') throw ConfigError("pattern strings are 0/1 only");
        bits[i] = s[i] == '1';
    }
    return make_pattern(grid_size, std::move(bits));
}

}  // namespace

Json dictionary_to_json(const Dictionary& dict) {
    Json patterns = Json::array();
    for (const auto& p : dict.patterns) patterns.push_back(bits_to_string(p));
    return Json{{"grid_size", dict.grid_size},
                {"min_hamming", dict.min_hamming},
                {"seed", dict.seed},
                {"patterns", patterns}};
}

Dictionary dictionary_from_json(const Json& j) {
    Dictionary dict;
    dict.grid_size = require<int>(j, "grid_size");
    dict.min_hamming = require<int>(j, "min_hamming");
    dict.seed = get_or<std::uint64_t>(j, "seed", 0);
    if (dict.grid_size < 1) throw ConfigError("grid_size must be >= 1");
    const auto strings = require<std::vector<std::string>>(j, "patterns");
    for (const auto& s : strings) dict.patterns.push_back(pattern_from_string(dict.grid_size, s));
    return dict;
}

Json camera_to_json(const CameraModel& cam) {
    return Json{{"width", cam.width}, {"height", cam.height}, {"fx", cam.fx},
                {"fy", cam.fy},       {"cx", cam.cx},         {"cy", cam.cy},
                {"frame_scan_time", cam.frame_scan_time}};
}

CameraModel camera_from_json(const Json& j) {
    CameraModel cam;
    cam.width = require<int>(j, "width");
    cam.height = require<int>(j, "height");
    cam.fx = require<double>(j, "fx");
    cam.fy = require<double>(j, "fy");
    cam.cx = require<double>(j, "cx");
    cam.cy = require<double>(j, "cy");
    cam.frame_scan_time = require<double>(j, "frame_scan_time");
    if (cam.width <= 0 || cam.height <= 0) throw ConfigError("camera size must be positive");
    if (cam.fx <= 0 || cam.fy <= 0) throw ConfigError("focal lengths must be positive");
    if (cam.frame_scan_time <= 0) throw ConfigError("frame_scan_time must be positive");
    return cam;
}

Json noise_to_json(const NoiseModel& noise) {
    return Json{{"gaussian_sigma", noise.gaussian_sigma},
                {"ambient", noise.ambient},
                {"blur_radius", noise.blur_radius},
                {"directivity", noise.directivity},
                {"rng_seed", noise.rng_seed}};
}

NoiseModel noise_from_json(const Json& j) {
    NoiseModel noise;
    noise.gaussian_sigma = get_or<double>(j, "gaussian_sigma", 0.0);
    noise.ambient = get_or<double>(j, "ambient", 0.0);
    noise.blur_radius = get_or<double>(j, "blur_radius", 0.0);
    noise.directivity = get_or<double>(j, "directivity", 0.0);
    noise.rng_seed = get_or<std::uint64_t>(j, "rng_seed", 0);
    if (noise.gaussian_sigma < 0 || noise.blur_radius < 0 || noise.directivity < 0)
        throw ConfigError("noise parameters must be non-negative");
    return noise;
}

Json detector_config_to_json(const DetectorConfig& config) {
    Json j;
    if (config.threshold.kind == Threshold::Kind::otsu)
        j["threshold"] = "otsu";
    else
        j["threshold"] = Json{{"fixed", config.threshold.level}};
    if (config.close_run)
        j["close_run"] = *config.close_run;
    else
        j["close_run"] = "auto";
    j["min_area"] = config.min_area;
    j["cell_window_fraction"] = config.cell_window_fraction;
    if (config.expected_frequencies)
        j["expected_frequencies"] =
            Json::array({config.expected_frequencies->first, config.expected_frequencies->second});
    else
        j["expected_frequencies"] = nullptr;
    if (config.frame_scan_time)
        j["frame_scan_time"] = *config.frame_scan_time;
    else
        j["frame_scan_time"] = nullptr;
    return j;
}

DetectorConfig detector_config_from_json(const Json& j) {
    DetectorConfig config;
    if (j.contains("threshold")) {
        const Json& t = j.at("threshold");
        if (t.is_string() && t.get<std::string>() == "otsu")
            config.threshold = Threshold::otsu();
        else if (t.is_object() && t.contains("fixed"))
            config.threshold = Threshold::fixed(require<int>(t, "fixed"));
        else
            throw ConfigError("threshold must be \"otsu\" or {\"fixed\": level}");
        if (config.threshold.level < 0 || config.threshold.level > 255)
            throw ConfigError("threshold level must be in [0,255]");
    }
    if (j.contains("close_run")) {
        const Json& c = j.at("close_run");
        if (c.is_string()) {
            if (c.get<std::string>() != "auto")
                throw ConfigError("close_run is an integer or \"auto\"");
            config.close_run.reset();
        } else {
            config.close_run = require<int>(j, "close_run");
            if (*config.close_run < 1) throw ConfigError("close_run must be >= 1");
        }
    }
    config.min_area = get_or<double>(j, "min_area", config.min_area);
    config.cell_window_fraction =
        get_or<double>(j, "cell_window_fraction", config.cell_window_fraction);
    if (config.min_area < 0) throw ConfigError("min_area must be non-negative");
    if (config.cell_window_fraction <= 0 || config.cell_window_fraction > 1)
        throw ConfigError("cell_window_fraction must be in (0,1]");
    if (j.contains("expected_frequencies")) {
        const Json& f = j.at("expected_frequencies");
        if (f.is_null()) {
            config.expected_frequencies.reset();
        } else {
            const auto pair = require<std::vector<double>>(j, "expected_frequencies");
            if (pair.size() != 2 || pair[0] <= 0 || pair[0] >= pair[1])
                throw ConfigError("expected_frequencies must be [f_low, f_high], 0 < low < high");
            config.expected_frequencies = std::make_pair(pair[0], pair[1]);
        }
    }
    if (j.contains("frame_scan_time")) {
        const Json& t = j.at("frame_scan_time");
        if (t.is_null()) {
            config.frame_scan_time.reset();
        } else {
            config.frame_scan_time = require<double>(j, "frame_scan_time");
            if (*config.frame_scan_time <= 0) throw ConfigError("frame_scan_time must be positive");
        }
    }
    return config;
}

Json marker_map_to_json(const MarkerMap& map) {
    Json entries = Json::array();
    for (const auto& [id, entry] : map.entries) {
        Json orientation = Json::array();  // 9 values, row-major
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) orientation.push_back(entry.orientation(r, c));
        entries.push_back(Json{
            {"id", id},
            {"position", Json::array({entry.position.x(), entry.position.y(),
                                      entry.position.z()})},
            {"orientation", orientation},
            {"marker_side", entry.marker_side}});
    }
    return Json{{"entries", entries}};
}

MarkerMap marker_map_from_json(const Json& j) {
    MarkerMap map;
    if (!j.contains("entries") || !j.at("entries").is_array())
        throw ConfigError("marker map needs an \"entries\" array");
    for (const Json& m : j.at("entries")) {
        const int id = require<int>(m, "id");
        MarkerMapEntry entry;
        const auto pos = require<std::vector<double>>(m, "position");
        if (pos.size() != 3) throw ConfigError("position must have 3 entries");
        entry.position = Vec3(pos[0], pos[1], pos[2]);
        entry.orientation = Mat3::Identity();
        if (m.contains("orientation")) {
            const auto flat = require<std::vector<double>>(m, "orientation");
            if (flat.size() != 9)
                throw ConfigError("orientation must be 9 row-major values");
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) entry.orientation(r, c) = flat[3 * r + c];
            if ((entry.orientation.transpose() * entry.orientation - Mat3::Identity())
                    .norm() > 1e-6)
                throw ConfigError("orientation is not orthonormal");
        }
        entry.marker_side = get_or<double>(m, "marker_side", entry.marker_side);
        if (entry.marker_side <= 0) throw ConfigError("marker_side must be positive");
        if (map.entries.count(id)) throw ConfigError("duplicate marker id in map");
        map.entries[id] = entry;
    }
    return map;
}

namespace {

ScenePose pose_from_json(const Json& j) {
    ScenePose pose;
    pose.distance = get_or<double>(j, "distance", pose.distance);
    pose.yaw_deg = get_or<double>(j, "yaw_deg", pose.yaw_deg);
    pose.marker_side = get_or<double>(j, "marker_side", pose.marker_side);
    pose.roll_deg = get_or<double>(j, "roll_deg", pose.roll_deg);
    return pose;
}

Json pose_to_json(const ScenePose& pose) {
    return Json{{"distance", pose.distance},
                {"yaw_deg", pose.yaw_deg},
                {"marker_side", pose.marker_side},
                {"roll_deg", pose.roll_deg}};
}

}  // namespace

SweepSpec sweep_spec_from_json(const Json& j, const std::string& base_dir) {
    SweepSpec spec;
    const auto variable = require<std::string>(j, "variable");
    if (variable == "distance")
        spec.variable = SweepSpec::Variable::distance;
    else if (variable == "yaw")
        spec.variable = SweepSpec::Variable::yaw;
    else
        throw ConfigError("variable must be \"distance\" or \"yaw\"");

    spec.values = require<std::vector<double>>(j, "values");
    if (spec.values.empty()) throw ConfigError("values must be non-empty");
    spec.trials_per_value = require<int>(j, "trials_per_value");
    if (spec.trials_per_value < 1) throw ConfigError("trials_per_value must be >= 1");

    if (j.contains("base_pose")) spec.base_pose = pose_from_json(j.at("base_pose"));
    if (j.contains("camera")) spec.camera = camera_from_json(j.at("camera"));
    if (j.contains("noise")) spec.noise = noise_from_json(j.at("noise"));
    if (j.contains("detector")) spec.detector = detector_config_from_json(j.at("detector"));

    if (!j.contains("dictionary")) throw ConfigError("sweep spec needs a dictionary");
    const Json& d = j.at("dictionary");
    if (d.is_string()) {
        const std::string rel = d.get<std::string>();
        const std::string path =
            (rel.empty() || rel.front() == '/' || base_dir.empty()) ? rel : base_dir + "/" + rel;
        spec.dictionary = dictionary_from_json(load_json_file(path));
    } else if (d.contains("generate")) {
        const Json& g = d.at("generate");
        spec.dictionary = generate_dictionary(
            get_or<int>(g, "grid_size", kDefaultGridSize),
            get_or<int>(g, "count", kDefaultDictCount),
            get_or<int>(g, "min_hamming", kDefaultMinHamming),
            get_or<std::uint64_t>(g, "seed", kDefaultDictSeed));
    } else {
        spec.dictionary = dictionary_from_json(d);
    }

    spec.marker_id = get_or<int>(j, "marker_id", 0);
    if (spec.marker_id < 0 || spec.marker_id >= spec.dictionary.size())
        throw ConfigError("marker_id out of dictionary range");
    spec.f_low = get_or<double>(j, "f_low", spec.f_low);
    spec.f_high = get_or<double>(j, "f_high", spec.f_high);
    if (spec.f_low <= 0 || spec.f_low >= spec.f_high)
        throw ConfigError("need 0 < f_low < f_high");
    spec.duty = get_or<double>(j, "duty", spec.duty);
    if (spec.duty <= 0 || spec.duty >= 1) throw ConfigError("duty must be in (0,1)");
    spec.seed = get_or<std::uint64_t>(j, "seed", 0);
    return spec;
}

Json sweep_spec_to_json(const SweepSpec& spec) {
    Json j;
    j["variable"] = spec.variable == SweepSpec::Variable::distance ? "distance" : "yaw";
    j["values"] = spec.values;
    j["trials_per_value"] = spec.trials_per_value;
    j["base_pose"] = pose_to_json(spec.base_pose);
    j["camera"] = camera_to_json(spec.camera);
    j["noise"] = noise_to_json(spec.noise);
    j["detector"] = detector_config_to_json(spec.detector);
    j["dictionary"] = dictionary_to_json(spec.dictionary);
    j["marker_id"] = spec.marker_id;
    j["f_low"] = spec.f_low;
    j["f_high"] = spec.f_high;
    j["duty"] = spec.duty;
    j["seed"] = spec.seed;
    return j;
}

Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void save_json_file(const Json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace blinktag
