// blinktag command line front end: dictionary management, synthetic
// rolling-shutter captures, detection, pose, recognition-rate sweeps.
//
// Exit codes: 0 success, 1 recognition failure, 2 configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "blinktag/codec.hpp"
#include "blinktag/detector.hpp"
#include "blinktag/errors.hpp"
#include "blinktag/image_io.hpp"
#include "blinktag/json_io.hpp"
#include "blinktag/optics.hpp"
#include "blinktag/pose.hpp"
#include "blinktag/sweep.hpp"

namespace bt = blinktag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRecognition = 1;
constexpr int kExitConfig = 2;

std::string dirname_of(const std::string& path) {
    const auto slash = path.find_last_of('/');
    return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

bt::Dictionary load_dictionary(const std::string& path) {
    return bt::dictionary_from_json(bt::load_json_file(path));
}

std::string pattern_ascii(const bt::MarkerPattern& p) {
    std::string out;
    for (int r = 0; r < p.grid_size; ++r) {
        for (int c = 0; c < p.grid_size; ++c) out += p.at(r, c) ? "##" : "..";
        out += "\n";
    }
    return out;
}

bt::Json pose_json(const bt::PoseEstimate& pose) {
    bt::Json rot = bt::Json::array();
    for (int r = 0; r < 3; ++r)
        rot.push_back(bt::Json::array(
            {pose.rotation(r, 0), pose.rotation(r, 1), pose.rotation(r, 2)}));
    return bt::Json{{"rotation", rot},
                    {"translation", bt::Json::array({pose.translation.x(),
                                                     pose.translation.y(),
                                                     pose.translation.z()})},
                    {"distance", pose.distance},
                    {"yaw_deg", pose.yaw_deg}};
}

bt::Json quad_json(const bt::Quad& quad) {
    bt::Json corners = bt::Json::array();
    for (const auto& c : quad.corners) corners.push_back(bt::Json::array({c.x(), c.y()}));
    return corners;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LED marker blink codec, rolling-shutter simulator and detector"};
    app.require_subcommand(1);

    // ---- dict ----
    auto* dict_cmd = app.add_subcommand("dict", "dictionary management");
    dict_cmd->require_subcommand(1);

    int grid_size = bt::kDefaultGridSize;
    int count = bt::kDefaultDictCount;
    int min_hamming = bt::kDefaultMinHamming;
    std::uint64_t gen_seed = bt::kDefaultDictSeed;
    std::string dict_out;
    auto* dict_generate = dict_cmd->add_subcommand("generate", "generate a dictionary");
    dict_generate->add_option("--grid-size", grid_size, "cells per side");
    dict_generate->add_option("--count", count, "number of patterns");
    dict_generate->add_option("--min-hamming", min_hamming, "distance floor");
    dict_generate->add_option("--seed", gen_seed, "generation seed");
    dict_generate->add_option("--out", dict_out, "output JSON path (default stdout)");

    std::string dict_path;
    std::optional<int> show_id;
    auto* dict_show = dict_cmd->add_subcommand("show", "print patterns as ASCII grids");
    dict_show->add_option("--dict", dict_path, "dictionary JSON")->required();
    int show_id_raw = -1;
    dict_show->add_option("--id", show_id_raw, "show only this ID");

    // ---- encode ----
    std::string enc_dict, enc_out;
    int enc_id = 0;
    double f_low = bt::kDefaultFLow, f_high = bt::kDefaultFHigh, duty = bt::kDefaultDuty;
    auto* encode_cmd = app.add_subcommand("encode", "ID -> per-cell blink assignment");
    encode_cmd->add_option("--dict", enc_dict, "dictionary JSON")->required();
    encode_cmd->add_option("--id", enc_id, "marker ID")->required();
    encode_cmd->add_option("--f-low", f_low, "black-cell frequency, Hz");
    encode_cmd->add_option("--f-high", f_high, "white-cell frequency, Hz");
    encode_cmd->add_option("--duty", duty, "duty cycle in (0,1)");
    encode_cmd->add_option("--out", enc_out, "output JSON path (default stdout)");

    // ---- render ----
    std::string ren_dict, ren_out, ren_camera, ren_noise;
    int ren_id = 0;
    double distance = 0.6, yaw = 0.0, roll = 0.0, marker_side = 0.16, t0 = 0.0;
    double phase_low = 0.0, phase_high = 0.0;
    auto* render_cmd = app.add_subcommand("render", "simulate one rolling-shutter capture");
    render_cmd->add_option("--dict", ren_dict, "dictionary JSON")->required();
    render_cmd->add_option("--id", ren_id, "marker ID")->required();
    render_cmd->add_option("--out", ren_out, "output PGM path")->required();
    render_cmd->add_option("--distance", distance, "camera distance, m");
    render_cmd->add_option("--yaw", yaw, "marker yaw, degrees");
    render_cmd->add_option("--roll", roll, "in-plane roll, degrees");
    render_cmd->add_option("--marker-side", marker_side, "panel side, m");
    render_cmd->add_option("--t0", t0, "capture start time, s");
    render_cmd->add_option("--f-low", f_low, "black-cell frequency, Hz");
    render_cmd->add_option("--f-high", f_high, "white-cell frequency, Hz");
    render_cmd->add_option("--duty", duty, "duty cycle in (0,1)");
    render_cmd->add_option("--phase-low", phase_low, "low-class phase, s");
    render_cmd->add_option("--phase-high", phase_high, "high-class phase, s");
    render_cmd->add_option("--camera", ren_camera, "camera JSON (default built-in)");
    render_cmd->add_option("--noise", ren_noise, "noise JSON (default none)");

    // ---- detect ----
    std::string det_image, det_dict, det_config, det_camera, det_debug;
    double det_marker_side = 0.16;
    auto* detect_cmd = app.add_subcommand("detect", "detect and decode one capture");
    detect_cmd->add_option("--frame", det_image, "input PGM")->required();
    detect_cmd->add_option("--dict", det_dict, "dictionary JSON")->required();
    detect_cmd->add_option("--config", det_config, "detector config JSON");
    detect_cmd->add_option("--camera", det_camera, "camera JSON for pose (default built-in)");
    detect_cmd->add_option("--marker-side", det_marker_side, "panel side for pose, m");
    detect_cmd->add_option("--debug-dir", det_debug, "dump per-stage PGMs here");

    // ---- sweep ----
    std::string sweep_spec_path, sweep_csv, sweep_svg;
    int sweep_threads = 0;
    bool sweep_serial = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "recognition-rate benchmark");
    sweep_cmd->add_option("--spec", sweep_spec_path, "sweep spec JSON")->required();
    sweep_cmd->add_option("--out", sweep_csv, "output CSV path (default stdout)");
    sweep_cmd->add_option("--svg", sweep_svg, "also write an SVG chart");
    sweep_cmd->add_option("--threads", sweep_threads, "worker threads (0 = all cores)");
    sweep_cmd->add_flag("--serial", sweep_serial, "force single-threaded execution");

    // ---- localize ----
    std::string loc_image, loc_dict, loc_map, loc_camera, loc_config;
    auto* localize_cmd = app.add_subcommand("localize", "camera position from one capture");
    localize_cmd->add_option("--frame", loc_image, "input PGM")->required();
    localize_cmd->add_option("--dict", loc_dict, "dictionary JSON")->required();
    localize_cmd->add_option("--map", loc_map, "marker map JSON")->required();
    localize_cmd->add_option("--camera", loc_camera, "camera JSON (default built-in)");
    localize_cmd->add_option("--config", loc_config, "detector config JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (dict_generate->parsed()) {
            const auto dict = bt::generate_dictionary(grid_size, count, min_hamming, gen_seed);
            const auto j = bt::dictionary_to_json(dict);
            if (dict_out.empty())
                std::cout << j.dump(2) << "\n";
            else
                bt::save_json_file(j, dict_out);
            return kExitOk;
        }

        if (dict_show->parsed()) {
            const auto dict = load_dictionary(dict_path);
            if (show_id_raw >= 0) show_id = show_id_raw;
            for (int id = 0; id < dict.size(); ++id) {
                if (show_id && *show_id != id) continue;
                std::cout << "id " << id << "\n" << pattern_ascii(dict.patterns[id]) << "\n";
            }
            if (show_id && (*show_id < 0 || *show_id >= dict.size()))
                throw bt::ConfigError("id out of range");
            return kExitOk;
        }

        if (encode_cmd->parsed()) {
            const auto dict = load_dictionary(enc_dict);
            const auto panel =
                bt::assign_frequencies(bt::encode(dict, enc_id), f_low, f_high, duty);
            bt::Json cells = bt::Json::array();
            for (int r = 0; r < panel.grid_size; ++r)
                for (int c = 0; c < panel.grid_size; ++c) {
                    const auto& w = panel.at(r, c);
                    cells.push_back(bt::Json{{"row", r},
                                             {"col", c},
                                             {"frequency", w.frequency},
                                             {"phase", w.phase},
                                             {"duty", w.duty},
                                             {"amplitude", w.amplitude}});
                }
            const bt::Json j{{"id", enc_id},
                             {"grid_size", panel.grid_size},
                             {"f_low", f_low},
                             {"f_high", f_high},
                             {"cells", cells}};
            if (enc_out.empty())
                std::cout << j.dump(2) << "\n";
            else
                bt::save_json_file(j, enc_out);
            return kExitOk;
        }

        if (render_cmd->parsed()) {
            const auto dict = load_dictionary(ren_dict);
            bt::CameraModel camera;
            if (!ren_camera.empty()) camera = bt::camera_from_json(bt::load_json_file(ren_camera));
            bt::NoiseModel noise;
            if (!ren_noise.empty()) noise = bt::noise_from_json(bt::load_json_file(ren_noise));
            bt::ScenePose pose{distance, yaw, marker_side, roll};
            const auto panel = bt::assign_frequencies(bt::encode(dict, ren_id), f_low, f_high,
                                                      duty, phase_low, phase_high);
            bt::write_pgm(bt::render_frame(camera, pose, panel, t0, noise), ren_out);
            return kExitOk;
        }

        if (detect_cmd->parsed()) {
            const auto dict = load_dictionary(det_dict);
            const auto frame = bt::read_pgm(det_image);
            bt::DetectorConfig config;
            if (!det_config.empty())
                config = bt::detector_config_from_json(bt::load_json_file(det_config));
            config.debug_dir = det_debug;
            if (!det_debug.empty()) std::filesystem::create_directories(det_debug);
            bt::CameraModel camera;
            if (!det_camera.empty()) camera = bt::camera_from_json(bt::load_json_file(det_camera));

            const auto result = bt::detect(frame, dict, config);
            const auto pose =
                bt::decompose(bt::homography_from_quad(result.quad, det_marker_side), camera);
            const bt::Json j{{"id", result.id},
                             {"rotation_deg", result.rotation_deg},
                             {"polarity_inverted", result.polarity_inverted},
                             {"quad", quad_json(result.quad)},
                             {"pose", pose_json(pose)}};
            std::cout << j.dump(2) << "\n";
            return kExitOk;
        }

        if (sweep_cmd->parsed()) {
            const auto spec = bt::sweep_spec_from_json(bt::load_json_file(sweep_spec_path),
                                                       dirname_of(sweep_spec_path));
            const int threads = sweep_serial ? 1 : sweep_threads;
            const auto stats = bt::run_sweep(spec, threads);
            const std::string csv = bt::stats_to_csv(stats);
            if (sweep_csv.empty())
                std::cout << csv;
            else
                bt::write_text_file(sweep_csv, csv);
            if (!sweep_svg.empty()) {
                const std::string label = spec.variable == bt::SweepSpec::Variable::distance
                                              ? "distance [m]"
                                              : "yaw [deg]";
                bt::write_text_file(sweep_svg, bt::stats_to_svg(stats, label));
            }
            return kExitOk;
        }

        if (localize_cmd->parsed()) {
            const auto dict = load_dictionary(loc_dict);
            const auto frame = bt::read_pgm(loc_image);
            const auto map = bt::marker_map_from_json(bt::load_json_file(loc_map));
            bt::DetectorConfig config;
            if (!loc_config.empty())
                config = bt::detector_config_from_json(bt::load_json_file(loc_config));
            bt::CameraModel camera;
            if (!loc_camera.empty()) camera = bt::camera_from_json(bt::load_json_file(loc_camera));

            const auto result = bt::detect(frame, dict, config);
            const auto it = map.entries.find(result.id);
            if (it == map.entries.end())
                throw bt::UnknownMarker("marker " + std::to_string(result.id) + " not in map");
            const auto pose =
                bt::decompose(bt::homography_from_quad(result.quad, it->second.marker_side),
                              camera);
            const bt::Vec3 position = bt::localize(result, pose, map);
            const bt::Json j{{"marker_id", result.id},
                             {"camera_position",
                              bt::Json::array({position.x(), position.y(), position.z()})},
                             {"pose", pose_json(pose)}};
            std::cout << j.dump(2) << "\n";
            return kExitOk;
        }
    } catch (const bt::RecognitionFailed& e) {
        std::cerr << "recognition failed at " << bt::stage_name(e.stage) << ": " << e.cause
                  << "\n";
        return kExitRecognition;
    } catch (const bt::DetectionFailure& e) {
        std::cerr << "recognition failed at " << bt::stage_name(e.stage) << ": " << e.what()
                  << "\n";
        return kExitRecognition;
    } catch (const bt::UnknownMarker& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRecognition;
    } catch (const bt::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
