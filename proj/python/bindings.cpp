#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "blinktag/codec.hpp"
#include "blinktag/detector.hpp"
#include "blinktag/errors.hpp"
#include "blinktag/image_io.hpp"
#include "blinktag/json_io.hpp"
#include "blinktag/optics.hpp"
#include "blinktag/pose.hpp"
#include "blinktag/sweep.hpp"

namespace py = pybind11;
using namespace blinktag;

namespace {

py::array_t<std::uint8_t> pattern_to_array(const MarkerPattern& p) {
    py::array_t<std::uint8_t> out({p.grid_size, p.grid_size});
    std::copy(p.bits.begin(), p.bits.end(), out.mutable_data());
    return out;
}

MarkerPattern array_to_pattern(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1))
        throw py::value_error("pattern must be a square 2-D uint8 array");
    const int n = static_cast<int>(a.shape(0));
    std::vector<std::uint8_t> bits(a.data(), a.data() + n * n);
    for (auto& b : bits) b = b ? 1 : 0;
    return make_pattern(n, std::move(bits));
}

py::array_t<std::uint8_t> frame_to_array(const Frame& f) {
    py::array_t<std::uint8_t> out({f.height, f.width});
    std::copy(f.pixels.begin(), f.pixels.end(), out.mutable_data());
    return out;
}

Frame array_to_frame(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw py::value_error("frame must be a 2-D uint8 array");
    Frame f;
    f.height = static_cast<int>(a.shape(0));
    f.width = static_cast<int>(a.shape(1));
    f.pixels.assign(a.data(), a.data() + f.width * f.height);
    return f;
}

py::array_t<double> quad_to_array(const Quad& q) {
    py::array_t<double> out({4, 2});
    auto* d = out.mutable_data();
    for (int i = 0; i < 4; ++i) {
        d[2 * i] = q.corners[i].x();
        d[2 * i + 1] = q.corners[i].y();
    }
    return out;
}

Quad array_to_quad(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(0) != 4 || a.shape(1) != 2)
        throw py::value_error("quad must be a 4x2 array");
    Quad q;
    for (int i = 0; i < 4; ++i) q.corners[i] = Vec2(a.data()[2 * i], a.data()[2 * i + 1]);
    return q;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "LED blink marker codec, rolling-shutter simulator and detector";

    static py::exception<RecognitionFailed> recognition_error(m, "RecognitionError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const RecognitionFailed& e) {
            PyErr_SetString(recognition_error.ptr(), e.what());
        } catch (const DetectionFailure& e) {
            PyErr_SetString(recognition_error.ptr(), e.what());
        } catch (const ConfigError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    py::class_<Dictionary>(m, "Dictionary")
        .def_readonly("grid_size", &Dictionary::grid_size)
        .def_readonly("min_hamming", &Dictionary::min_hamming)
        .def_readonly("seed", &Dictionary::seed)
        .def("__len__", &Dictionary::size)
        .def_property_readonly("patterns",
                               [](const Dictionary& d) {
                                   py::list out;
                                   for (const auto& p : d.patterns)
                                       out.append(pattern_to_array(p));
                                   return out;
                               })
        .def("to_json", [](const Dictionary& d) { return dictionary_to_json(d).dump(2); })
        .def_static("from_json", [](const std::string& s) {
            return dictionary_from_json(Json::parse(s));
        });

    py::class_<DecodeResult>(m, "DecodeResult")
        .def_readonly("id", &DecodeResult::id)
        .def_readonly("rotation_deg", &DecodeResult::rotation_deg);

    py::class_<CameraModel>(m, "CameraModel")
        .def(py::init<>())
        .def_readwrite("width", &CameraModel::width)
        .def_readwrite("height", &CameraModel::height)
        .def_readwrite("fx", &CameraModel::fx)
        .def_readwrite("fy", &CameraModel::fy)
        .def_readwrite("cx", &CameraModel::cx)
        .def_readwrite("cy", &CameraModel::cy)
        .def_readwrite("frame_scan_time", &CameraModel::frame_scan_time)
        .def("intrinsics", &CameraModel::intrinsics);

    py::class_<ScenePose>(m, "ScenePose")
        .def(py::init<>())
        .def_readwrite("distance", &ScenePose::distance)
        .def_readwrite("yaw_deg", &ScenePose::yaw_deg)
        .def_readwrite("marker_side", &ScenePose::marker_side)
        .def_readwrite("roll_deg", &ScenePose::roll_deg);

    py::class_<NoiseModel>(m, "NoiseModel")
        .def(py::init<>())
        .def_readwrite("gaussian_sigma", &NoiseModel::gaussian_sigma)
        .def_readwrite("ambient", &NoiseModel::ambient)
        .def_readwrite("blur_radius", &NoiseModel::blur_radius)
        .def_readwrite("directivity", &NoiseModel::directivity)
        .def_readwrite("rng_seed", &NoiseModel::rng_seed);

    py::class_<SquareWave>(m, "SquareWave")
        .def(py::init<>())
        .def_readwrite("frequency", &SquareWave::frequency)
        .def_readwrite("phase", &SquareWave::phase)
        .def_readwrite("duty", &SquareWave::duty)
        .def_readwrite("amplitude", &SquareWave::amplitude);

    py::class_<BlinkAssignment>(m, "BlinkAssignment")
        .def_readonly("grid_size", &BlinkAssignment::grid_size)
        .def("at", &BlinkAssignment::at, py::return_value_policy::reference_internal);

    py::class_<Threshold>(m, "Threshold")
        .def_static("otsu", &Threshold::otsu)
        .def_static("fixed", &Threshold::fixed);

    py::class_<DetectorConfig>(m, "DetectorConfig")
        .def(py::init<>())
        .def_readwrite("threshold", &DetectorConfig::threshold)
        .def_readwrite("close_run", &DetectorConfig::close_run)
        .def_readwrite("min_area", &DetectorConfig::min_area)
        .def_readwrite("cell_window_fraction", &DetectorConfig::cell_window_fraction)
        .def_readwrite("expected_frequencies", &DetectorConfig::expected_frequencies)
        .def_readwrite("frame_scan_time", &DetectorConfig::frame_scan_time)
        .def_readwrite("debug_dir", &DetectorConfig::debug_dir);

    py::class_<DetectionResult>(m, "DetectionResult")
        .def_readonly("id", &DetectionResult::id)
        .def_readonly("rotation_deg", &DetectionResult::rotation_deg)
        .def_readonly("polarity_inverted", &DetectionResult::polarity_inverted)
        .def_property_readonly(
            "quad", [](const DetectionResult& r) { return quad_to_array(r.quad); })
        .def_property_readonly(
            "pattern", [](const DetectionResult& r) { return pattern_to_array(r.pattern); });

    py::class_<PoseEstimate>(m, "PoseEstimate")
        .def_readonly("rotation", &PoseEstimate::rotation)
        .def_readonly("translation", &PoseEstimate::translation)
        .def_readonly("distance", &PoseEstimate::distance)
        .def_readonly("yaw_deg", &PoseEstimate::yaw_deg);

    py::class_<MarkerMapEntry>(m, "MarkerMapEntry")
        .def(py::init<>())
        .def_readwrite("position", &MarkerMapEntry::position)
        .def_readwrite("orientation", &MarkerMapEntry::orientation)
        .def_readwrite("marker_side", &MarkerMapEntry::marker_side);

    py::class_<MarkerMap>(m, "MarkerMap")
        .def(py::init<>())
        .def("set", [](MarkerMap& map, int id, const MarkerMapEntry& e) { map.entries[id] = e; })
        .def("__len__", [](const MarkerMap& map) { return map.entries.size(); })
        .def_static("from_json", [](const std::string& s) {
            return marker_map_from_json(Json::parse(s));
        });

    m.def("generate_dictionary", &generate_dictionary, py::arg("grid_size") = kDefaultGridSize,
          py::arg("count") = kDefaultDictCount, py::arg("min_hamming") = kDefaultMinHamming,
          py::arg("seed") = kDefaultDictSeed);
    m.def("encode",
          [](const Dictionary& d, int id) { return pattern_to_array(encode(d, id)); });
    m.def("decode", [](const Dictionary& d, const py::array_t<std::uint8_t,
                                                              py::array::c_style |
                                                                  py::array::forcecast>& a) {
        return decode(d, array_to_pattern(a));
    });
    m.def("rotate", [](const py::array_t<std::uint8_t,
                                         py::array::c_style | py::array::forcecast>& a,
                       int degrees) { return pattern_to_array(rotate(array_to_pattern(a), degrees)); });
    m.def("hamming", [](const py::array_t<std::uint8_t,
                                          py::array::c_style | py::array::forcecast>& a,
                        const py::array_t<std::uint8_t,
                                          py::array::c_style | py::array::forcecast>& b) {
        return hamming(array_to_pattern(a), array_to_pattern(b));
    });
    m.def(
        "assign_frequencies",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
           double f_low, double f_high, double duty, double phase_low, double phase_high) {
            return assign_frequencies(array_to_pattern(a), f_low, f_high, duty, phase_low,
                                      phase_high);
        },
        py::arg("pattern"), py::arg("f_low") = kDefaultFLow, py::arg("f_high") = kDefaultFHigh,
        py::arg("duty") = kDefaultDuty, py::arg("phase_low") = 0.0, py::arg("phase_high") = 0.0);

    m.def("band_width", &band_width, py::arg("camera"), py::arg("frequency_hz"));
    m.def(
        "render_frame",
        [](const CameraModel& camera, const ScenePose& pose, const BlinkAssignment& panel,
           double t0, const NoiseModel& noise) {
            return frame_to_array(render_frame(camera, pose, panel, t0, noise));
        },
        py::arg("camera"), py::arg("pose"), py::arg("panel"), py::arg("t0") = 0.0,
        py::arg("noise") = NoiseModel{});
    m.def("project_corners", [](const CameraModel& camera, const ScenePose& pose) {
        const auto corners = project_corners(camera, pose);
        py::array_t<double> out({4, 2});
        for (int i = 0; i < 4; ++i) {
            out.mutable_data()[2 * i] = corners[i].x();
            out.mutable_data()[2 * i + 1] = corners[i].y();
        }
        return out;
    });

    m.def(
        "detect",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& frame,
           const Dictionary& dict, const DetectorConfig& config) {
            return detect(array_to_frame(frame), dict, config);
        },
        py::arg("frame"), py::arg("dictionary"), py::arg("config") = DetectorConfig{});
    m.def("otsu_level", [](const py::array_t<std::uint8_t, py::array::c_style |
                                                               py::array::forcecast>& frame) {
        return otsu_level(array_to_frame(frame));
    });

    m.def(
        "estimate_pose",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& quad,
           double marker_side, const CameraModel& camera) {
            return decompose(homography_from_quad(array_to_quad(quad), marker_side), camera);
        },
        py::arg("quad"), py::arg("marker_side") = 0.16, py::arg("camera") = CameraModel{});
    m.def("localize", &localize, py::arg("detection"), py::arg("pose"), py::arg("map"));

    m.def(
        "run_sweep_json",
        [](const std::string& spec_json, const std::string& base_dir, int threads) {
            const auto spec = sweep_spec_from_json(Json::parse(spec_json), base_dir);
            return stats_to_csv(run_sweep(spec, threads));
        },
        py::arg("spec_json"), py::arg("base_dir") = std::string("."), py::arg("threads") = 0,
        "Run a recognition sweep from a JSON spec string; returns the CSV text.");

    m.def("read_pgm", [](const std::string& path) { return frame_to_array(read_pgm(path)); });
    m.def("write_pgm",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& frame,
             const std::string& path) { write_pgm(array_to_frame(frame), path); });
}
