#include "blinktag/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "blinktag/errors.hpp"
#include "blinktag/rng.hpp"

namespace blinktag {

bool RecognitionStats::operator==(const RecognitionStats& o) const {
    if (per_value.size() != o.per_value.size()) return false;
    for (std::size_t i = 0; i < per_value.size(); ++i) {
        const ValueStats& a = per_value[i];
        const ValueStats& b = o.per_value[i];
        if (a.value != b.value || a.trials != b.trials || a.successes != b.successes ||
            a.fail_binarize != b.fail_binarize || a.fail_quad != b.fail_quad ||
            a.fail_bands != b.fail_bands || a.fail_decode != b.fail_decode)
            return false;
    }
    return true;
}

namespace {

enum class Outcome : std::uint8_t { success, binarize, quad, bands, decode };

Outcome bucket_for(Stage stage) {
    switch (stage) {
        case Stage::binarize:
        case Stage::close:
            return Outcome::binarize;
        case Stage::find_quad:
            return Outcome::quad;
        case Stage::measure_cells:
            return Outcome::bands;
        case Stage::reconstruct:
        case Stage::decode:
            return Outcome::decode;
    }
    return Outcome::decode;
}

void validate_spec(const SweepSpec& spec) {
    if (spec.values.empty()) throw ConfigError("sweep has no values");
    if (spec.trials_per_value < 1) throw ConfigError("trials_per_value must be >= 1");
    if (spec.f_low <= 0 || spec.f_low >= spec.f_high)
        throw ConfigError("need 0 < f_low < f_high");
    if (spec.duty <= 0 || spec.duty >= 1) throw ConfigError("duty must be in (0,1)");
    if (spec.marker_id < 0 || spec.marker_id >= spec.dictionary.size())
        throw ConfigError("marker_id out of dictionary range");
    const double w_low = band_width(spec.camera, spec.f_low);
    if (w_low > spec.camera.height / 2.0)
        throw ConfigError("f_low too slow: its half-period exceeds half the frame");
    for (double v : spec.values) {
        ScenePose pose = spec.base_pose;
        (spec.variable == SweepSpec::Variable::distance ? pose.distance : pose.yaw_deg) = v;
        if (pose.distance <= 0) throw ConfigError("swept distance must be positive");
        if (std::abs(pose.yaw_deg) >= 90) throw ConfigError("|yaw| must stay below 90 degrees");
    }
}

}  // namespace

RecognitionStats run_sweep(const SweepSpec& spec, int threads) {
    validate_spec(spec);

    const BlinkAssignment panel = assign_frequencies(
        encode(spec.dictionary, spec.marker_id), spec.f_low, spec.f_high, spec.duty);

    DetectorConfig detector = spec.detector;
    detector.expected_frequencies = std::make_pair(spec.f_low, spec.f_high);
    detector.frame_scan_time = spec.camera.frame_scan_time;
    detector.debug_dir.clear();

    const int n_values = static_cast<int>(spec.values.size());
    const long long total = static_cast<long long>(n_values) * spec.trials_per_value;
    std::vector<Outcome> outcomes(total);

    // Every trial is seeded from (spec.seed, value index, trial index), so
    // the outcome vector is independent of how trials are scheduled.
    auto run_trial = [&](long long flat) {
        const int value_idx = static_cast<int>(flat / spec.trials_per_value);
        const int trial_idx = static_cast<int>(flat % spec.trials_per_value);
        ScenePose pose = spec.base_pose;
        (spec.variable == SweepSpec::Variable::distance ? pose.distance : pose.yaw_deg) =
            spec.values[value_idx];

        Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(value_idx),
                         static_cast<std::uint64_t>(trial_idx)));
        const double t0 = rng.uniform() * (1.0 / spec.f_low);
        NoiseModel noise = spec.noise;
        noise.rng_seed = rng.bits();

        const Frame frame = render_frame(spec.camera, pose, panel, t0, noise);
        try {
            const DetectionResult result = detect(frame, spec.dictionary, detector);
            outcomes[flat] =
                result.id == spec.marker_id ? Outcome::success : Outcome::decode;
        } catch (const RecognitionFailed& e) {
            outcomes[flat] = bucket_for(e.stage);
        } catch (const DetectionFailure& e) {
            outcomes[flat] = bucket_for(e.stage);
        }
    };

    int n_threads = threads;
    if (n_threads == 0)
        n_threads = std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<int>(std::min<long long>(n_threads, total));

    if (n_threads <= 1) {
        for (long long i = 0; i < total; ++i) run_trial(i);
    } else {
        std::exception_ptr first_error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        const long long chunk = (total + n_threads - 1) / n_threads;
        for (int k = 0; k < n_threads; ++k) {
            const long long begin = k * chunk;
            const long long end = std::min(total, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([&, begin, end] {
                try {
                    for (long long i = begin; i < end; ++i) run_trial(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    RecognitionStats stats;
    stats.per_value.resize(n_values);
    for (int v = 0; v < n_values; ++v) {
        ValueStats& s = stats.per_value[v];
        s.value = spec.values[v];
        s.trials = spec.trials_per_value;
        for (int t = 0; t < spec.trials_per_value; ++t) {
            switch (outcomes[static_cast<long long>(v) * spec.trials_per_value + t]) {
                case Outcome::success: ++s.successes; break;
                case Outcome::binarize: ++s.fail_binarize; break;
                case Outcome::quad: ++s.fail_quad; break;
                case Outcome::bands: ++s.fail_bands; break;
                case Outcome::decode: ++s.fail_decode; break;
            }
        }
    }
    return stats;
}

// ------------------------------------------------------------------- CSV

std::string stats_to_csv(const RecognitionStats& stats) {
    std::string out = "value,trials,successes,rate,fail_binarize,fail_quad,fail_bands,fail_decode\n";
    char buf[192];
    for (const auto& s : stats.per_value) {
        std::snprintf(buf, sizeof buf, "%g,%d,%d,%.6f,%d,%d,%d,%d\n", s.value, s.trials,
                      s.successes, s.rate(), s.fail_binarize, s.fail_quad, s.fail_bands,
                      s.fail_decode);
        out += buf;
    }
    return out;
}

RecognitionStats stats_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) ||
        line != "value,trials,successes,rate,fail_binarize,fail_quad,fail_bands,fail_decode")
        throw IoError("unexpected CSV header");

    RecognitionStats stats;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 8) throw IoError("CSV row needs 8 fields: " + line);
        ValueStats s;
        try {
            s.value = std::stod(fields[0]);
            s.trials = std::stoi(fields[1]);
            s.successes = std::stoi(fields[2]);
            // fields[3] (rate) is derived; re-check instead of storing
            s.fail_binarize = std::stoi(fields[4]);
            s.fail_quad = std::stoi(fields[5]);
            s.fail_bands = std::stoi(fields[6]);
            s.fail_decode = std::stoi(fields[7]);
        } catch (const std::logic_error&) {
            throw IoError("malformed CSV row: " + line);
        }
        if (s.successes + s.fail_binarize + s.fail_quad + s.fail_bands + s.fail_decode !=
            s.trials)
            throw IoError("CSV row buckets do not add up to trials: " + line);
        stats.per_value.push_back(s);
    }
    return stats;
}

// ------------------------------------------------------------------- SVG

std::string stats_to_svg(const RecognitionStats& stats, const std::string& x_label) {
    const double width = 640, height = 400;
    const double ml = 60, mr = 20, mt = 20, mb = 50;  // margins
    const double pw = width - ml - mr, ph = height - mt - mb;

    double x_min = 0, x_max = 1;
    if (!stats.per_value.empty()) {
        x_min = x_max = stats.per_value.front().value;
        for (const auto& s : stats.per_value) {
            x_min = std::min(x_min, s.value);
            x_max = std::max(x_max, s.value);
        }
        if (x_max == x_min) {
            x_min -= 0.5;
            x_max += 0.5;
        }
    }

    auto px = [&](double v) { return ml + (v - x_min) / (x_max - x_min) * pw; };
    auto py = [&](double rate) { return mt + (1.0 - rate) * ph; };

    char buf[256];
    std::string svg;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "viewBox=\"0 0 %.0f %.0f\">\n",
                  width, height, width, height);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // axes
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  ml, mt + ph, ml + pw, mt + ph);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  ml, mt, ml, mt + ph);
    svg += buf;

    // y ticks at 0, 0.5, 1
    for (double r : {0.0, 0.5, 1.0}) {
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>"
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"end\">"
                      "%.1f</text>\n",
                      ml - 4, py(r), ml, py(r), ml - 8, py(r) + 4, r);
        svg += buf;
    }

    // x ticks at every swept value
    for (const auto& s : stats.per_value) {
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>"
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\">"
                      "%g</text>\n",
                      px(s.value), mt + ph, px(s.value), mt + ph + 4, px(s.value), mt + ph + 18,
                      s.value);
        svg += buf;
    }

    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"14\" text-anchor=\"middle\">"
                  "%s</text>\n",
                  ml + pw / 2, height - 10, x_label.c_str());
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"14\" y=\"%.1f\" font-size=\"14\" text-anchor=\"middle\" "
                  "transform=\"rotate(-90 14 %.1f)\">recognition rate</text>\n",
                  mt + ph / 2, mt + ph / 2);
    svg += buf;

    if (!stats.per_value.empty()) {
        svg += "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
        for (const auto& s : stats.per_value) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.value), py(s.rate()));
            svg += buf;
        }
        svg += "\"/>\n";
        for (const auto& s : stats.per_value) {
            std::snprintf(buf, sizeof buf,
                          "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"#1f6fb2\"/>\n",
                          px(s.value), py(s.rate()));
            svg += buf;
        }
    }
    svg += "</svg>\n";
    return svg;
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace blinktag
