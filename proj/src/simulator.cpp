#include "evla/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "evla/parallel.hpp"
#include "evla/rng.hpp"

namespace evla {

namespace {

double luminance(const std::vector<float>& rgb, std::size_t pixel) {
    const float* p = rgb.data() + pixel * 3;
    return (static_cast<double>(p[0]) + p[1] + p[2]) / 3.0;
}

// linear interpolation between the two frames bracketing t
void interpolate_frame(const FrameSequence& seq, double t_us, std::vector<float>& out) {
    const auto& frames = seq.frames;
    std::size_t k = 0;
    while (k + 2 < frames.size() && static_cast<double>(frames[k + 1].t_us) < t_us) ++k;
    const double t0 = static_cast<double>(frames[k].t_us);
    const double t1 = static_cast<double>(frames[k + 1].t_us);
    const double alpha = std::clamp((t_us - t0) / (t1 - t0), 0.0, 1.0);
    out.resize(frames[k].rgb.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>((1.0 - alpha) * frames[k].rgb[i] + alpha * frames[k + 1].rgb[i]);
    }
}

}  // namespace

FrameSequence synthetic_scene(const SceneConfig& config) {
    validate_geometry(SensorGeometry{config.width, config.height, BayerOrigin::RGGB});
    if (config.fps <= 0.0 || config.duration_s <= 0.0) {
        throw InvalidConfig("scene requires positive fps and duration");
    }
    if (config.background < 0.0 || config.background > 1.0 || config.object_intensity < 0.0 ||
        config.object_intensity > 1.0) {
        throw InvalidConfig("scene intensities must lie in [0, 1]");
    }
    if (config.object_size < 1) throw InvalidConfig("object size must be >= 1 pixel");

    const std::size_t n_frames =
        static_cast<std::size_t>(std::floor(config.duration_s * config.fps)) + 1;
    const double frame_period_us = 1e6 / config.fps;

    // linear motion reaches its extremes at the endpoints
    for (const double t : {0.0, config.duration_s}) {
        const double ox = config.object_x0 + config.velocity_x * t;
        const double oy = config.object_y0 + config.velocity_y * t;
        if (std::llround(ox) < 0 || std::llround(oy) < 0 ||
            std::llround(ox) + config.object_size > config.width ||
            std::llround(oy) + config.object_size > config.height) {
            throw ObjectOutOfBounds("object leaves the frame during the configured duration");
        }
    }

    FrameSequence seq;
    seq.geometry = SensorGeometry{config.width, config.height, BayerOrigin::RGGB};
    seq.frames.reserve(n_frames);
    const auto bg = static_cast<float>(config.background);
    const auto fg = static_cast<float>(config.object_intensity);
    for (std::size_t k = 0; k < n_frames; ++k) {
        Frame frame;
        frame.t_us = static_cast<std::uint64_t>(std::llround(k * frame_period_us));
        frame.rgb.assign(std::size_t(config.width) * config.height * 3, bg);
        const double ts = static_cast<double>(frame.t_us) * 1e-6;
        const long x0 = std::llround(config.object_x0 + config.velocity_x * ts);
        const long y0 = std::llround(config.object_y0 + config.velocity_y * ts);
        for (long y = y0; y < y0 + config.object_size; ++y) {
            float* row = frame.rgb.data() + (std::size_t(y) * config.width + x0) * 3;
            std::fill(row, row + std::size_t(config.object_size) * 3, fg);
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

FrameSequence scale_intensity(const FrameSequence& seq, double factor) {
    FrameSequence out = seq;
    for (auto& frame : out.frames) {
        for (auto& v : frame.rgb) v = static_cast<float>(v * factor);
    }
    return out;
}

EventStream generate_events(const FrameSequence& seq, double contrast_threshold,
                            double intensity_floor) {
    if (contrast_threshold <= 0.0) throw NonPositiveThreshold();
    if (seq.frames.size() < 2) throw InvalidConfig("event generation needs >= 2 frames");
    const std::uint16_t width = seq.geometry.width;
    const std::uint16_t height = seq.geometry.height;
    const std::size_t n_frames = seq.frames.size();

    // per-row event buffers keep the output independent of the worker count
    std::vector<std::vector<Event>> row_events(height);
    parallel_chunks(height, [&](std::size_t row_begin, std::size_t row_end) {
        std::vector<double> log_prev(width), log_cur(width);
        for (std::size_t y = row_begin; y < row_end; ++y) {
            auto& out = row_events[y];
            std::vector<double> ref(width);
            for (std::uint16_t x = 0; x < width; ++x) {
                log_prev[x] = std::log(
                    luminance(seq.frames[0].rgb, std::size_t(y) * width + x) + intensity_floor);
                ref[x] = log_prev[x];
            }
            for (std::size_t k = 1; k < n_frames; ++k) {
                const double t0 = static_cast<double>(seq.frames[k - 1].t_us);
                const double t1 = static_cast<double>(seq.frames[k].t_us);
                for (std::uint16_t x = 0; x < width; ++x) {
                    log_cur[x] = std::log(
                        luminance(seq.frames[k].rgb, std::size_t(y) * width + x) +
                        intensity_floor);
                    const double l0 = log_prev[x];
                    const double l1 = log_cur[x];
                    if (l1 > l0) {
                        while (ref[x] + contrast_threshold <= l1) {
                            const double level = ref[x] + contrast_threshold;
                            const double tc = t0 + (level - l0) / (l1 - l0) * (t1 - t0);
                            out.push_back(Event{x, static_cast<std::uint16_t>(y),
                                                static_cast<std::uint64_t>(std::llround(tc)),
                                                Polarity::On});
                            ref[x] = level;
                        }
                    } else if (l1 < l0) {
                        while (ref[x] - contrast_threshold >= l1) {
                            const double level = ref[x] - contrast_threshold;
                            const double tc = t0 + (level - l0) / (l1 - l0) * (t1 - t0);
                            out.push_back(Event{x, static_cast<std::uint16_t>(y),
                                                static_cast<std::uint64_t>(std::llround(tc)),
                                                Polarity::Off});
                            ref[x] = level;
                        }
                    }
                    log_prev[x] = l1;
                }
            }
        }
    });

    std::vector<Event> events;
    std::size_t total = 0;
    for (const auto& row : row_events) total += row.size();
    events.reserve(total);
    for (auto& row : row_events) {
        events.insert(events.end(), row.begin(), row.end());
    }
    // ties keep row-major pixel order, then per-pixel emission order
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return validate_stream(std::move(events), seq.geometry);
}

Frame apply_exposure_blur(const FrameSequence& seq, std::uint64_t t_capture_us,
                          double exposure_ms) {
    if (seq.frames.size() < 2) throw InvalidConfig("blur needs >= 2 frames");
    if (exposure_ms < 0.0) throw InvalidConfig("exposure must be non-negative");
    const double b = static_cast<double>(t_capture_us);
    const double a = b - exposure_ms * 1000.0;
    if (a < static_cast<double>(seq.start_us()) || b > static_cast<double>(seq.end_us())) {
        throw ExposureOutsideSequence("exposure window [" + std::to_string(a) + ", " +
                                      std::to_string(b) + "] us exceeds the sequence span");
    }

    Frame out;
    out.t_us = t_capture_us;
    if (exposure_ms == 0.0) {
        interpolate_frame(seq, b, out.rgb);
        return out;
    }

    // exact integral of the piecewise-linear signal: trapezoid per segment
    const std::size_t n_values = seq.frames.front().rgb.size();
    std::vector<double> acc(n_values, 0.0);
    std::vector<float> fu, fv;
    for (std::size_t k = 0; k + 1 < seq.frames.size(); ++k) {
        const double t0 = static_cast<double>(seq.frames[k].t_us);
        const double t1 = static_cast<double>(seq.frames[k + 1].t_us);
        const double u = std::max(t0, a);
        const double v = std::min(t1, b);
        if (v <= u) continue;
        interpolate_frame(seq, u, fu);
        interpolate_frame(seq, v, fv);
        const double hw = 0.5 * (v - u);
        for (std::size_t i = 0; i < n_values; ++i) {
            acc[i] += hw * (static_cast<double>(fu[i]) + fv[i]);
        }
    }
    out.rgb.resize(n_values);
    const double inv = 1.0 / (b - a);
    for (std::size_t i = 0; i < n_values; ++i) out.rgb[i] = static_cast<float>(acc[i] * inv);
    return out;
}

RgbImage apply_low_light(const Frame& frame, const SensorGeometry& geometry,
                         const DegradeConfig& config) {
    if (config.light_scale < 0.0 || config.light_scale > 1.0) {
        throw InvalidConfig("light_scale must lie in [0, 1]");
    }
    if (config.exposure_ms < 0.0) throw InvalidConfig("exposure must be non-negative");
    if (config.black_level < 0 || config.black_level > 255) {
        throw InvalidConfig("black_level must lie in [0, 255]");
    }
    if (config.noise_std < 0.0) throw InvalidConfig("noise_std must be non-negative");

    RgbImage out;
    out.width = geometry.width;
    out.height = geometry.height;
    out.data.resize(frame.rgb.size());
    Rng rng(config.seed);
    for (std::size_t i = 0; i < frame.rgb.size(); ++i) {
        double v = static_cast<double>(frame.rgb[i]) * config.light_scale * 255.0;
        if (config.noise_std > 0.0) v += rng.normal() * config.noise_std;
        long q = std::llround(v);
        q = std::clamp(q, 0L, 255L);
        if (q < config.black_level) q = 0;
        out.data[i] = static_cast<std::uint8_t>(q);
    }
    return out;
}

double mean_grayscale(const RgbImage& image) {
    double sum = 0.0;
    for (std::size_t i = 0; i < image.data.size(); i += 3) {
        sum += (static_cast<double>(image.data[i]) + image.data[i + 1] + image.data[i + 2]) / 3.0;
    }
    return sum / static_cast<double>(image.pixel_count());
}

double clipped_fraction(const RgbImage& image) {
    std::size_t clipped = 0;
    for (std::size_t i = 0; i < image.data.size(); i += 3) {
        if (image.data[i] == 0 && image.data[i + 1] == 0 && image.data[i + 2] == 0) ++clipped;
    }
    return static_cast<double>(clipped) / static_cast<double>(image.pixel_count());
}

double edge_gradient_energy(const Frame& frame, const SensorGeometry& geometry) {
    const int w = geometry.width;
    const int h = geometry.height;
    std::vector<double> gray(std::size_t(w) * h);
    for (std::size_t i = 0; i < gray.size(); ++i) {
        const float* p = frame.rgb.data() + i * 3;
        gray[i] = (static_cast<double>(p[0]) + p[1] + p[2]) / 3.0;
    }
    double energy = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double g = gray[std::size_t(y) * w + x];
            if (x + 1 < w) {
                const double d = gray[std::size_t(y) * w + x + 1] - g;
                energy += d * d;
            }
            if (y + 1 < h) {
                const double d = gray[std::size_t(y + 1) * w + x] - g;
                energy += d * d;
            }
        }
    }
    return energy;
}

}  // namespace evla
