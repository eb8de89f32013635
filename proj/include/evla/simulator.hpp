#pragma once

#include <cstdint>
#include <vector>

#include "evla/event.hpp"
#include "evla/image.hpp"

namespace evla {

/// One rendered frame: capture time plus HxWx3 intensities in [0, 1].
struct Frame {
    std::uint64_t t_us = 0;
    std::vector<float> rgb;
};

/// Timed frame sequence; needs >= 2 frames before events can be generated.
struct FrameSequence {
    SensorGeometry geometry;
    std::vector<Frame> frames;

    std::size_t size() const { return frames.size(); }
    std::uint64_t start_us() const { return frames.front().t_us; }
    std::uint64_t end_us() const { return frames.back().t_us; }
};

/// A constant background with one rectangle moving at constant velocity.
struct SceneConfig {
    std::uint16_t width = 346;
    std::uint16_t height = 260;
    double background = 0.3;        // [0,1]
    double object_intensity = 0.9;  // [0,1]
    std::uint16_t object_size = 40; // square side, pixels
    double object_x0 = 30.0;        // top-left start position
    double object_y0 = 110.0;
    double velocity_x = 40.0;       // pixels per second
    double velocity_y = 0.0;
    double duration_s = 2.0;
    double fps = 30.0;
};

/// Frame-branch degradation: illumination scaling, black clipping and
/// additive Gaussian noise in 8-bit units.
struct DegradeConfig {
    double exposure_ms = 10.0;
    double light_scale = 1.0;   // [0,1]
    int black_level = 0;        // 8-bit floor; quantized values below clip to 0
    double noise_std = 0.0;     // 8-bit units
    std::uint64_t seed = 0;
};

/// Renders the configured scene. The object position is an exact linear
/// function of time; throws ObjectOutOfBounds if it ever leaves the frame.
FrameSequence synthetic_scene(const SceneConfig& config);

/// Uniformly scales all intensities (the illumination analogue of a dimmer).
FrameSequence scale_intensity(const FrameSequence& seq, double factor);

/// Log-intensity threshold-crossing event generation.
///
/// Per pixel, log(I + eps) is linearly interpolated between frames and an
/// event fires at every crossing of +-C from the last reference level; the
/// reference then moves to the crossed level. Events are globally sorted by
/// timestamp (ties keep row-major pixel order) and validated. The luminance
/// driving the model is the RGB channel mean.
EventStream generate_events(const FrameSequence& seq, double contrast_threshold,
                            double intensity_floor = 1e-3);

/// Continuous temporal average of the interpolated sequence over
/// [t_capture - exposure, t_capture]. exposure_ms = 0 returns the
/// interpolated instantaneous frame.
Frame apply_exposure_blur(const FrameSequence& seq, std::uint64_t t_capture_us,
                          double exposure_ms);

/// quantize(clamp(frame * light_scale * 255 + noise)), then values below
/// black_level clip to 0. Deterministic under the config seed.
RgbImage apply_low_light(const Frame& frame, const SensorGeometry& geometry,
                         const DegradeConfig& config);

/// Mean of the 8-bit grayscale (channel mean) over all pixels.
double mean_grayscale(const RgbImage& image);

/// Fraction of pixels whose grayscale is exactly 0.
double clipped_fraction(const RgbImage& image);

/// Sum of squared horizontal plus vertical forward differences of the
/// grayscale; decreases as motion blur spreads edges.
double edge_gradient_energy(const Frame& frame, const SensorGeometry& geometry);

}  // namespace evla
