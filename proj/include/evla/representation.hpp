#pragma once

#include <cstdint>
#include <vector>

#include "evla/event.hpp"
#include "evla/windowing.hpp"

namespace evla {

/// Per-pixel event tally, polarity-agnostic.
struct CountMap {
    SensorGeometry geometry;
    std::vector<std::uint32_t> values;  // row-major, height x width

    std::uint32_t at(std::uint16_t x, std::uint16_t y) const {
        return values[std::size_t(y) * geometry.width + x];
    }
};

/// Per-pixel polarity sum (ON events +1, OFF events -1).
struct SumMap {
    SensorGeometry geometry;
    std::vector<std::int32_t> values;

    std::int32_t at(std::uint16_t x, std::uint16_t y) const {
        return values[std::size_t(y) * geometry.width + x];
    }
};

/// Min-max normalized single-channel map in [0, 1].
struct NormalizedMap {
    SensorGeometry geometry;
    std::vector<float> values;

    float at(std::uint16_t x, std::uint16_t y) const {
        return values[std::size_t(y) * geometry.width + x];
    }
};

/// Three-channel event frame in [0, 1] (demosaiced map), row-major HxWx3.
struct EventFrame {
    SensorGeometry geometry;
    std::vector<float> values;

    float at(std::uint16_t x, std::uint16_t y, int c) const {
        return values[(std::size_t(y) * geometry.width + x) * 3 + c];
    }
};

/// exp(-(t_e - t_last)/tau) per pixel; 0 where no events fired.
struct TimeSurface {
    SensorGeometry geometry;
    std::uint64_t tau_us = 0;
    std::vector<float> values;

    float at(std::uint16_t x, std::uint16_t y) const {
        return values[std::size_t(y) * geometry.width + x];
    }
};

/// Temporally binned event tensor, bins x height x width, polarity-signed.
struct VoxelGrid {
    SensorGeometry geometry;
    std::uint32_t bins = 1;
    std::vector<float> values;

    float at(std::uint32_t b, std::uint16_t x, std::uint16_t y) const {
        return values[(std::size_t(b) * geometry.height + y) * geometry.width + x];
    }
};

/// Counts window events per pixel regardless of polarity.
CountMap accumulate_count(const Window& window, const SensorGeometry& geometry);

/// Sums signed polarities per pixel (ON/OFF cancellation).
SumMap accumulate_sum(const Window& window, const SensorGeometry& geometry);

/// (v - min) / (max - min); a constant map yields all zeros.
NormalizedMap minmax_normalize(const CountMap& map);
NormalizedMap minmax_normalize(const SumMap& map);
NormalizedMap minmax_normalize(const SensorGeometry& geometry, std::span<const float> values);

/// Bilinear demosaic of a Bayer-mosaic map into three channels.
///
/// Each output channel is the normalized 3x3 convolution of the mosaic
/// restricted to that channel's sites (weights 1-2-4; borders renormalize
/// over the in-bounds taps), so constants are preserved exactly and the
/// output stays in [0, 1].
EventFrame demosaic(const NormalizedMap& map, const SensorGeometry& geometry);

/// Exponential-decay surface anchored at t_e. Throws InvalidTau if tau <= 0.
TimeSurface time_surface(const Window& window, std::uint64_t t_e, std::uint64_t tau_us,
                         const SensorGeometry& geometry);

/// Polarity-signed bilinear temporal binning over the window span.
///
/// Each event splits |mass| = 1 between its two nearest bins; a window with
/// zero time span (or bins = 1) puts all mass in bin 0.
VoxelGrid voxel_grid(const Window& window, std::uint32_t bins, const SensorGeometry& geometry);

}  // namespace evla
