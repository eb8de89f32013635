#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "evla/image.hpp"
#include "evla/representation.hpp"
#include "evla/windowing.hpp"

namespace evla {

using Rgb = std::array<std::uint8_t, 3>;

/// Polarity-to-color projection for overlays. Defaults follow the usual
/// event-visualization convention: ON red, OFF blue.
struct PolarityColorMap {
    Rgb on_color{255, 0, 0};
    Rgb off_color{0, 0, 255};

    const Rgb& color(Polarity p) const { return p == Polarity::On ? on_color : off_color; }
};

/// Writes the newest event's polarity color onto each pixel that fired;
/// all other pixels stay bit-identical to the source image. Timestamp ties
/// resolve to the latest event in stream order.
RgbImage overlay(const RgbImage& image, const Window& window, const PolarityColorMap& colors);

/// Replaces each image with a zero frame with the given probability
/// (events are left untouched). Deterministic under a fixed seed.
std::vector<std::pair<RgbImage, EventFrame>> image_dropout(
    std::vector<std::pair<RgbImage, EventFrame>> batch, double rate, std::uint64_t seed);

}  // namespace evla
