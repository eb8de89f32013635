#include "evla/fusion.hpp"

#include <algorithm>

#include "evla/rng.hpp"

namespace evla {

RgbImage overlay(const RgbImage& image, const Window& window, const PolarityColorMap& colors) {
    if (colors.on_color == colors.off_color) {
        throw InvalidConfig("overlay colors must differ");
    }
    if (window.stream &&
        (image.width != window.geometry().width || image.height != window.geometry().height)) {
        throw GeometryMismatch("image resolution differs from event stream geometry");
    }

    RgbImage out = image;
    // Events are in stream order with non-decreasing timestamps, so the last
    // write per pixel is exactly argmax_t with latest-in-stream tie-breaking.
    for (const Event& e : window.events()) {
        const Rgb& c = colors.color(e.p);
        std::uint8_t* px = out.data.data() + (std::size_t(e.y) * out.width + e.x) * 3;
        px[0] = c[0];
        px[1] = c[1];
        px[2] = c[2];
    }
    return out;
}

std::vector<std::pair<RgbImage, EventFrame>> image_dropout(
    std::vector<std::pair<RgbImage, EventFrame>> batch, double rate, std::uint64_t seed) {
    if (rate < 0.0 || rate > 1.0) throw InvalidRate();
    Rng rng(seed);
    for (auto& [image, events] : batch) {
        if (rng.uniform() < rate) {
            std::fill(image.data.begin(), image.data.end(), std::uint8_t(0));
        }
    }
    return batch;
}

}  // namespace evla
