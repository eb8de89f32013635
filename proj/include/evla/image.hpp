#pragma once

#include <cstdint>
#include <vector>

#include "evla/errors.hpp"

namespace evla {

/// 8-bit RGB image, row-major HxWx3.
struct RgbImage {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<std::uint8_t> data;

    static RgbImage filled(std::uint16_t w, std::uint16_t h, std::uint8_t r, std::uint8_t g,
                           std::uint8_t b) {
        RgbImage img{w, h, std::vector<std::uint8_t>(std::size_t(w) * h * 3)};
        for (std::size_t i = 0; i < img.data.size(); i += 3) {
            img.data[i] = r;
            img.data[i + 1] = g;
            img.data[i + 2] = b;
        }
        return img;
    }

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    std::uint8_t at(std::uint16_t x, std::uint16_t y, int c) const {
        return data[(std::size_t(y) * width + x) * 3 + c];
    }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Single grayscale image, 8-bit.
struct GrayImage {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<std::uint8_t> data;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

}  // namespace evla
