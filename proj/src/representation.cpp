#include "evla/representation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evla {

namespace {

void check_window_geometry(const Window& window, const SensorGeometry& geometry) {
    validate_geometry(geometry);
    if (window.stream && !(window.geometry() == geometry)) {
        throw GeometryMismatch("window stream geometry differs from requested geometry");
    }
}

template <typename T>
NormalizedMap normalize_values(const SensorGeometry& geometry, const std::vector<T>& in) {
    NormalizedMap out{geometry, std::vector<float>(in.size(), 0.0f)};
    if (in.empty()) return out;
    const auto [mn_it, mx_it] = std::minmax_element(in.begin(), in.end());
    const double mn = static_cast<double>(*mn_it);
    const double mx = static_cast<double>(*mx_it);
    if (mx == mn) return out;  // constant map carries no spatial information
    const double range = mx - mn;
    for (std::size_t i = 0; i < in.size(); ++i) {
        out.values[i] = static_cast<float>((static_cast<double>(in[i]) - mn) / range);
    }
    return out;
}

// Channel of a Bayer site for a given origin; pattern is indexed [y&1][x&1].
// 0 = R, 1 = G, 2 = B.
int bayer_channel(BayerOrigin origin, std::uint16_t x, std::uint16_t y) {
    static constexpr int kPattern[4][2][2] = {
        {{0, 1}, {1, 2}},  // RGGB
        {{2, 1}, {1, 0}},  // BGGR
        {{1, 0}, {2, 1}},  // GRBG
        {{1, 2}, {0, 1}},  // GBRG
    };
    return kPattern[static_cast<int>(origin)][y & 1][x & 1];
}

}  // namespace

CountMap accumulate_count(const Window& window, const SensorGeometry& geometry) {
    check_window_geometry(window, geometry);
    CountMap map{geometry, std::vector<std::uint32_t>(geometry.pixel_count(), 0)};
    for (const Event& e : window.events()) {
        ++map.values[std::size_t(e.y) * geometry.width + e.x];
    }
    return map;
}

SumMap accumulate_sum(const Window& window, const SensorGeometry& geometry) {
    check_window_geometry(window, geometry);
    SumMap map{geometry, std::vector<std::int32_t>(geometry.pixel_count(), 0)};
    for (const Event& e : window.events()) {
        map.values[std::size_t(e.y) * geometry.width + e.x] += polarity_sign(e.p);
    }
    return map;
}

NormalizedMap minmax_normalize(const CountMap& map) {
    return normalize_values(map.geometry, map.values);
}

NormalizedMap minmax_normalize(const SumMap& map) {
    return normalize_values(map.geometry, map.values);
}

NormalizedMap minmax_normalize(const SensorGeometry& geometry, std::span<const float> values) {
    return normalize_values(geometry, std::vector<float>(values.begin(), values.end()));
}

EventFrame demosaic(const NormalizedMap& map, const SensorGeometry& geometry) {
    validate_geometry(geometry);
    if (map.values.size() != geometry.pixel_count()) {
        throw GeometryMismatch("map size does not match geometry");
    }
    const int w = geometry.width;
    const int h = geometry.height;

    // 3x3 kernels: cross for green, full for red/blue
    static constexpr double kGreen[3][3] = {{0, 1, 0}, {1, 4, 1}, {0, 1, 0}};
    static constexpr double kRedBlue[3][3] = {{1, 2, 1}, {2, 4, 2}, {1, 2, 1}};

    EventFrame frame{geometry, std::vector<float>(geometry.pixel_count() * 3, 0.0f)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const auto& kernel = (c == 1) ? kGreen : kRedBlue;
                double num = 0.0;
                double den = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= h) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= w) continue;
                        if (bayer_channel(geometry.bayer_origin, std::uint16_t(xx),
                                          std::uint16_t(yy)) != c) {
                            continue;
                        }
                        const double wgt = kernel[dy + 1][dx + 1];
                        num += wgt * map.values[std::size_t(yy) * w + xx];
                        den += wgt;
                    }
                }
                const double v = den > 0.0 ? num / den : 0.0;
                frame.values[(std::size_t(y) * w + x) * 3 + c] =
                    static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return frame;
}

TimeSurface time_surface(const Window& window, std::uint64_t t_e, std::uint64_t tau_us,
                         const SensorGeometry& geometry) {
    if (tau_us == 0) throw InvalidTau();
    check_window_geometry(window, geometry);

    // latest event time per pixel; stream order breaks timestamp ties
    std::vector<std::uint64_t> last(geometry.pixel_count(), 0);
    std::vector<std::uint8_t> seen(geometry.pixel_count(), 0);
    for (const Event& e : window.events()) {
        const std::size_t idx = std::size_t(e.y) * geometry.width + e.x;
        last[idx] = e.t;
        seen[idx] = 1;
    }

    TimeSurface surface{geometry, tau_us, std::vector<float>(geometry.pixel_count(), 0.0f)};
    for (std::size_t i = 0; i < last.size(); ++i) {
        if (!seen[i]) continue;
        if (last[i] > t_e) throw InvalidConfig("time_surface anchor precedes a window event");
        const double age = static_cast<double>(t_e - last[i]);
        surface.values[i] = static_cast<float>(std::exp(-age / static_cast<double>(tau_us)));
    }
    return surface;
}

VoxelGrid voxel_grid(const Window& window, std::uint32_t bins, const SensorGeometry& geometry) {
    if (bins == 0) throw InvalidConfig("voxel grid requires at least one bin");
    check_window_geometry(window, geometry);

    VoxelGrid grid{geometry, bins,
                   std::vector<float>(std::size_t(bins) * geometry.pixel_count(), 0.0f)};
    const std::uint64_t t0 = window.span_start_us();
    const std::uint64_t t1 = window.t_query;
    const double span = static_cast<double>(t1 - t0);
    const std::size_t plane = geometry.pixel_count();

    for (const Event& e : window.events()) {
        const std::size_t pix = std::size_t(e.y) * geometry.width + e.x;
        const double sign = static_cast<double>(polarity_sign(e.p));
        if (bins == 1 || span <= 0.0) {
            grid.values[pix] += static_cast<float>(sign);
            continue;
        }
        const double pos = static_cast<double>(e.t - t0) / span * (bins - 1);
        const auto lo = static_cast<std::uint32_t>(pos);
        const double frac = pos - lo;
        grid.values[std::size_t(lo) * plane + pix] += static_cast<float>(sign * (1.0 - frac));
        if (lo + 1 < bins && frac > 0.0) {
            grid.values[std::size_t(lo + 1) * plane + pix] += static_cast<float>(sign * frac);
        }
    }
    return grid;
}

}  // namespace evla
