#include "evla/event.hpp"

#include <algorithm>

namespace evla {

std::string to_string(BayerOrigin origin) {
    switch (origin) {
        case BayerOrigin::RGGB: return "RGGB";
        case BayerOrigin::BGGR: return "BGGR";
        case BayerOrigin::GRBG: return "GRBG";
        case BayerOrigin::GBRG: return "GBRG";
    }
    return "RGGB";
}

BayerOrigin bayer_origin_from_string(const std::string& name) {
    if (name == "RGGB") return BayerOrigin::RGGB;
    if (name == "BGGR") return BayerOrigin::BGGR;
    if (name == "GRBG") return BayerOrigin::GRBG;
    if (name == "GBRG") return BayerOrigin::GBRG;
    throw InvalidConfig("unknown Bayer origin: " + name);
}

void validate_geometry(const SensorGeometry& geometry) {
    if (geometry.width < 2 || geometry.height < 2) {
        throw InvalidGeometry("sensor geometry must be at least 2x2, got " +
                              std::to_string(geometry.width) + "x" +
                              std::to_string(geometry.height));
    }
}

EventStream validate_stream(std::vector<Event> events, const SensorGeometry& geometry) {
    validate_geometry(geometry);
    std::uint64_t prev_t = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Event& e = events[i];
        if (i > 0 && e.t < prev_t) throw UnsortedTimestamps(i);
        prev_t = e.t;
        if (e.x >= geometry.width || e.y >= geometry.height) throw OutOfBounds(i, e.x, e.y);
    }
    return EventStream(std::move(events), geometry);
}

std::size_t upper_bound_index(std::span<const Event> events, std::uint64_t query) {
    auto it = std::upper_bound(events.begin(), events.end(), query,
                               [](std::uint64_t q, const Event& e) { return q < e.t; });
    return static_cast<std::size_t>(it - events.begin());
}

double event_rate(const EventStream& stream, std::uint64_t t0, std::uint64_t t1) {
    if (t1 <= t0) throw EmptyInterval();
    const auto events = stream.events();
    const std::size_t count = upper_bound_index(events, t1) - upper_bound_index(events, t0);
    const double interval_s = static_cast<double>(t1 - t0) * 1e-6;
    return static_cast<double>(count) / interval_s;
}

}  // namespace evla
