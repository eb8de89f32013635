#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evla/errors.hpp"

namespace evla {

/// Sign of the logged brightness change: +1 (ON) or -1 (OFF).
enum class Polarity : std::int8_t { Off = -1, On = +1 };

inline int polarity_sign(Polarity p) { return static_cast<int>(p); }

/// 2x2 color filter layout, named by the top-left pixel pair rows.
enum class BayerOrigin : std::uint8_t { RGGB = 0, BGGR = 1, GRBG = 2, GBRG = 3 };

std::string to_string(BayerOrigin origin);
BayerOrigin bayer_origin_from_string(const std::string& name);

/// One asynchronous brightness-change sample.
struct Event {
    std::uint16_t x = 0;  // pixel column, 0-based
    std::uint16_t y = 0;  // pixel row, 0-based
    std::uint64_t t = 0;  // timestamp, microseconds
    Polarity p = Polarity::On;

    friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
    std::uint16_t width = 346;
    std::uint16_t height = 260;
    BayerOrigin bayer_origin = BayerOrigin::RGGB;

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

void validate_geometry(const SensorGeometry& geometry);

/// Timestamp-ordered, bounds-checked event container.
///
/// Immutable after construction; construction goes through validate_stream
/// so a live EventStream always satisfies its invariants.
class EventStream {
public:
    EventStream() = default;

    std::span<const Event> events() const { return events_; }
    const SensorGeometry& geometry() const { return geometry_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }
    const Event& operator[](std::size_t i) const { return events_[i]; }

private:
    friend EventStream validate_stream(std::vector<Event> events, const SensorGeometry& geometry);
    EventStream(std::vector<Event> events, const SensorGeometry& geometry)
        : events_(std::move(events)), geometry_(geometry) {}

    std::vector<Event> events_;
    SensorGeometry geometry_{};
};

/// Checks ordering and bounds; rejects the whole input on the first violation.
///
/// Throws UnsortedTimestamps (with the first offending index) or OutOfBounds.
/// Equal timestamps are allowed; input order is preserved.
EventStream validate_stream(std::vector<Event> events, const SensorGeometry& geometry);

/// Events per second over (t0, t1]. Throws EmptyInterval unless t1 > t0.
double event_rate(const EventStream& stream, std::uint64_t t0, std::uint64_t t1);

/// Index of the first event with t > query (upper bound over the sorted stream).
std::size_t upper_bound_index(std::span<const Event> events, std::uint64_t query);

}  // namespace evla
