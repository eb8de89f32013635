#pragma once

#include <algorithm>
#include <vector>

#include "evla/event.hpp"
#include "evla/rng.hpp"
#include "evla/windowing.hpp"

namespace evla::test {

/// In-bounds events with sorted random timestamps in [0, t_max].
inline std::vector<Event> random_events(Rng& rng, std::size_t count,
                                        const SensorGeometry& geometry, std::uint64_t t_max) {
    std::vector<std::uint64_t> times(count);
    for (auto& t : times) t = rng.uniform_below(t_max + 1);
    std::sort(times.begin(), times.end());
    std::vector<Event> events(count);
    for (std::size_t i = 0; i < count; ++i) {
        events[i].t = times[i];
        events[i].x = static_cast<std::uint16_t>(rng.uniform_below(geometry.width));
        events[i].y = static_cast<std::uint16_t>(rng.uniform_below(geometry.height));
        events[i].p = rng.uniform() < 0.5 ? Polarity::Off : Polarity::On;
    }
    return events;
}

inline EventStream random_stream(Rng& rng, std::size_t count, const SensorGeometry& geometry,
                                 std::uint64_t t_max) {
    return validate_stream(random_events(rng, count, geometry, t_max), geometry);
}

/// Brute-force oracle: filter t <= t_e, keep the last n.
inline std::vector<Event> oracle_recent_count(std::span<const Event> events, std::uint64_t t_e,
                                              std::size_t n) {
    std::vector<Event> prefix;
    for (const Event& e : events) {
        if (e.t <= t_e) prefix.push_back(e);
    }
    if (prefix.size() > n) prefix.erase(prefix.begin(), prefix.end() - static_cast<long>(n));
    return prefix;
}

/// Brute-force oracle: keep events in (t_e - delta, t_e].
inline std::vector<Event> oracle_duration(std::span<const Event> events, std::uint64_t t_e,
                                          std::uint64_t delta) {
    std::vector<Event> out;
    for (const Event& e : events) {
        const bool above = delta > t_e || e.t > t_e - delta;  // t > t_e - delta
        if (above && e.t <= t_e) out.push_back(e);
    }
    return out;
}

inline std::vector<Event> to_vector(const Window& w) {
    auto span = w.events();
    return {span.begin(), span.end()};
}

}  // namespace evla::test
