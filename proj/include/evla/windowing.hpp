#pragma once

#include <cstdint>
#include <span>

#include "evla/event.hpp"

namespace evla {

enum class WindowPolicy : std::uint8_t { RecentCount, Duration };

/// The event subset attached to one query time.
///
/// A window is an index range into its parent stream (no copies); the
/// parent EventStream must outlive every window derived from it.
struct Window {
    const EventStream* stream = nullptr;
    std::size_t begin = 0;
    std::size_t end = 0;              // half-open [begin, end)
    std::uint64_t t_query = 0;        // exposure-end anchor, microseconds
    WindowPolicy policy = WindowPolicy::RecentCount;
    std::uint64_t policy_value = 0;   // N for RecentCount, delta_us for Duration
    bool shortfall = false;           // RecentCount only: fewer than N events existed

    std::span<const Event> events() const {
        return stream ? stream->events().subspan(begin, end - begin)
                      : std::span<const Event>{};
    }
    std::size_t size() const { return end - begin; }
    bool empty() const { return begin == end; }
    const SensorGeometry& geometry() const { return stream->geometry(); }

    /// Start of the window's time span: t_query - delta for duration
    /// windows, the first event's timestamp for recent-count windows
    /// (t_query when empty). Used for temporal normalization and as the
    /// reach diagnostic for recent-count windows.
    std::uint64_t span_start_us() const;

    /// t_query - span_start_us.
    std::uint64_t span_us() const { return t_query - span_start_us(); }
};

/// Last min(N, available) events with t <= t_e, in stream order.
/// Sets the shortfall flag instead of erroring when fewer than N exist.
Window recent_count_window(const EventStream& stream, std::uint64_t t_e, std::size_t n);

/// Events in the half-open interval (t_e - delta, t_e]. delta_us = 0 gives
/// an empty window.
Window duration_window(const EventStream& stream, std::uint64_t t_e, std::uint64_t delta_us);

}  // namespace evla
