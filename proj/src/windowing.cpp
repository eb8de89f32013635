#include "evla/windowing.hpp"

namespace evla {

std::uint64_t Window::span_start_us() const {
    if (policy == WindowPolicy::Duration) {
        return policy_value > t_query ? 0 : t_query - policy_value;
    }
    if (empty()) return t_query;
    return (*stream)[begin].t;
}

Window recent_count_window(const EventStream& stream, std::uint64_t t_e, std::size_t n) {
    if (n == 0) throw InvalidConfig("recent-count window requires N >= 1");
    Window w;
    w.stream = &stream;
    w.t_query = t_e;
    w.policy = WindowPolicy::RecentCount;
    w.policy_value = n;
    w.end = upper_bound_index(stream.events(), t_e);
    w.begin = w.end >= n ? w.end - n : 0;
    w.shortfall = w.end < n;
    return w;
}

Window duration_window(const EventStream& stream, std::uint64_t t_e, std::uint64_t delta_us) {
    Window w;
    w.stream = &stream;
    w.t_query = t_e;
    w.policy = WindowPolicy::Duration;
    w.policy_value = delta_us;
    w.end = upper_bound_index(stream.events(), t_e);
    // (t_e - delta, t_e]: events with t > lower start at upper_bound(lower)
    w.begin = delta_us > t_e ? 0 : upper_bound_index(stream.events(), t_e - delta_us);
    return w;
}

}  // namespace evla
