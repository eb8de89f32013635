#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "evla/windowing.hpp"
#include "helpers.hpp"

using namespace evla;

namespace {

EventStream five_events() {
    std::vector<Event> events;
    for (std::uint64_t t : {10, 20, 30, 40, 50}) {
        events.push_back(Event{3, 4, t, Polarity::On});
    }
    return validate_stream(std::move(events), SensorGeometry{});
}

}  // namespace

TEST_CASE("recent-count keeps the last N events at or before t_e") {
    const auto stream = five_events();
    const auto w = recent_count_window(stream, 45, 2);
    REQUIRE(w.size() == 2);
    CHECK(w.events()[0].t == 30);
    CHECK(w.events()[1].t == 40);
    CHECK_FALSE(w.shortfall);
}

TEST_CASE("recent-count shortfall returns everything available and flags it") {
    const auto stream = five_events();
    const auto w = recent_count_window(stream, 45, 10);
    REQUIRE(w.size() == 4);
    CHECK(w.events().front().t == 10);
    CHECK(w.events().back().t == 40);
    CHECK(w.shortfall);
}

TEST_CASE("recent-count rejects N = 0") {
    const auto stream = five_events();
    CHECK_THROWS_AS(recent_count_window(stream, 45, 0), InvalidConfig);
}

TEST_CASE("duration window keeps (t_e - delta, t_e]") {
    const auto stream = five_events();
    const auto w = duration_window(stream, 50, 25);
    REQUIRE(w.size() == 3);
    CHECK(w.events()[0].t == 30);
    CHECK(w.events()[2].t == 50);
}

TEST_CASE("duration window with delta 0 is empty") {
    const auto stream = five_events();
    const auto w = duration_window(stream, 50, 0);
    CHECK(w.empty());
}

TEST_CASE("duration window spanning before t=0 includes the whole prefix") {
    const auto stream = five_events();
    const auto w = duration_window(stream, 25, 1000);
    REQUIRE(w.size() == 2);
    CHECK(w.events()[0].t == 10);
}

TEST_CASE("random recent-count windows equal the brute-force oracle") {
    Rng rng(7);
    const SensorGeometry geom{};
    const auto stream = test::random_stream(rng, 10'000, geom, 2'000'000);
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint64_t t_e = rng.uniform_below(2'100'000);
        const auto w = recent_count_window(stream, t_e, 2000);
        const auto expected = test::oracle_recent_count(stream.events(), t_e, 2000);
        REQUIRE(w.size() == expected.size());
        CHECK(test::to_vector(w) == expected);
        CHECK(w.shortfall == (expected.size() < 2000));
    }
}

TEST_CASE("random duration windows equal the brute-force oracle") {
    Rng rng(8);
    const SensorGeometry geom{};
    const auto stream = test::random_stream(rng, 10'000, geom, 2'000'000);
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint64_t t_e = rng.uniform_below(2'100'000);
        const std::uint64_t delta = rng.uniform_below(400'000);
        const auto w = duration_window(stream, t_e, delta);
        CHECK(test::to_vector(w) == test::oracle_duration(stream.events(), t_e, delta));
    }
}

TEST_CASE("recent-count windows nest as suffixes when N grows") {
    Rng rng(9);
    const auto stream = test::random_stream(rng, 5000, SensorGeometry{}, 1'000'000);
    for (int trial = 0; trial < 20; ++trial) {
        const std::uint64_t t_e = rng.uniform_below(1'000'000);
        const std::size_t n1 = 1 + rng.uniform_below(300);
        const std::size_t n2 = n1 + rng.uniform_below(300);
        const auto w1 = recent_count_window(stream, t_e, n1);
        const auto w2 = recent_count_window(stream, t_e, n2);
        CHECK(w1.end == w2.end);
        CHECK(w1.begin >= w2.begin);
    }
}

TEST_CASE("duration windows nest when delta grows") {
    Rng rng(10);
    const auto stream = test::random_stream(rng, 5000, SensorGeometry{}, 1'000'000);
    for (int trial = 0; trial < 20; ++trial) {
        const std::uint64_t t_e = rng.uniform_below(1'000'000);
        const std::uint64_t d1 = rng.uniform_below(100'000);
        const std::uint64_t d2 = d1 + rng.uniform_below(100'000);
        const auto w1 = duration_window(stream, t_e, d1);
        const auto w2 = duration_window(stream, t_e, d2);
        CHECK(w1.end == w2.end);
        CHECK(w1.begin >= w2.begin);
    }
}

TEST_CASE("no window contains an event newer than its anchor") {
    Rng rng(12);
    const auto stream = test::random_stream(rng, 5000, SensorGeometry{}, 1'000'000);
    for (int trial = 0; trial < 40; ++trial) {
        const std::uint64_t t_e = rng.uniform_below(1'000'000);
        for (const Event& e : recent_count_window(stream, t_e, 100).events()) CHECK(e.t <= t_e);
        for (const Event& e : duration_window(stream, t_e, 5000).events()) CHECK(e.t <= t_e);
    }
}

TEST_CASE("windowing is deterministic") {
    Rng rng(13);
    const auto stream = test::random_stream(rng, 2000, SensorGeometry{}, 1'000'000);
    const auto a = recent_count_window(stream, 777'777, 500);
    const auto b = recent_count_window(stream, 777'777, 500);
    CHECK(a.begin == b.begin);
    CHECK(a.end == b.end);
    CHECK(a.shortfall == b.shortfall);
}

TEST_CASE("window span diagnostics") {
    const auto stream = five_events();
    const auto rc = recent_count_window(stream, 45, 3);
    CHECK(rc.span_start_us() == 20);
    CHECK(rc.span_us() == 25);
    const auto du = duration_window(stream, 50, 25);
    CHECK(du.span_start_us() == 25);
    const auto empty_rc = recent_count_window(stream, 5, 3);
    CHECK(empty_rc.span_start_us() == 5);
    CHECK(empty_rc.span_us() == 0);
}
