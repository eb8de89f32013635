#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "evla/event.hpp"
#include "evla/rng.hpp"
#include "helpers.hpp"

using namespace evla;

namespace {
Event ev(std::uint16_t x, std::uint16_t y, std::uint64_t t, Polarity p = Polarity::On) {
    return Event{x, y, t, p};
}
}  // namespace

TEST_CASE("empty input yields an empty valid stream") {
    const auto stream = validate_stream({}, SensorGeometry{});
    CHECK(stream.empty());
    CHECK(stream.geometry().width == 346);
    CHECK(stream.geometry().height == 260);
}

TEST_CASE("unsorted timestamps are rejected with the offending index") {
    std::vector<Event> events{ev(0, 0, 5), ev(0, 0, 3)};
    try {
        validate_stream(std::move(events), SensorGeometry{});
        FAIL("expected UnsortedTimestamps");
    } catch (const UnsortedTimestamps& e) {
        CHECK(e.index == 1);
    }
}

TEST_CASE("equal timestamps are allowed") {
    const auto stream = validate_stream({ev(1, 1, 7), ev(2, 2, 7), ev(3, 3, 7)}, SensorGeometry{});
    CHECK(stream.size() == 3);
}

TEST_CASE("out-of-bounds events are rejected") {
    const SensorGeometry geom{4, 4, BayerOrigin::RGGB};
    CHECK_THROWS_AS(validate_stream({ev(4, 0, 1)}, geom), OutOfBounds);
    CHECK_THROWS_AS(validate_stream({ev(0, 4, 1)}, geom), OutOfBounds);
    CHECK_NOTHROW(validate_stream({ev(3, 3, 1)}, geom));
}

TEST_CASE("degenerate geometry is rejected") {
    CHECK_THROWS_AS(validate_stream({}, SensorGeometry{1, 8, BayerOrigin::RGGB}), InvalidGeometry);
    CHECK_THROWS_AS(validate_stream({}, SensorGeometry{8, 0, BayerOrigin::RGGB}), InvalidGeometry);
}

TEST_CASE("10k random in-bounds sorted events validate") {
    Rng rng(11);
    const SensorGeometry geom{};
    const auto events = test::random_events(rng, 10000, geom, 5'000'000);
    const auto stream = validate_stream(events, geom);
    CHECK(stream.size() == 10000);

    SUBCASE("validation is idempotent") {
        const auto again = validate_stream({stream.events().begin(), stream.events().end()},
                                           stream.geometry());
        REQUIRE(again.size() == stream.size());
        for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i] == stream[i]);
    }
}

TEST_CASE("event rate matches direct arithmetic") {
    // 87 events within 1 ms -> 87k events per second
    std::vector<Event> events;
    for (int i = 0; i < 87; ++i) events.push_back(ev(0, 0, 100 + static_cast<std::uint64_t>(i)));
    const auto stream = validate_stream(std::move(events), SensorGeometry{});
    CHECK(event_rate(stream, 99, 1099) == doctest::Approx(87000.0));
}

TEST_CASE("event rate of an empty interval region is zero") {
    const auto stream = validate_stream({ev(0, 0, 10)}, SensorGeometry{});
    CHECK(event_rate(stream, 100, 200) == 0.0);
    CHECK(event_rate(validate_stream({}, SensorGeometry{}), 0, 1000) == 0.0);
}

TEST_CASE("event rate rejects t1 <= t0") {
    const auto stream = validate_stream({}, SensorGeometry{});
    CHECK_THROWS_AS(event_rate(stream, 10, 10), EmptyInterval);
    CHECK_THROWS_AS(event_rate(stream, 10, 5), EmptyInterval);
}

TEST_CASE("event rate equals a brute-force count over random streams") {
    Rng rng(22);
    const SensorGeometry geom{};
    const auto stream = test::random_stream(rng, 5000, geom, 1'000'000);
    for (int trial = 0; trial < 50; ++trial) {
        std::uint64_t t0 = rng.uniform_below(1'000'000);
        std::uint64_t t1 = t0 + 1 + rng.uniform_below(200'000);
        std::size_t count = 0;
        for (const Event& e : stream.events()) {
            if (e.t > t0 && e.t <= t1) ++count;
        }
        const double expected = static_cast<double>(count) / (static_cast<double>(t1 - t0) * 1e-6);
        CHECK(event_rate(stream, t0, t1) == doctest::Approx(expected));
    }
}

TEST_CASE("event rate over adjacent intervals composes by interval length") {
    Rng rng(33);
    const auto stream = test::random_stream(rng, 3000, SensorGeometry{}, 500'000);
    const std::uint64_t t0 = 10'000, t1 = 180'000, t2 = 420'000;
    const double left = event_rate(stream, t0, t1) * static_cast<double>(t1 - t0);
    const double right = event_rate(stream, t1, t2) * static_cast<double>(t2 - t1);
    const double whole = event_rate(stream, t0, t2) * static_cast<double>(t2 - t0);
    CHECK(whole == doctest::Approx(left + right));
}
