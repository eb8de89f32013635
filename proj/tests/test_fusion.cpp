#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "evla/fusion.hpp"
#include "helpers.hpp"

using namespace evla;

namespace {

Event ev(std::uint16_t x, std::uint16_t y, std::uint64_t t, Polarity p) {
    return Event{x, y, t, p};
}

RgbImage random_image(Rng& rng, std::uint16_t w, std::uint16_t h) {
    RgbImage img{w, h, std::vector<std::uint8_t>(std::size_t(w) * h * 3)};
    for (auto& b : img.data) b = static_cast<std::uint8_t>(rng.uniform_below(256));
    return img;
}

// per-pixel brute force: bucket the window's events, take the argmax over
// timestamps (latest stream position wins ties), write its color
RgbImage oracle_overlay(const RgbImage& image, const Window& window,
                        const PolarityColorMap& colors) {
    RgbImage out = image;
    for (std::uint16_t y = 0; y < image.height; ++y) {
        for (std::uint16_t x = 0; x < image.width; ++x) {
            bool found = false;
            std::uint64_t best_t = 0;
            Polarity best_p = Polarity::On;
            for (const Event& e : window.events()) {
                if (e.x != x || e.y != y) continue;
                if (!found || e.t >= best_t) {
                    best_t = e.t;
                    best_p = e.p;
                    found = true;
                }
            }
            if (found) {
                const Rgb& c = colors.color(best_p);
                std::uint8_t* px = out.data.data() + (std::size_t(y) * out.width + x) * 3;
                px[0] = c[0];
                px[1] = c[1];
                px[2] = c[2];
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("pixels without events stay bit-identical") {
    const SensorGeometry geom{8, 6, BayerOrigin::RGGB};
    Rng rng(3);
    const auto image = random_image(rng, 8, 6);
    const auto stream = validate_stream({ev(2, 2, 10, Polarity::On)}, geom);
    const auto out = overlay(image, recent_count_window(stream, 100, 10), {});
    for (std::uint16_t y = 0; y < 6; ++y) {
        for (std::uint16_t x = 0; x < 8; ++x) {
            if (x == 2 && y == 2) continue;
            for (int c = 0; c < 3; ++c) CHECK(out.at(x, y, c) == image.at(x, y, c));
        }
    }
    CHECK(out.at(2, 2, 0) == 255);
    CHECK(out.at(2, 2, 2) == 0);
}

TEST_CASE("overlay with an empty window returns the image unchanged") {
    const SensorGeometry geom{8, 6, BayerOrigin::RGGB};
    Rng rng(4);
    const auto image = random_image(rng, 8, 6);
    const auto stream = validate_stream({}, geom);
    const auto out = overlay(image, recent_count_window(stream, 100, 10), {});
    CHECK(out == image);
}

TEST_CASE("newest event's polarity decides the color") {
    const SensorGeometry geom{8, 6, BayerOrigin::RGGB};
    const auto image = RgbImage::filled(8, 6, 9, 9, 9);
    const auto stream = validate_stream(
        {ev(3, 3, 5, Polarity::On), ev(3, 3, 7, Polarity::Off)}, geom);
    const PolarityColorMap colors{};
    const auto out = overlay(image, recent_count_window(stream, 10, 10), colors);
    CHECK(out.at(3, 3, 0) == colors.off_color[0]);
    CHECK(out.at(3, 3, 1) == colors.off_color[1]);
    CHECK(out.at(3, 3, 2) == colors.off_color[2]);
}

TEST_CASE("equal timestamps resolve to the later stream position") {
    const SensorGeometry geom{8, 6, BayerOrigin::RGGB};
    const auto image = RgbImage::filled(8, 6, 0, 0, 0);
    const auto stream = validate_stream(
        {ev(4, 4, 7, Polarity::Off), ev(4, 4, 7, Polarity::On)}, geom);
    const PolarityColorMap colors{};
    const auto out = overlay(image, recent_count_window(stream, 10, 10), colors);
    CHECK(out.at(4, 4, 0) == colors.on_color[0]);
}

TEST_CASE("random overlays equal the per-pixel brute-force oracle") {
    Rng rng(5);
    const SensorGeometry geom{24, 18, BayerOrigin::RGGB};
    for (int trial = 0; trial < 30; ++trial) {
        const auto image = random_image(rng, geom.width, geom.height);
        const auto stream = test::random_stream(rng, 400, geom, 10'000);
        const auto w = recent_count_window(stream, rng.uniform_below(11'000),
                                           1 + rng.uniform_below(400));
        PolarityColorMap colors;
        colors.on_color = {static_cast<std::uint8_t>(rng.uniform_below(256)), 10, 20};
        colors.off_color = {30, static_cast<std::uint8_t>(rng.uniform_below(256)), 40};
        CHECK(overlay(image, w, colors) == oracle_overlay(image, w, colors));
    }
}

TEST_CASE("overlay rejects mismatched geometry and equal colors") {
    const SensorGeometry geom{8, 6, BayerOrigin::RGGB};
    const auto stream = validate_stream({}, geom);
    const auto w = recent_count_window(stream, 10, 10);
    CHECK_THROWS_AS(overlay(RgbImage::filled(9, 6, 0, 0, 0), w, {}), GeometryMismatch);
    PolarityColorMap same;
    same.off_color = same.on_color;
    CHECK_THROWS_AS(overlay(RgbImage::filled(8, 6, 0, 0, 0), w, same), InvalidConfig);
}

TEST_CASE("image dropout extremes") {
    const SensorGeometry geom{4, 4, BayerOrigin::RGGB};
    std::vector<std::pair<RgbImage, EventFrame>> batch;
    for (int i = 0; i < 8; ++i) {
        batch.emplace_back(RgbImage::filled(4, 4, 100, 100, 100),
                           EventFrame{geom, std::vector<float>(48, 0.5f)});
    }
    SUBCASE("rate 0 leaves the batch unchanged") {
        const auto out = image_dropout(batch, 0.0, 123);
        for (const auto& [img, evf] : out) {
            CHECK(img.data[0] == 100);
            CHECK(evf.values[0] == 0.5f);
        }
    }
    SUBCASE("rate 1 zeroes every image but no event frame") {
        const auto out = image_dropout(batch, 1.0, 123);
        for (const auto& [img, evf] : out) {
            for (auto b : img.data) CHECK(b == 0);
            CHECK(evf.values[0] == 0.5f);
        }
    }
    SUBCASE("invalid rates are rejected") {
        CHECK_THROWS_AS(image_dropout(batch, -0.1, 1), InvalidRate);
        CHECK_THROWS_AS(image_dropout(batch, 1.1, 1), InvalidRate);
    }
}

TEST_CASE("dropout at rate 0.5 masks half the batch within a binomial bound") {
    const SensorGeometry geom{2, 2, BayerOrigin::RGGB};
    std::vector<std::pair<RgbImage, EventFrame>> batch;
    for (int i = 0; i < 10'000; ++i) {
        batch.emplace_back(RgbImage::filled(2, 2, 50, 50, 50),
                           EventFrame{geom, std::vector<float>(12, 0.1f)});
    }
    const auto out = image_dropout(batch, 0.5, 42);
    std::size_t masked = 0;
    for (const auto& [img, evf] : out) {
        if (img.data[0] == 0) ++masked;
    }
    const double fraction = static_cast<double>(masked) / 10'000.0;
    CHECK(fraction > 0.48);
    CHECK(fraction < 0.52);
}

TEST_CASE("dropout is deterministic under a fixed seed") {
    const SensorGeometry geom{2, 2, BayerOrigin::RGGB};
    std::vector<std::pair<RgbImage, EventFrame>> batch;
    for (int i = 0; i < 64; ++i) {
        batch.emplace_back(RgbImage::filled(2, 2, 9, 9, 9),
                           EventFrame{geom, std::vector<float>(12, 0.0f)});
    }
    const auto a = image_dropout(batch, 0.5, 7);
    const auto b = image_dropout(batch, 0.5, 7);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].first == b[i].first);
}
