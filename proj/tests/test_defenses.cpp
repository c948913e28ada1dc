#include <doctest.h>

#include <cmath>

#include "pinv/defenses.hpp"

using namespace pinv;

TEST_CASE("noise: sigma 0 is the identity") {
    ImageBuffer img(16, 16, uint8_t(77));
    Rng rng(1);
    CHECK(add_noise(img, 0.0, rng) == img);
}

TEST_CASE("noise: delta statistics at sigma 25 on mid-gray") {
    // >= 1e6 samples; empirical mean within +-0.5, std within [23, 27]
    ImageBuffer img(600, 600, uint8_t(128));
    Rng rng(42);
    const ImageBuffer out = add_noise(img, 25.0, rng);
    CHECK(out.width == img.width);
    CHECK(out.height == img.height);
    double sum = 0.0, sum2 = 0.0;
    const size_t n = out.pixels.size();
    for (size_t i = 0; i < n; ++i) {
        const double d = double(out.pixels[i]) - 128.0;
        sum += d;
        sum2 += d * d;
    }
    const double mean = sum / double(n);
    const double stddev = std::sqrt(sum2 / double(n) - mean * mean);
    CHECK(n >= 1000000);
    CHECK(std::abs(mean) <= 0.5);
    CHECK(stddev >= 23.0);
    CHECK(stddev <= 27.0);
}

TEST_CASE("noise: clamps at the sample bounds") {
    ImageBuffer white(64, 64, uint8_t(255));
    Rng rng(7);
    const ImageBuffer out = add_noise(white, 25.0, rng);
    for (uint8_t px : out.pixels) CHECK(px <= 255);
    ImageBuffer black(64, 64, uint8_t(0));
    Rng rng2(7);
    const ImageBuffer out2 = add_noise(black, 25.0, rng2);
    double mean = 0.0;
    for (uint8_t px : out2.pixels) mean += px;
    mean /= double(out2.pixels.size());
    CHECK(mean > 0.0);  // clamping skews the all-black mean upward
}

TEST_CASE("noise: fixed seed reproduces, different seeds differ") {
    ImageBuffer img(32, 32, uint8_t(100));
    Rng a(5), b(5), c(6);
    const ImageBuffer na = add_noise(img, 25.0, a);
    const ImageBuffer nb = add_noise(img, 25.0, b);
    const ImageBuffer nc = add_noise(img, 25.0, c);
    CHECK(na == nb);
    double mad = 0.0;
    for (size_t i = 0; i < na.pixels.size(); ++i) {
        mad += std::abs(double(na.pixels[i]) - double(nc.pixels[i]));
    }
    CHECK(mad / double(na.pixels.size()) > 0.0);
}

TEST_CASE("puzzle: zero shift limit is the identity") {
    ImageBuffer img(32, 32);
    Rng pattern(3);
    for (auto& px : img.pixels) px = uint8_t(pattern.below(256));
    Rng rng(9);
    CHECK(puzzle(img, 4, 0, rng) == img);
}

TEST_CASE("puzzle: single tile translates the whole image") {
    ImageBuffer img(16, 16);
    Rng pattern(4);
    for (auto& px : img.pixels) px = uint8_t(pattern.below(256));
    // capture the offsets by replaying the generator sequence
    Rng probe(11);
    const int dx = probe.uniform_int(-3, 3);
    const int dy = probe.uniform_int(-3, 3);
    Rng rng(11);
    const ImageBuffer out = puzzle(img, 1, 3, rng);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            const int sx = x - dx, sy = y - dy;
            if (sx < 0 || sx >= 16 || sy < 0 || sy >= 16) continue;
            for (int c = 0; c < 3; ++c) CHECK(out.at(x, y, c) == img.at(sx, sy, c));
        }
    }
}

TEST_CASE("puzzle: constant images are invariant under any seed") {
    ImageBuffer img(20, 20, uint8_t(99));
    for (uint64_t seed : {1u, 2u, 3u}) {
        Rng rng(seed);
        CHECK(puzzle(img, 4, 3, rng) == img);
    }
}

TEST_CASE("puzzle preserves dimensions with default parameters") {
    ImageBuffer img(37, 53);
    Rng pattern(8);
    for (auto& px : img.pixels) px = uint8_t(pattern.below(256));
    Rng rng(2);
    const ImageBuffer out = puzzle(img, 4, 3, rng);
    CHECK(out.width == 37);
    CHECK(out.height == 53);
    CHECK(out.pixels.size() == img.pixels.size());
}

TEST_CASE("watermark: alpha 0 is the identity") {
    DefenseConfig cfg;
    cfg.wm_alpha = 0.0;
    ImageBuffer img(64, 64, uint8_t(40));
    CHECK(watermark(img, cfg) == img);
}

TEST_CASE("watermark: alpha 1 on black paints glyph pixels white exactly") {
    DefenseConfig cfg;
    cfg.wm_alpha = 1.0;
    ImageBuffer img(128, 128, uint8_t(0));
    const ImageBuffer out = watermark(img, cfg);
    const auto mask = watermark_mask(128, 128, cfg);
    bool any_mask = false;
    for (int y = 0; y < 128; ++y) {
        for (int x = 0; x < 128; ++x) {
            const bool in_mask = mask[size_t(y) * 128 + x] != 0;
            any_mask |= in_mask;
            for (int c = 0; c < 3; ++c) {
                CHECK(out.at(x, y, c) == (in_mask ? 255 : 0));
            }
        }
    }
    CHECK(any_mask);
}

TEST_CASE("watermark changes only pixels under the glyph mask") {
    DefenseConfig cfg;  // defaults: alpha 0.5, font 20, gaps 20/30
    ImageBuffer img(200, 150);
    Rng pattern(6);
    for (auto& px : img.pixels) px = uint8_t(pattern.below(200));
    const ImageBuffer out = watermark(img, cfg);
    const auto mask = watermark_mask(200, 150, cfg);
    CHECK(out.width == img.width);
    CHECK(out.height == img.height);
    for (int y = 0; y < 150; ++y) {
        for (int x = 0; x < 200; ++x) {
            const bool changed = out.at(x, y, 0) != img.at(x, y, 0) ||
                                 out.at(x, y, 1) != img.at(x, y, 1) ||
                                 out.at(x, y, 2) != img.at(x, y, 2);
            if (changed) CHECK(mask[size_t(y) * 200 + x] == 1);
        }
    }
    // blend arithmetic on a known background: 0.5*128 + 0.5*255 = 191.5 -> 192
    ImageBuffer gray(64, 64, uint8_t(128));
    const ImageBuffer wm = watermark(gray, cfg);
    const auto gmask = watermark_mask(64, 64, cfg);
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            if (gmask[size_t(y) * 64 + x]) CHECK(wm.at(x, y, 0) == 192);
        }
    }
}

TEST_CASE("watermark tiling uses the configured pitches") {
    DefenseConfig cfg;
    cfg.wm_text = "a";
    cfg.wm_font_px = 14;  // glyph height 14, advance = 10 + 2
    cfg.wm_row_gap = 20;
    cfg.wm_col_gap = 30;
    const auto mask = watermark_mask(300, 300, cfg);
    // second band of glyph rows starts at y = font + row_gap
    bool first_band = false, second_band = false;
    for (int x = 0; x < 300; ++x) {
        if (mask[size_t(0) * 300 + x]) first_band = true;
        if (mask[size_t(14 + 20) * 300 + x]) second_band = true;
    }
    CHECK(first_band);
    CHECK(second_band);
    // the gap rows between bands are untouched
    for (int y = 14; y < 14 + 20; ++y) {
        for (int x = 0; x < 300; ++x) CHECK(mask[size_t(y) * 300 + x] == 0);
    }
}

TEST_CASE("defense kind round trip and dispatch") {
    CHECK(defense_kind_from_name("noise") == DefenseKind::noise);
    CHECK(defense_kind_name(DefenseKind::watermark) == "watermark");
    CHECK_THROWS_AS(defense_kind_from_name("bogus"), std::invalid_argument);

    DefenseConfig cfg;
    ImageBuffer img(32, 32, uint8_t(50));
    Rng rng(1);
    CHECK(apply_defense(img, DefenseKind::none, cfg, rng) == img);
    const auto noisy = apply_defense(img, DefenseKind::noise, cfg, rng);
    CHECK(noisy.width == 32);
}

TEST_CASE("defense config validation") {
    DefenseConfig bad;
    bad.wm_alpha = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    DefenseConfig bad2;
    bad2.grid = 0;
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}
