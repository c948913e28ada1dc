#pragma once

#include <string>
#include <vector>

#include "pinv/core.hpp"
#include "pinv/rng.hpp"

namespace pinv {

struct DefenseConfig {
    double noise_sigma = 25.0;
    int grid = 4;
    int shift_limit = 3;
    std::string wm_text = "@watermark";
    int wm_font_px = 20;
    int wm_row_gap = 20;
    int wm_col_gap = 30;
    double wm_alpha = 0.5;

    void validate() const;
};

// Per-sample N(0, sigma) added, clamped to [0,255] and rounded.
ImageBuffer add_noise(const ImageBuffer& img, double sigma, Rng& rng);

// grid x grid tiles, each translated by independent uniform integer offsets
// in [-shift_limit, +shift_limit]; vacated pixels keep the pre-transform
// content.
ImageBuffer puzzle(const ImageBuffer& img, int grid, int shift_limit, Rng& rng);

// Tiled text overlay from the built-in bitmap font, alpha-blended white.
ImageBuffer watermark(const ImageBuffer& img, const DefenseConfig& cfg);

// Glyph coverage of the watermark tiling; 1 where blending applies.
std::vector<uint8_t> watermark_mask(int width, int height, const DefenseConfig& cfg);

enum class DefenseKind { none, noise, puzzle, watermark };

const std::string& defense_kind_name(DefenseKind kind);
DefenseKind defense_kind_from_name(const std::string& name);

ImageBuffer apply_defense(const ImageBuffer& img, DefenseKind kind, const DefenseConfig& cfg,
                          Rng& rng);

}  // namespace pinv
