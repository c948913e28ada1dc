#include "pinv/defenses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace pinv {

void DefenseConfig::validate() const {
    if (noise_sigma < 0.0) throw std::invalid_argument("DefenseConfig: noise_sigma >= 0");
    if (grid < 1) throw std::invalid_argument("DefenseConfig: grid >= 1");
    if (shift_limit < 0) throw std::invalid_argument("DefenseConfig: shift_limit >= 0");
    if (wm_font_px < 1) throw std::invalid_argument("DefenseConfig: wm_font_px >= 1");
    if (wm_row_gap < 0 || wm_col_gap < 0) throw std::invalid_argument("DefenseConfig: gaps >= 0");
    if (!(wm_alpha >= 0.0 && wm_alpha <= 1.0)) {
        throw std::invalid_argument("DefenseConfig: wm_alpha in [0,1]");
    }
}

ImageBuffer add_noise(const ImageBuffer& img, double sigma, Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("add_noise: sigma >= 0");
    if (sigma == 0.0) return img;
    ImageBuffer out = img;
    for (auto& px : out.pixels) {
        const double v = double(px) + rng.normal(0.0, sigma);
        px = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
    return out;
}

ImageBuffer puzzle(const ImageBuffer& img, int grid, int shift_limit, Rng& rng) {
    if (grid < 1) throw std::invalid_argument("puzzle: grid >= 1");
    if (shift_limit < 0) throw std::invalid_argument("puzzle: shift_limit >= 0");
    if (img.width < grid || img.height < grid) {
        throw std::invalid_argument("puzzle: image smaller than grid");
    }
    ImageBuffer out = img;  // background-preserving fill
    for (int ty = 0; ty < grid; ++ty) {
        for (int tx = 0; tx < grid; ++tx) {
            const int x0 = tx * img.width / grid;
            const int x1 = (tx + 1) * img.width / grid;
            const int y0 = ty * img.height / grid;
            const int y1 = (ty + 1) * img.height / grid;
            const int dx = rng.uniform_int(-shift_limit, shift_limit);
            const int dy = rng.uniform_int(-shift_limit, shift_limit);
            for (int y = y0; y < y1; ++y) {
                const int ny = y + dy;
                if (ny < 0 || ny >= img.height) continue;
                for (int x = x0; x < x1; ++x) {
                    const int nx = x + dx;
                    if (nx < 0 || nx >= img.width) continue;
                    for (int c = 0; c < 3; ++c) out.at(nx, ny, c) = img.at(x, y, c);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Built-in 5x7 bitmap font; each glyph row is a 5-bit mask, bit 4 leftmost.
// ---------------------------------------------------------------------------

namespace {

struct Glyph {
    char ch;
    uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'a', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'b', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'c', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'d', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'e', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'f', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'g', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'h', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'i', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'j', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'k', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'l', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'m', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'n', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'o', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'p', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'r', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'s', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'t', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'u', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'v', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'w', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'x', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'@', {0x0E, 0x11, 0x01, 0x0D, 0x15, 0x15, 0x0E}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const uint8_t* glyph_rows(char c) {
    const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const auto& g : kFont) {
        if (g.ch == lc) return g.rows;
    }
    static const uint8_t box[7] = {0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F};
    return box;
}

struct FontMetrics {
    int glyph_w;
    int glyph_h;
    int spacing;
    int advance;

    explicit FontMetrics(int font_px)
        : glyph_w(std::max(1, font_px * 5 / 7)),
          glyph_h(font_px),
          spacing(std::max(1, font_px / 7)),
          advance(glyph_w + std::max(1, font_px / 7)) {}

    int text_width(size_t n_glyphs) const {
        if (n_glyphs == 0) return 0;
        return int(n_glyphs) * advance - spacing;
    }
};

bool glyph_covers(const uint8_t* rows, const FontMetrics& fm, int gx, int gy) {
    const int src_row = gy * 7 / fm.glyph_h;
    const int src_col = gx * 5 / fm.glyph_w;
    return (rows[src_row] >> (4 - src_col)) & 1;
}

}  // namespace

std::vector<uint8_t> watermark_mask(int width, int height, const DefenseConfig& cfg) {
    cfg.validate();
    std::vector<uint8_t> mask(size_t(width) * height, 0);
    if (cfg.wm_text.empty()) return mask;
    const FontMetrics fm(cfg.wm_font_px);
    const int pitch_y = fm.glyph_h + cfg.wm_row_gap;
    const int pitch_x = fm.text_width(cfg.wm_text.size()) + cfg.wm_col_gap;
    for (int ty = 0; ty < height; ty += pitch_y) {
        for (int tx = 0; tx < width; tx += pitch_x) {
            for (size_t gi = 0; gi < cfg.wm_text.size(); ++gi) {
                const uint8_t* rows = glyph_rows(cfg.wm_text[gi]);
                const int ox = tx + int(gi) * fm.advance;
                for (int gy = 0; gy < fm.glyph_h; ++gy) {
                    const int y = ty + gy;
                    if (y < 0 || y >= height) continue;
                    for (int gx = 0; gx < fm.glyph_w; ++gx) {
                        const int x = ox + gx;
                        if (x < 0 || x >= width) continue;
                        if (glyph_covers(rows, fm, gx, gy)) mask[size_t(y) * width + x] = 1;
                    }
                }
            }
        }
    }
    return mask;
}

ImageBuffer watermark(const ImageBuffer& img, const DefenseConfig& cfg) {
    const auto mask = watermark_mask(img.width, img.height, cfg);
    ImageBuffer out = img;
    const double a = cfg.wm_alpha;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!mask[size_t(y) * img.width + x]) continue;
            for (int c = 0; c < 3; ++c) {
                const double blended = (1.0 - a) * double(img.at(x, y, c)) + a * 255.0;
                out.at(x, y, c) = static_cast<uint8_t>(std::lround(blended));
            }
        }
    }
    return out;
}

const std::string& defense_kind_name(DefenseKind kind) {
    static const std::string names[] = {"none", "noise", "puzzle", "watermark"};
    return names[static_cast<size_t>(kind)];
}

DefenseKind defense_kind_from_name(const std::string& name) {
    for (DefenseKind k : {DefenseKind::none, DefenseKind::noise, DefenseKind::puzzle,
                          DefenseKind::watermark}) {
        if (defense_kind_name(k) == name) return k;
    }
    throw std::invalid_argument("unknown defense: " + name);
}

ImageBuffer apply_defense(const ImageBuffer& img, DefenseKind kind, const DefenseConfig& cfg,
                          Rng& rng) {
    cfg.validate();
    switch (kind) {
        case DefenseKind::none:
            return img;
        case DefenseKind::noise:
            return add_noise(img, cfg.noise_sigma, rng);
        case DefenseKind::puzzle:
            return puzzle(img, cfg.grid, cfg.shift_limit, rng);
        case DefenseKind::watermark:
            return watermark(img, cfg);
    }
    throw std::logic_error("unknown defense kind");
}

}  // namespace pinv
