#include "lucidcam/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace lucidcam {

Tensor to_grayscale(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("grayscale conversion expects a 3 x H x W tensor");
    }
    int h = image.dim(1), w = image.dim(2);
    Tensor out({h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double v = 0.299 * image.at(0, y, x) + 0.587 * image.at(1, y, x) +
                       0.114 * image.at(2, y, x);
            out.at(y, x) = static_cast<float>(v);
        }
    }
    return out;
}

const std::vector<ColorAnchor>& jet_anchors() {
    static const std::vector<ColorAnchor> anchors = {
        {0.00, 0, 0, 128},  {0.25, 0, 128, 255}, {0.50, 0, 255, 128},
        {0.75, 255, 128, 0}, {1.00, 128, 0, 0},
    };
    return anchors;
}

namespace {

std::uint8_t round_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

void jet_color(double v, std::uint8_t rgb[3]) {
    const auto& anchors = jet_anchors();
    v = std::clamp(v, 0.0, 1.0);
    std::size_t hi = 1;
    while (hi + 1 < anchors.size() && v > anchors[hi].value) ++hi;
    const ColorAnchor& a = anchors[hi - 1];
    const ColorAnchor& b = anchors[hi];
    double t = (v - a.value) / (b.value - a.value);
    rgb[0] = round_byte(a.r + (b.r - a.r) * t);
    rgb[1] = round_byte(a.g + (b.g - a.g) * t);
    rgb[2] = round_byte(a.b + (b.b - a.b) * t);
}

} // namespace

RgbImage apply_colormap(const Tensor& heatmap) {
    if (heatmap.rank() != 2) throw ShapeError("colormap expects an H x W tensor");
    int h = heatmap.dim(0), w = heatmap.dim(1);
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t rgb[3];
            jet_color(heatmap.at(y, x), rgb);
            std::uint8_t* px = out.px(x, y);
            px[0] = rgb[0];
            px[1] = rgb[1];
            px[2] = rgb[2];
        }
    }
    return out;
}

RgbImage overlay(const Tensor& gray, const RgbImage& colored, double alpha) {
    if (gray.rank() != 2) throw ShapeError("overlay expects an H x W gray tensor");
    if (gray.dim(0) != colored.height || gray.dim(1) != colored.width) {
        throw ArgumentError("overlay extents differ");
    }
    if (alpha < 0.0 || alpha > 1.0) throw ArgumentError("alpha must be in [0, 1]");
    RgbImage out(colored.width, colored.height);
    for (int y = 0; y < colored.height; ++y) {
        for (int x = 0; x < colored.width; ++x) {
            double g = 255.0 * gray.at(y, x);
            const std::uint8_t* src = colored.px(x, y);
            std::uint8_t* dst = out.px(x, y);
            for (int c = 0; c < 3; ++c) {
                dst[c] = round_byte((1.0 - alpha) * g + alpha * src[c]);
            }
        }
    }
    return out;
}

namespace {

struct Glyph {
    char ch;
    std::uint8_t rows[7]; // 5 low bits per row, MSB-left
};

constexpr Glyph kFont[] = {
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
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x06, 0x06}},
    {'/', {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
};

const Glyph* find_glyph(char ch) {
    for (const Glyph& g : kFont) {
        if (g.ch == ch) return &g;
    }
    return nullptr;
}

constexpr int kGlyphCell = 6; // 5px glyph + 1px spacing

} // namespace

int text_width(const std::string& text) {
    return static_cast<int>(text.size()) * kGlyphCell;
}

void draw_text(RgbImage& image, int x, int y, const std::string& text, std::uint8_t r,
               std::uint8_t g, std::uint8_t b) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        const Glyph* glyph = find_glyph(text[i]);
        if (!glyph) continue;
        int gx = x + static_cast<int>(i) * kGlyphCell;
        for (int row = 0; row < 7; ++row) {
            int py = y + row;
            if (py < 0 || py >= image.height) continue;
            for (int col = 0; col < 5; ++col) {
                if (!(glyph->rows[row] & (1 << (4 - col)))) continue;
                int px = gx + col;
                if (px < 0 || px >= image.width) continue;
                std::uint8_t* p = image.px(px, py);
                p[0] = r;
                p[1] = g;
                p[2] = b;
            }
        }
    }
}

std::string format_caption(int predicted, int actual, double loss, double probability) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d/%d/%.4f/%.4f", predicted, actual, loss, probability);
    return buf;
}

RgbImage compose_panel(const std::vector<PanelEntry>& entries, int columns) {
    if (entries.empty()) throw ArgumentError("panel needs at least one entry");
    if (columns < 1) throw ArgumentError("panel needs at least one column");
    int img_w = entries.front().image.width;
    int img_h = entries.front().image.height;
    int tile_w = img_w;
    for (const PanelEntry& e : entries) {
        if (e.image.width != img_w || e.image.height != img_h) {
            throw ArgumentError("panel tiles must share extents");
        }
        std::string caption =
            format_caption(e.predicted, e.actual, e.loss, e.probability);
        tile_w = std::max(tile_w, text_width(caption) + 4);
    }
    int tile_h = img_h + kCaptionStripHeight;
    int cols = std::min<int>(columns, static_cast<int>(entries.size()));
    int rows = static_cast<int>((entries.size() + columns - 1) / columns);

    RgbImage out(tile_w * cols, tile_h * rows, 255, 255, 255);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const PanelEntry& e = entries[i];
        int cx = static_cast<int>(i) % columns;
        int cy = static_cast<int>(i) / columns;
        int ox = cx * tile_w + (tile_w - img_w) / 2;
        int oy = cy * tile_h;
        for (int y = 0; y < img_h; ++y) {
            const std::uint8_t* src = e.image.px(0, y);
            std::uint8_t* dst = out.px(ox, oy + y);
            std::copy(src, src + 3 * img_w, dst);
        }
        std::string caption = format_caption(e.predicted, e.actual, e.loss, e.probability);
        int text_x = cx * tile_w + std::max(2, (tile_w - text_width(caption)) / 2);
        draw_text(out, text_x, oy + img_h + 2, caption);
    }
    return out;
}

namespace {

void draw_line(RgbImage& image, int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        if (x0 >= 0 && x0 < image.width && y0 >= 0 && y0 < image.height) {
            std::uint8_t* p = image.px(x0, y0);
            p[0] = r;
            p[1] = g;
            p[2] = b;
        }
        if (x0 == x1 && y0 == y1) break;
        int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

} // namespace

RgbImage plot_series(const std::vector<PlotPoint>& points, int width, int height) {
    if (points.size() < 2) throw ArgumentError("plot needs at least two points");
    for (const PlotPoint& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ArgumentError("plot points must be finite");
        }
    }
    if (width < 4 * kPlotMarginX || height < 3 * (kPlotMarginTop + kPlotMarginBottom)) {
        throw ArgumentError("plot canvas too small");
    }

    double x_min = points[0].x, x_max = points[0].x;
    double y_min = points[0].y, y_max = points[0].y;
    for (const PlotPoint& p : points) {
        x_min = std::min(x_min, p.x);
        x_max = std::max(x_max, p.x);
        y_min = std::min(y_min, p.y);
        y_max = std::max(y_max, p.y);
    }

    int left = kPlotMarginX, right = width - 1 - kPlotMarginX;
    int top = kPlotMarginTop, bottom = height - 1 - kPlotMarginBottom;

    auto map_x = [&](double x) {
        double t = (x_max > x_min) ? (x - x_min) / (x_max - x_min) : 0.5;
        return left + static_cast<int>(std::lround(t * (right - left)));
    };
    auto map_y = [&](double y) {
        double t = (y_max > y_min) ? (y - y_min) / (y_max - y_min) : 0.5;
        return bottom - static_cast<int>(std::lround(t * (bottom - top)));
    };

    RgbImage out(width, height, 255, 255, 255);
    draw_line(out, left, top, left, bottom, 0, 0, 0);
    draw_line(out, left, bottom, right, bottom, 0, 0, 0);

    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        draw_line(out, map_x(points[i].x), map_y(points[i].y), map_x(points[i + 1].x),
                  map_y(points[i + 1].y), kPlotLineR, kPlotLineG, kPlotLineB);
    }

    // y ticks inside the plot edge, x ticks in the bottom margin
    draw_text(out, left + 3, top + 1, tick_label(y_max));
    draw_text(out, left + 3, bottom - 8, tick_label(y_min));
    draw_text(out, left, height - 9, tick_label(x_min));
    std::string x_hi = tick_label(x_max);
    draw_text(out, right - text_width(x_hi), height - 9, x_hi);
    return out;
}

} // namespace lucidcam
