#pragma once

#include "lucidcam/png_io.hpp"
#include "lucidcam/tensor.hpp"

namespace lucidcam {

// Rec.601 luma: 0.299 R + 0.587 G + 0.114 B.
Tensor to_grayscale(const Tensor& image); // 3 x H x W -> H x W

struct ColorAnchor {
    double value;
    std::uint8_t r, g, b;
};

// The fixed rainbow ramp used for every heatmap, linear between anchors:
//   0.00 -> (  0,   0, 128)
//   0.25 -> (  0, 128, 255)
//   0.50 -> (  0, 255, 128)
//   0.75 -> (255, 128,   0)
//   1.00 -> (128,   0,   0)
const std::vector<ColorAnchor>& jet_anchors();

// heatmap values are clamped to [0, 1] before lookup.
RgbImage apply_colormap(const Tensor& heatmap); // H x W -> RGB

// out = (1 - alpha) * gray * 255 + alpha * colored, rounded half away from
// zero per channel.
RgbImage overlay(const Tensor& gray, const RgbImage& colored, double alpha = 0.4);

// 5x7 bitmap text (digits, '.', '/', '-', '+', 'e'); unknown characters leave
// a blank cell. Glyph cells are 6px wide including spacing.
void draw_text(RgbImage& image, int x, int y, const std::string& text,
               std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);
int text_width(const std::string& text);

// "pred/actual/loss(4dp)/prob(4dp)", e.g. "1/0/1.2346/0.9877".
std::string format_caption(int predicted, int actual, double loss, double probability);

struct PanelEntry {
    RgbImage image;
    int predicted = 0;
    int actual = 0;
    double loss = 0.0;
    double probability = 0.0;
};

// Grid of ceil(n / columns) rows; every tile is the image over a caption
// strip. Tile width is the widest of image width and caption width across
// entries, so panel extents are an exact function of the inputs.
RgbImage compose_panel(const std::vector<PanelEntry>& entries, int columns);

constexpr int kCaptionStripHeight = 11; // 7px glyphs + 2px padding both sides

struct PlotPoint {
    double x = 0.0;
    double y = 0.0;
};

// Polyline fitted into the canvas with equal left/right margins and min/max
// tick labels; a constant series draws at mid-height.
RgbImage plot_series(const std::vector<PlotPoint>& points, int width, int height);

constexpr std::uint8_t kPlotLineR = 30, kPlotLineG = 60, kPlotLineB = 200;
constexpr int kPlotMarginX = 12;   // symmetric, keeps x positions proportional
constexpr int kPlotMarginTop = 12;
constexpr int kPlotMarginBottom = 14;

} // namespace lucidcam
