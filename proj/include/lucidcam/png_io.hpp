#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lucidcam/errors.hpp"

namespace lucidcam {

// 8-bit RGB, row-major, no padding.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // 3 * width * height bytes

    RgbImage() = default;
    RgbImage(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);

    std::uint8_t* px(int x, int y) { return &pixels[3u * (static_cast<std::size_t>(y) * width + x)]; }
    const std::uint8_t* px(int x, int y) const {
        return &pixels[3u * (static_cast<std::size_t>(y) * width + x)];
    }
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // width * height bytes

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);
};

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0; // 1 = gray, 3 = RGB, 4 = RGBA
    std::vector<std::uint8_t> pixels;
};

// Fixed encoder settings (filter 0 rows, one deflate level), so identical
// pixels always produce identical files.
std::vector<std::uint8_t> encode_png(const RgbImage& image);
std::vector<std::uint8_t> encode_png(const GrayImage& image);

void write_png(const RgbImage& image, const std::filesystem::path& path);
void write_png(const GrayImage& image, const std::filesystem::path& path);

// 8-bit gray/RGB/RGBA, non-interlaced, any standard row filter. Malformed or
// unsupported input -> FormatError; unreadable path -> IoError.
DecodedPng decode_png(const std::vector<std::uint8_t>& bytes);
DecodedPng read_png(const std::filesystem::path& path);

} // namespace lucidcam
