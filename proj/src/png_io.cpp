#include "lucidcam/png_io.hpp"

#include <zlib.h>

#include <cstdlib>
#include <cstring>
#include <fstream>

namespace lucidcam {

RgbImage::RgbImage(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width(w), height(h), pixels(3u * static_cast<std::size_t>(w) * h) {
    if (w < 1 || h < 1) throw ArgumentError("image extents must be positive");
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = r;
        pixels[i + 1] = g;
        pixels[i + 2] = b;
    }
}

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
    if (w < 1 || h < 1) throw ArgumentError("image extents must be positive");
}

namespace {

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[5],
                  const std::vector<std::uint8_t>& payload) {
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
    put_u32(out, crc);
}

std::vector<std::uint8_t> encode_common(const std::uint8_t* data, int width, int height,
                                        int channels) {
    if (width < 1 || height < 1) throw ArgumentError("image extents must be positive");

    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);                                  // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);              // gray / truecolor
    ihdr.push_back(0);                                  // compression
    ihdr.push_back(0);                                  // filter method
    ihdr.push_back(0);                                  // no interlace

    std::size_t stride = static_cast<std::size_t>(width) * channels;
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(height) * (stride + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0); // filter: none
        const std::uint8_t* row = data + static_cast<std::size_t>(y) * stride;
        raw.insert(raw.end(), row, row + stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> idat(bound);
    if (compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw IoError("PNG compression failed");
    }
    idat.resize(bound);

    std::vector<std::uint8_t> out(kSignature, kSignature + 8);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", idat);
    append_chunk(out, "IEND", {});
    return out;
}

void write_file(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
    // Write to a sibling temp file and rename so readers never see a torn file.
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing: " + tmp.string());
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
        if (!f) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot replace " + path.string());
    }
}

std::uint8_t paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

} // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
    if (image.pixels.size() != 3u * static_cast<std::size_t>(image.width) * image.height) {
        throw ShapeError("RGB buffer length must be 3 * width * height");
    }
    return encode_common(image.pixels.data(), image.width, image.height, 3);
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
        throw ShapeError("gray buffer length must be width * height");
    }
    return encode_common(image.pixels.data(), image.width, image.height, 1);
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
    write_file(encode_png(image), path);
}

void write_png(const GrayImage& image, const std::filesystem::path& path) {
    write_file(encode_png(image), path);
}

DecodedPng decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
        throw FormatError("not a PNG file");
    }
    std::size_t pos = 8;
    bool saw_ihdr = false, saw_iend = false;
    int width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> idat;

    while (pos < bytes.size()) {
        if (bytes.size() - pos < 12) throw FormatError("truncated PNG chunk header");
        std::uint32_t length = get_u32(&bytes[pos]);
        if (bytes.size() - pos - 12 < length) throw FormatError("truncated PNG chunk");
        const std::uint8_t* type = &bytes[pos + 4];
        const std::uint8_t* payload = &bytes[pos + 8];
        std::uint32_t expected_crc = get_u32(payload + length);
        std::uint32_t actual_crc = static_cast<std::uint32_t>(
            crc32(0, type, static_cast<uInt>(length + 4)));
        if (expected_crc != actual_crc) throw FormatError("PNG chunk checksum mismatch");

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (length != 13) throw FormatError("bad IHDR length");
            width = static_cast<int>(get_u32(payload));
            height = static_cast<int>(get_u32(payload + 4));
            int depth = payload[8], color = payload[9];
            int compression = payload[10], filter = payload[11], interlace = payload[12];
            if (width < 1 || height < 1) throw FormatError("bad PNG dimensions");
            if (depth != 8) throw FormatError("only 8-bit PNGs are supported");
            if (color == 0) channels = 1;
            else if (color == 2) channels = 3;
            else if (color == 6) channels = 4;
            else throw FormatError("unsupported PNG color type");
            if (compression != 0 || filter != 0) throw FormatError("nonstandard PNG encoding");
            if (interlace != 0) throw FormatError("interlaced PNGs are not supported");
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            if (!saw_ihdr) throw FormatError("PNG pixel data before header");
            idat.insert(idat.end(), payload, payload + length);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
            break;
        }
        pos += 12u + length;
    }
    if (!saw_ihdr) throw FormatError("PNG header missing");
    if (!saw_iend) throw FormatError("PNG end chunk missing");
    if (idat.empty()) throw FormatError("PNG pixel data missing");

    std::size_t stride = static_cast<std::size_t>(width) * channels;
    std::size_t expected = static_cast<std::size_t>(height) * (stride + 1);
    std::vector<std::uint8_t> raw(expected);
    uLongf raw_len = static_cast<uLongf>(expected);
    int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (rc != Z_OK || raw_len != expected) throw FormatError("PNG pixel data corrupt");

    DecodedPng out;
    out.width = width;
    out.height = height;
    out.channels = channels;
    out.pixels.resize(static_cast<std::size_t>(height) * stride);

    std::vector<std::uint8_t> prev(stride, 0);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * (stride + 1)];
        std::uint8_t filter = src[0];
        ++src;
        std::uint8_t* dst = &out.pixels[static_cast<std::size_t>(y) * stride];
        for (std::size_t i = 0; i < stride; ++i) {
            int a = i >= static_cast<std::size_t>(channels) ? dst[i - channels] : 0;
            int b = prev[i];
            int c = i >= static_cast<std::size_t>(channels) ? prev[i - channels] : 0;
            int x = src[i];
            switch (filter) {
            case 0: break;
            case 1: x += a; break;
            case 2: x += b; break;
            case 3: x += (a + b) / 2; break;
            case 4: x += paeth(a, b, c); break;
            default: throw FormatError("unknown PNG row filter");
            }
            dst[i] = static_cast<std::uint8_t>(x & 0xFF);
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return out;
}

DecodedPng read_png(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

} // namespace lucidcam
