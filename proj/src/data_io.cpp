#include <algorithm>
#include <cmath>
#include <fstream>

#include "lucidcam/data.hpp"
#include "lucidcam/png_io.hpp"

namespace lucidcam {

namespace {

std::uint8_t unit_to_byte(float v) {
    double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

RgbImage image_to_rgb(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("sample images must be 3 x H x W");
    }
    int h = image.dim(1), w = image.dim(2);
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t* px = out.px(x, y);
            px[0] = unit_to_byte(image.at(0, y, x));
            px[1] = unit_to_byte(image.at(1, y, x));
            px[2] = unit_to_byte(image.at(2, y, x));
        }
    }
    return out;
}

GrayImage mask_to_gray(const Tensor& mask) {
    if (mask.rank() != 2) throw ShapeError("masks must be H x W");
    int h = mask.dim(0), w = mask.dim(1);
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.pixels[static_cast<std::size_t>(y) * w + x] = mask.at(y, x) > 0.5f ? 255 : 0;
        }
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing: " + tmp.string());
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!f) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot replace " + path.string());
    }
}

[[noreturn]] void file_error(const std::string& filename, const std::string& what) {
    throw DataError(filename + ": " + what);
}

} // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                   const std::string& manifest_json) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec) throw IoError("cannot create " + (dir / "images").string());
    bool any_mask = false;
    for (const Sample& s : dataset) any_mask = any_mask || s.mask.has_value();
    if (any_mask) {
        std::filesystem::create_directories(dir / "masks", ec);
        if (ec) throw IoError("cannot create " + (dir / "masks").string());
    }

    std::string csv = "filename,label\n";
    for (const Sample& s : dataset) {
        std::string filename = s.id + ".png";
        write_png(image_to_rgb(s.image), dir / "images" / filename);
        if (s.mask) write_png(mask_to_gray(*s.mask), dir / "masks" / filename);
        csv += filename + "," + std::to_string(s.label) + "\n";
    }
    write_text(dir / "labels.csv", csv);
    write_text(dir / "manifest.json", manifest_json);
}

Dataset load_image_dir(const std::filesystem::path& images_dir,
                       const std::filesystem::path& labels_csv,
                       const std::optional<std::filesystem::path>& masks_dir) {
    std::ifstream csv(labels_csv);
    if (!csv) throw IoError("cannot open for reading: " + labels_csv.string());

    std::string line;
    if (!std::getline(csv, line)) throw DataError("labels csv is empty: " + labels_csv.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "filename,label") {
        throw DataError("labels csv must start with 'filename,label': " + labels_csv.string());
    }

    Dataset out;
    int width = -1, height = -1;
    while (std::getline(csv, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw DataError("labels csv row needs exactly two fields: " + line);
        }
        std::string filename = line.substr(0, comma);
        std::string label_text = line.substr(comma + 1);
        int label;
        if (label_text == "0") label = 0;
        else if (label_text == "1") label = 1;
        else file_error(filename, "label must be 0 or 1, got '" + label_text + "'");

        DecodedPng png;
        try {
            png = read_png(images_dir / filename);
        } catch (const Error& e) {
            file_error(filename, e.what());
        }
        if (png.channels != 3) file_error(filename, "expected an 8-bit RGB image");
        if (width < 0) {
            width = png.width;
            height = png.height;
        } else if (png.width != width || png.height != height) {
            file_error(filename, "image size differs from the rest of the set");
        }

        Sample s;
        s.id = filename;
        s.label = label;
        s.image = Tensor({3, height, width});
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::uint8_t* px =
                    &png.pixels[3u * (static_cast<std::size_t>(y) * width + x)];
                s.image.at(0, y, x) = px[0] / 255.0f;
                s.image.at(1, y, x) = px[1] / 255.0f;
                s.image.at(2, y, x) = px[2] / 255.0f;
            }
        }

        if (masks_dir) {
            std::filesystem::path mask_path = *masks_dir / filename;
            if (std::filesystem::exists(mask_path)) {
                DecodedPng mpng;
                try {
                    mpng = read_png(mask_path);
                } catch (const Error& e) {
                    file_error(filename, std::string("mask: ") + e.what());
                }
                if (mpng.channels != 1) file_error(filename, "masks must be 8-bit grayscale");
                if (mpng.width != width || mpng.height != height) {
                    file_error(filename, "mask size differs from its image");
                }
                Tensor mask({height, width});
                for (std::int64_t i = 0; i < mask.size(); ++i) {
                    mask[i] = mpng.pixels[static_cast<std::size_t>(i)] > 127 ? 1.0f : 0.0f;
                }
                s.mask = std::move(mask);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace lucidcam
