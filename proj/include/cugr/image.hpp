#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cugr {

// 8-bit RGB raster, row-major, interleaved channels.
struct ImageU8 {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data; // height*width*3

    ImageU8() = default;
    ImageU8(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0) {}

    uint8_t* px(int y, int x) { return data.data() + (static_cast<size_t>(y) * width + x) * 3; }
    const uint8_t* px(int y, int x) const {
        return data.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
    size_t pixels() const { return static_cast<size_t>(height) * width; }
};

// PNG codec (RGB and single-channel). Encoding is deterministic: the same
// pixels always produce the same bytes.
void write_png_rgb(const std::string& path, const ImageU8& img);
ImageU8 read_png_rgb(const std::string& path);
void write_png_gray(const std::string& path, int height, int width, const std::vector<uint8_t>& gray);
std::vector<uint8_t> read_png_gray(const std::string& path, int& height, int& width);

} // namespace cugr
