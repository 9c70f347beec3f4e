#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Minimal PNG emission for figures: grayscale or RGB 8-bit, plus helpers to
// compose image strips/grids with nearest-neighbour upscaling.

namespace uvd {

struct ImageU8 {
    int width = 0, height = 0, channels = 1;  // channels: 1 (gray) or 3 (rgb)
    std::vector<uint8_t> pixels;              // row-major, interleaved channels

    static ImageU8 filled(int w, int h, int c, uint8_t value = 0) {
        return ImageU8{w, h, c, std::vector<uint8_t>(static_cast<size_t>(w) * h * c, value)};
    }
    uint8_t& at(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * channels + c]; }
    uint8_t at(int y, int x, int c) const { return pixels[(static_cast<size_t>(y) * width + x) * channels + c]; }
};

void write_png(const std::string& path, const ImageU8& image);

ImageU8 upscale_nearest(const ImageU8& src, int factor);

// lay out equally sized tiles in a grid with a 1px separator
ImageU8 compose_grid(const std::vector<ImageU8>& tiles, int columns, uint8_t background = 32);

}  // namespace uvd
