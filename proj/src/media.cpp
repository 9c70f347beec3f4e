#include <uvd/media.hpp>

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace uvd {

namespace {

void put_u32_be(std::string& out, uint32_t v) {
    char b[4] = {static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                 static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    out.append(b, 4);
}

void put_chunk(std::string& out, const char type[4], const std::string& payload) {
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    std::string body(type, 4);
    body += payload;
    out += body;
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_u32_be(out, static_cast<uint32_t>(crc));
}

}  // namespace

void write_png(const std::string& path, const ImageU8& image) {
    if (image.channels != 1 && image.channels != 3)
        throw std::invalid_argument("write_png: channels must be 1 or 3");
    if (image.pixels.size() != static_cast<size_t>(image.width) * image.height * image.channels)
        throw std::invalid_argument("write_png: pixel buffer size mismatch");

    std::string ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(image.width));
    put_u32_be(ihdr, static_cast<uint32_t>(image.height));
    ihdr += static_cast<char>(8);                             // bit depth
    ihdr += static_cast<char>(image.channels == 1 ? 0 : 2);   // color type
    ihdr += '\0';
    ihdr += '\0';
    ihdr += '\0';

    // scanlines with filter byte 0
    const size_t stride = static_cast<size_t>(image.width) * image.channels;
    std::string raw;
    raw.reserve((stride + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw += '\0';
        raw.append(reinterpret_cast<const char*>(image.pixels.data() + y * stride), stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::string compressed(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                  Z_BEST_SPEED) != Z_OK)
        throw std::runtime_error("write_png: deflate failed");
    compressed.resize(bound);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", "");

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_png: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_png: write failed for " + path);
}

ImageU8 upscale_nearest(const ImageU8& src, int factor) {
    if (factor <= 1) return src;
    ImageU8 dst = ImageU8::filled(src.width * factor, src.height * factor, src.channels);
    for (int y = 0; y < dst.height; ++y)
        for (int x = 0; x < dst.width; ++x)
            for (int c = 0; c < src.channels; ++c) dst.at(y, x, c) = src.at(y / factor, x / factor, c);
    return dst;
}

ImageU8 compose_grid(const std::vector<ImageU8>& tiles, int columns, uint8_t background) {
    if (tiles.empty()) throw std::invalid_argument("compose_grid: no tiles");
    const int tw = tiles.front().width, th = tiles.front().height;
    int channels = 1;
    for (const auto& t : tiles) {
        if (t.width != tw || t.height != th) throw std::invalid_argument("compose_grid: tile sizes differ");
        channels = std::max(channels, t.channels);
    }
    const int rows = (static_cast<int>(tiles.size()) + columns - 1) / columns;
    ImageU8 out = ImageU8::filled(columns * (tw + 1) + 1, rows * (th + 1) + 1, channels, background);
    for (size_t i = 0; i < tiles.size(); ++i) {
        const int gy = static_cast<int>(i) / columns, gx = static_cast<int>(i) % columns;
        const int oy = 1 + gy * (th + 1), ox = 1 + gx * (tw + 1);
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < tw; ++x)
                for (int c = 0; c < channels; ++c) {
                    const auto& t = tiles[i];
                    out.at(oy + y, ox + x, c) = t.channels == channels ? t.at(y, x, c) : t.at(y, x, 0);
                }
    }
    return out;
}

}  // namespace uvd
