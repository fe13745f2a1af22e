#include "muscore/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "muscore/errors.hpp"

namespace muscore {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> buf;
    put_u32(buf, static_cast<std::uint32_t>(data.size()));
    buf.insert(buf.end(), type, type + 4);
    buf.insert(buf.end(), data.begin(), data.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(crc32(0, reinterpret_cast<const Bytef*>(type), 4),
              data.empty() ? nullptr : data.data(), static_cast<uInt>(data.size())));
    put_u32(buf, crc);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_png(const std::string& path, std::size_t height, std::size_t width,
               const std::vector<std::uint8_t>& pixels, int channels) {
    if (pixels.size() != height * width * static_cast<std::size_t>(channels))
        throw ShapeMismatch("pixel buffer does not match image size");

    // Filter byte 0 per scanline.
    std::vector<std::uint8_t> raw;
    raw.reserve(height * (width * static_cast<std::size_t>(channels) + 1));
    for (std::size_t r = 0; r < height; ++r) {
        raw.push_back(0);
        const std::size_t off = r * width * static_cast<std::size_t>(channels);
        raw.insert(raw.end(), pixels.begin() + static_cast<std::ptrdiff_t>(off),
                   pixels.begin() + static_cast<std::ptrdiff_t>(off + width * channels));
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(comp_len);
    if (compress2(compressed.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error("PNG deflate failed");
    compressed.resize(comp_len);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    const std::uint8_t signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(signature), 8);

    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);                                    // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);                // gray / rgb
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", compressed);
    write_chunk(out, "IEND", {});
}

}  // namespace

void write_png_gray(const std::string& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& pixels) {
    write_png(path, height, width, pixels, 1);
}

void write_png_rgb(const std::string& path, std::size_t height, std::size_t width,
                   const std::vector<std::uint8_t>& rgb) {
    write_png(path, height, width, rgb, 3);
}

void turbo_color(double t, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    t = std::clamp(t, 0.0, 1.0);
    // Polynomial fit of the turbo colormap.
    const double r_v = 34.61 + t * (1172.33 + t * (-10793.56 + t * (33300.12 + t * (-38394.49 + t * 14825.05))));
    const double g_v = 23.31 + t * (557.33 + t * (1225.33 + t * (-3574.96 + t * (1073.77 + t * 707.56))));
    const double b_v = 27.2 + t * (3211.1 + t * (-15327.97 + t * (27814.0 + t * (-22569.18 + t * 6838.66))));
    r = static_cast<std::uint8_t>(std::clamp(r_v, 0.0, 255.0));
    g = static_cast<std::uint8_t>(std::clamp(g_v, 0.0, 255.0));
    b = static_cast<std::uint8_t>(std::clamp(b_v, 0.0, 255.0));
}

}  // namespace muscore
