#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace muscore {

/// Minimal PNG writers (zlib-deflated, 8-bit).
void write_png_gray(const std::string& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& pixels);
void write_png_rgb(const std::string& path, std::size_t height, std::size_t width,
                   const std::vector<std::uint8_t>& rgb);

/// Map [0,1] to the turbo colormap.
void turbo_color(double t, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b);

}  // namespace muscore
