#pragma once

#include <cstdint>
#include <filesystem>

#include "modslam/image.hpp"

namespace modslam {

struct DecodedPng {
  Image<std::uint16_t> pixels;  // samples widened to 16 bit storage
  int bit_depth = 8;
};

/// Decodes gray, gray+alpha, RGB or RGBA PNGs at 8 or 16 bits. Palette and
/// sub-byte images are expanded to 8 bit. Throws IoError.
DecodedPng read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image<std::uint8_t>& img);
void write_png(const std::filesystem::path& path, const Image<std::uint16_t>& img);

/// [0,1] float RGB -> 8 bit, rounding to nearest.
Image<std::uint8_t> to_rgb8(const ImageF& color);
/// Meters -> 16 bit depth units, 0 kept as invalid, saturating.
Image<std::uint16_t> to_depth16(const ImageF& depth, double depth_scale);

/// 8 bit baseline/progressive JPEG, gray or RGB. Throws IoError.
Image<std::uint8_t> read_jpeg(const std::filesystem::path& path);

/// PNG or JPEG (by extension) as a 3-channel [0,1] image; gray is replicated
/// and alpha dropped.
ImageF read_color_image(const std::filesystem::path& path);

}  // namespace modslam
