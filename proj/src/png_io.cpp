#include "modslam/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "modslam/errors.hpp"

namespace modslam {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

// libpng reports errors by longjmp to png_jmpbuf; every object with a
// non-trivial destructor lives outside the setjmp scope.
void png_warning_fn(png_structp, png_const_charp) {}

int png_color_type(int channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 3: return PNG_COLOR_TYPE_RGB;
    case 4: return PNG_COLOR_TYPE_RGBA;
    default: throw InvalidArgument("unsupported channel count for png");
  }
}

template <typename T>
void write_impl(const std::filesystem::path& path, const Image<T>& img) {
  constexpr int kBits = sizeof(T) * 8;
  const int color_type = png_color_type(img.channels());
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encode failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width(), img.height(), kBits, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if constexpr (kBits == 16) png_set_swap(png);  // host little-endian -> PNG big-endian

  const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
  for (int y = 0; y < img.height(); ++y) {
    auto* row = const_cast<T*>(img.data().data() + y * stride);
    png_write_row(png, reinterpret_cast<png_bytep>(row));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

DecodedPng read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("not a png file: " + path.string());
  }
  std::vector<png_byte> buf;
  std::vector<png_bytep> rows;
  DecodedPng out;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           nullptr, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt png: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (png_get_bit_depth(png, info) == 16) png_set_swap(png);
  png_read_update_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);

  buf.resize(rowbytes * h);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  out.bit_depth = bit_depth;
  out.pixels = Image<std::uint16_t>(w, h, channels);
  auto& px = out.pixels.data();
  const std::size_t row_samples = std::size_t(w) * channels;
  for (int y = 0; y < h; ++y) {
    auto dst = px.begin() + std::ptrdiff_t(y * row_samples);
    if (bit_depth == 16) {
      const auto* src = reinterpret_cast<const std::uint16_t*>(rows[y]);
      std::copy(src, src + row_samples, dst);
    } else {
      std::copy(rows[y], rows[y] + row_samples, dst);
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image<std::uint8_t>& img) {
  write_impl(path, img);
}

void write_png(const std::filesystem::path& path, const Image<std::uint16_t>& img) {
  write_impl(path, img);
}

Image<std::uint8_t> to_rgb8(const ImageF& color) {
  Image<std::uint8_t> out(color.width(), color.height(), color.channels());
  std::transform(color.data().begin(), color.data().end(), out.data().begin(),
                 [](float v) {
                   const float c = std::clamp(v, 0.0f, 1.0f);
                   return static_cast<std::uint8_t>(std::lround(c * 255.0f));
                 });
  return out;
}

Image<std::uint16_t> to_depth16(const ImageF& depth, double depth_scale) {
  Image<std::uint16_t> out(depth.width(), depth.height(), 1);
  std::transform(depth.data().begin(), depth.data().end(), out.data().begin(),
                 [depth_scale](float d) -> std::uint16_t {
                   if (!(d > 0) || !std::isfinite(d)) return 0;
                   const double s = std::round(d * depth_scale);
                   return static_cast<std::uint16_t>(std::min(s, 65535.0));
                 });
  return out;
}

}  // namespace modslam
