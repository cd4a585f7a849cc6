#include <algorithm>
#include <cctype>
#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <memory>
#include <string>

#include <jpeglib.h>

#include "modslam/errors.hpp"
#include "modslam/png_io.hpp"

namespace modslam {
namespace {

struct ErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<ErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace

Image<std::uint8_t> read_jpeg(const std::filesystem::path& path) {
  std::FILE* file = std::fopen(path.c_str(), "rb");
  if (!file) throw IoError("cannot open " + path.string());
  jpeg_decompress_struct cinfo;
  ErrorManager err;
  Image<std::uint8_t> img;
  std::string failure;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = on_error;
  // libjpeg reports errors by longjmp; objects above are constructed first.
  if (setjmp(err.jump)) {
    failure = err.message;
  } else {
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file);
    jpeg_read_header(&cinfo, TRUE);
    if (cinfo.jpeg_color_space != JCS_GRAYSCALE) cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    img = Image<std::uint8_t>(static_cast<int>(cinfo.output_width),
                              static_cast<int>(cinfo.output_height),
                              cinfo.output_components);
    const std::size_t stride = std::size_t(img.width()) * img.channels();
    while (cinfo.output_scanline < cinfo.output_height) {
      JSAMPROW row = img.data().data() + stride * cinfo.output_scanline;
      jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
  }
  jpeg_destroy_decompress(&cinfo);
  std::fclose(file);
  if (!failure.empty()) throw IoError(path.string() + ": " + failure);
  return img;
}

ImageF read_color_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  Image<std::uint16_t> src;
  double scale = 255.0;
  if (ext == ".jpg" || ext == ".jpeg") {
    const auto j = read_jpeg(path);
    src = Image<std::uint16_t>(j.width(), j.height(), j.channels());
    std::copy(j.data().begin(), j.data().end(), src.data().begin());
  } else {
    auto png = read_png(path);
    scale = png.bit_depth == 16 ? 65535.0 : 255.0;
    src = std::move(png.pixels);
  }
  ImageF out(src.width(), src.height(), 3);
  const bool gray = src.channels() < 3;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        out(x, y, c) = static_cast<float>(src(x, y, gray ? 0 : c) / scale);
      }
    }
  }
  return out;
}

}  // namespace modslam
