#include "sslam/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace sslam {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
    if (png) info = png_create_info_struct(png);
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                  nullptr);
    if (png) info = png_create_info_struct(png);
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

}  // namespace

ColorImage read_png_color(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open PNG: " + path);
  PngReader r;
  if (!r.png || !r.info) throw std::runtime_error("libpng init failed");
  std::vector<png_byte> data;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(r.png)))
    throw std::runtime_error("PNG decode failed: " + path);

  png_init_io(r.png, fp.get());
  png_read_info(r.png, r.info);
  png_byte color_type = png_get_color_type(r.png, r.info);
  png_byte bit_depth = png_get_bit_depth(r.png, r.info);
  if (bit_depth == 16) png_set_strip_16(r.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(r.png);
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS))
    png_set_tRNS_to_alpha(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(r.png);
  png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);

  int w = static_cast<int>(png_get_image_width(r.png, r.info));
  int h = static_cast<int>(png_get_image_height(r.png, r.info));
  size_t rowbytes = png_get_rowbytes(r.png, r.info);
  if (rowbytes != static_cast<size_t>(w) * 3)
    throw std::runtime_error("unexpected PNG row layout: " + path);
  data.resize(rowbytes * h);
  rows.resize(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = &data[y * rowbytes];
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);

  ColorImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const png_byte* px = &data[static_cast<size_t>(y) * rowbytes + 3 * x];
      out.at(x, y) =
          Eigen::Vector3d(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0);
    }
  return out;
}

Image<uint16_t> read_png_gray16(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open PNG: " + path);
  PngReader r;
  if (!r.png || !r.info) throw std::runtime_error("libpng init failed");
  std::vector<png_byte> data;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(r.png)))
    throw std::runtime_error("PNG decode failed: " + path);

  png_init_io(r.png, fp.get());
  png_read_info(r.png, r.info);
  png_byte color_type = png_get_color_type(r.png, r.info);
  png_byte bit_depth = png_get_bit_depth(r.png, r.info);
  if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 16)
    throw std::runtime_error("expected 16-bit grayscale PNG: " + path);
  png_set_swap(r.png);  // file is big-endian; host buffers little-endian
  png_read_update_info(r.png, r.info);

  int w = static_cast<int>(png_get_image_width(r.png, r.info));
  int h = static_cast<int>(png_get_image_height(r.png, r.info));
  size_t rowbytes = png_get_rowbytes(r.png, r.info);
  if (rowbytes != static_cast<size_t>(w) * 2)
    throw std::runtime_error("unexpected PNG row layout: " + path);
  data.resize(rowbytes * h);
  rows.resize(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = &data[y * rowbytes];
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);

  Image<uint16_t> out(w, h);
  for (int y = 0; y < h; ++y) {
    const uint16_t* src =
        reinterpret_cast<const uint16_t*>(&data[static_cast<size_t>(y) * rowbytes]);
    for (int x = 0; x < w; ++x) out.at(x, y) = src[x];
  }
  return out;
}

void write_png_color(const std::string& path, const ColorImage& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write PNG: " + path);
  PngWriter w;
  if (!w.png || !w.info) throw std::runtime_error("libpng init failed");
  int width = img.width(), height = img.height();
  std::vector<png_byte> data(static_cast<size_t>(width) * height * 3);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<size_t>(y)] = &data[static_cast<size_t>(y) * width * 3];
    for (int x = 0; x < width; ++x) {
      Eigen::Vector3d c = img.at(x, y).cwiseMax(0.0).cwiseMin(1.0);
      for (int k = 0; k < 3; ++k)
        data[(static_cast<size_t>(y) * width + x) * 3 + k] =
            static_cast<png_byte>(std::lround(c[k] * 255.0));
    }
  }

  if (setjmp(png_jmpbuf(w.png)))
    throw std::runtime_error("PNG encode failed: " + path);
  png_init_io(w.png, fp.get());
  png_set_IHDR(w.png, w.info, width, height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

void write_png_gray16(const std::string& path, const Image<uint16_t>& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write PNG: " + path);
  PngWriter w;
  if (!w.png || !w.info) throw std::runtime_error("libpng init failed");
  int width = img.width(), height = img.height();
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  std::vector<uint16_t> data(static_cast<size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x)
      data[static_cast<size_t>(y) * width + x] = img.at(x, y);
    rows[static_cast<size_t>(y)] = reinterpret_cast<png_bytep>(
        &data[static_cast<size_t>(y) * width]);
  }

  if (setjmp(png_jmpbuf(w.png)))
    throw std::runtime_error("PNG encode failed: " + path);
  png_init_io(w.png, fp.get());
  png_set_IHDR(w.png, w.info, width, height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_set_swap(w.png);  // host little-endian buffers to network order
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

}  // namespace sslam
