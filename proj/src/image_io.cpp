#include "sslam/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace sslam {

namespace {

// Reads "P6"/"P5", dimensions and maxval, skipping whitespace and # comments.
void read_pnm_header(std::istream& in, const std::string& magic_want, int& w,
                     int& h, int& maxval, const std::string& path) {
  std::string magic;
  in >> magic;
  if (magic != magic_want)
    throw std::runtime_error("bad magic in " + path + " (want " + magic_want +
                             ")");
  auto next_int = [&](int& out) {
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    if (!(in >> out)) throw std::runtime_error("truncated header in " + path);
  };
  next_int(w);
  next_int(h);
  next_int(maxval);
  in.get();  // single whitespace before binary payload
  if (w <= 0 || h <= 0) throw std::runtime_error("bad dimensions in " + path);
}

}  // namespace

void write_ppm(const std::string& path, const ColorImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      Eigen::Vector3d c = img.at(x, y).cwiseMax(0.0).cwiseMin(1.0);
      for (int k = 0; k < 3; ++k)
        row[static_cast<size_t>(x) * 3 + k] =
            static_cast<uint8_t>(std::lround(c[k] * 255.0));
    }
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw std::runtime_error("short write to " + path);
}

ColorImage read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  int w, h, maxval;
  read_pnm_header(f, "P6", w, h, maxval, path);
  if (maxval != 255) throw std::runtime_error("only 8-bit PPM supported: " + path);
  std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
  ColorImage out(w, h);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size()));
    if (!f) throw std::runtime_error("truncated pixel data in " + path);
    for (int x = 0; x < w; ++x)
      out.at(x, y) = Eigen::Vector3d(row[3 * x] / 255.0, row[3 * x + 1] / 255.0,
                                     row[3 * x + 2] / 255.0);
  }
  return out;
}

void write_pgm16(const std::string& path, const GrayImage& img, double scale) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 2);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double v = img.at(x, y) * scale;
      uint16_t q = static_cast<uint16_t>(
          std::lround(std::min(std::max(v, 0.0), 65535.0)));
      row[static_cast<size_t>(x) * 2] = static_cast<uint8_t>(q >> 8);
      row[static_cast<size_t>(x) * 2 + 1] = static_cast<uint8_t>(q & 0xFF);
    }
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw std::runtime_error("short write to " + path);
}

GrayImage read_pgm16(const std::string& path, double scale) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  int w, h, maxval;
  read_pnm_header(f, "P5", w, h, maxval, path);
  if (maxval != 65535)
    throw std::runtime_error("only 16-bit PGM supported: " + path);
  if (scale <= 0.0) throw std::invalid_argument("read_pgm16: scale must be > 0");
  std::vector<uint8_t> row(static_cast<size_t>(w) * 2);
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size()));
    if (!f) throw std::runtime_error("truncated pixel data in " + path);
    for (int x = 0; x < w; ++x) {
      uint16_t q = static_cast<uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
      out.at(x, y) = q / scale;
    }
  }
  return out;
}

}  // namespace sslam
