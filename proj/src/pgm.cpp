#include "hullinv/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace hullinv::pgm {

void write(const std::filesystem::path& path, const Image& image) {
  if (image.maxval < 1 || image.maxval > 65535 ||
      image.pixels.size() != static_cast<std::size_t>(image.height) * image.width) {
    throw std::invalid_argument("malformed image for " + path.string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  if (image.maxval < 256) {
    std::vector<char> bytes(image.pixels.size());
    std::transform(image.pixels.begin(), image.pixels.end(), bytes.begin(),
                   [](std::uint16_t p) { return static_cast<char>(p); });
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    std::vector<char> bytes(image.pixels.size() * 2);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
      bytes[2 * i] = static_cast<char>(image.pixels[i] >> 8);
      bytes[2 * i + 1] = static_cast<char>(image.pixels[i] & 0xff);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

int read_header_int(std::istream& in, const std::filesystem::path& path) {
  // Skips whitespace and '#' comments between header fields.
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  if (!(in >> value)) throw std::runtime_error("bad PGM header in " + path.string());
  return value;
}

}  // namespace

Image read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw std::runtime_error(path.string() + " is not a binary PGM");
  Image img;
  img.width = read_header_int(in, path);
  img.height = read_header_int(in, path);
  img.maxval = read_header_int(in, path);
  in.get();  // single whitespace before raster
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535) {
    throw std::runtime_error("bad PGM dimensions in " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(n);
  const std::size_t bpp = img.maxval < 256 ? 1 : 2;
  std::vector<unsigned char> bytes(n * bpp);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw std::runtime_error("truncated PGM raster in " + path.string());
  }
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = bpp == 1 ? bytes[i] : static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  }
  return img;
}

Image from_unit(int height, int width, const std::vector<double>& values, int maxval) {
  Image img{height, width, maxval, std::vector<std::uint16_t>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
  }
  return img;
}

}  // namespace hullinv::pgm
