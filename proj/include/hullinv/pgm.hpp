#pragma once

// Binary portable graymap (P5) I/O, 8- or 16-bit.

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hullinv::pgm {

struct Image {
  int height = 0;
  int width = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;  // row-major, each <= maxval
};

void write(const std::filesystem::path& path, const Image& image);
Image read(const std::filesystem::path& path);

// Intensities in [0, 1] to an 8-bit image by rounding.
Image from_unit(int height, int width, const std::vector<double>& values, int maxval = 255);

}  // namespace hullinv::pgm
