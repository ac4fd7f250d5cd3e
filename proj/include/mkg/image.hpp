#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mkg {

// Row-major 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  RawImage() = default;
  RawImage(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0);

  std::uint8_t& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return pixels[(row * width + col) * channels + ch];
  }
  std::uint8_t at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return pixels[(row * width + col) * channels + ch];
  }

  // Throws InvalidImage if the buffer size or dimensions are inconsistent.
  void validate() const;

  // Rows [begin, end) as a new image.
  RawImage crop_rows(std::size_t begin, std::size_t end) const;

  bool operator==(const RawImage&) const = default;
};

// Binary PGM (P5) / PPM (P6), maxval 255.
RawImage read_pnm(const std::filesystem::path& path);
void write_pnm(const RawImage& img, const std::filesystem::path& path);

// Bilinear resample plus channel adaptation (gray replicated to RGB, RGB
// averaged to gray) so arbitrary pieces fit a fixed encoder geometry.
RawImage fit_to(const RawImage& img, std::size_t width, std::size_t height, std::size_t channels);

}  // namespace mkg
