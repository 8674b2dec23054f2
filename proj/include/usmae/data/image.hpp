#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace usmae::data {

struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(w * h, fill) {}
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

struct RgbImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, RGB interleaved

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}
  std::uint8_t* at(std::size_t x, std::size_t y) { return &pixels[(y * width + x) * 3]; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return &pixels[(y * width + x) * 3]; }
  bool operator==(const RgbImage&) const = default;
};

RgbImage to_rgb(const GrayImage& gray);

// Binary PNM with maxval up to 255. read_rgb accepts P5 and P6; read_gray
// accepts only P5. Throws IoError when unreadable and ParseError when
// malformed.
RgbImage read_rgb(const std::filesystem::path& path);
GrayImage read_gray(const std::filesystem::path& path);
// True when the file starts with the P6 magic.
bool is_color_pnm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const GrayImage& img);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

}  // namespace usmae::data
