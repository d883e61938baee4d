#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "vicap/model_io.hpp"

namespace vicap {

// 8-bit interleaved RGB, row-major, top row first.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, Rgb fill = {0, 0, 0});

  bool empty() const noexcept { return width == 0 || height == 0; }
  Rgb at(std::size_t x, std::size_t y) const {
    const std::uint8_t* p = &pixels[(y * width + x) * 3];
    return {p[0], p[1], p[2]};
  }
  void set(std::size_t x, std::size_t y, Rgb c) {
    std::uint8_t* p = &pixels[(y * width + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  void fill_rect(std::size_t x, std::size_t y, std::size_t w, std::size_t h, Rgb c);

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct Box {
  long x = 0;
  long y = 0;
  long width = 0;
  long height = 0;

  friend bool operator==(const Box&, const Box&) = default;
};

// Intersection of the box with the image; ContractError when it is empty.
RgbImage crop(const RgbImage& image, const Box& box);

// PNG (any bit depth / color type, converted to RGB) and uncompressed 24/32-bit BMP.
// Throws FormatError: io for unreadable paths, parse for other formats.
RgbImage load_image(const std::filesystem::path& path);
void save_png(const RgbImage& image, const std::filesystem::path& path);
void save_bmp(const RgbImage& image, const std::filesystem::path& path);

}  // namespace vicap
