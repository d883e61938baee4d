#include "vicap/image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <png.h>

#include "vicap/errors.hpp"

namespace vicap {

RgbImage::RgbImage(std::size_t w, std::size_t h, Rgb fill) : width(w), height(h), pixels(w * h * 3) {
  fill_rect(0, 0, w, h, fill);
}

void RgbImage::fill_rect(std::size_t x, std::size_t y, std::size_t w, std::size_t h, Rgb c) {
  const std::size_t x1 = std::min(width, x + w);
  const std::size_t y1 = std::min(height, y + h);
  for (std::size_t yy = y; yy < y1; ++yy) {
    for (std::size_t xx = x; xx < x1; ++xx) set(xx, yy, c);
  }
}

RgbImage crop(const RgbImage& image, const Box& box) {
  const long x0 = std::max(0L, box.x);
  const long y0 = std::max(0L, box.y);
  const long x1 = std::min(static_cast<long>(image.width), box.x + box.width);
  const long y1 = std::min(static_cast<long>(image.height), box.y + box.height);
  if (x1 <= x0 || y1 <= y0) {
    throw ContractError(fmt::format("box {},{},{},{} does not overlap the {}x{} image", box.x, box.y, box.width,
                                    box.height, image.width, image.height));
  }
  RgbImage out(static_cast<std::size_t>(x1 - x0), static_cast<std::size_t>(y1 - y0));
  for (long y = y0; y < y1; ++y) {
    const std::uint8_t* src = &image.pixels[(static_cast<std::size_t>(y) * image.width + x0) * 3];
    std::copy(src, src + out.width * 3, &out.pixels[static_cast<std::size_t>(y - y0) * out.width * 3]);
  }
  return out;
}

namespace {

RgbImage decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw FormatError(FormatErrorKind::parse, fmt::format("{}: {}", path.string(), png.message));
  }
  png.format = PNG_FORMAT_RGB;
  RgbImage image(png.width, png.height);
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw FormatError(FormatErrorKind::parse, fmt::format("{}: {}", path.string(), png.message));
  }
  return image;
}

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

RgbImage decode_bmp(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  auto fail = [&](const char* why) {
    return FormatError(FormatErrorKind::parse, fmt::format("{}: {}", path.string(), why));
  };
  if (bytes.size() < 54) throw fail("truncated BMP header");
  const std::uint32_t offset = le32(&bytes[10]);
  const auto w = static_cast<std::int32_t>(le32(&bytes[18]));
  const auto h = static_cast<std::int32_t>(le32(&bytes[22]));
  const std::uint16_t bpp = le16(&bytes[28]);
  const std::uint32_t compression = le32(&bytes[30]);
  if (compression != 0 && !(compression == 3 && bpp == 32)) throw fail("compressed BMP is not supported");
  if (bpp != 24 && bpp != 32) throw fail("only 24- and 32-bit BMP are supported");
  if (w <= 0 || h == 0) throw fail("invalid BMP dimensions");
  const bool bottom_up = h > 0;
  const std::size_t width = static_cast<std::size_t>(w);
  const std::size_t height = static_cast<std::size_t>(bottom_up ? h : -h);
  const std::size_t bytes_pp = bpp / 8;
  const std::size_t stride = (width * bytes_pp + 3) / 4 * 4;
  if (offset > bytes.size() || (bytes.size() - offset) / stride < height) throw fail("truncated BMP pixel data");
  RgbImage image(width, height);
  for (std::size_t row = 0; row < height; ++row) {
    const std::size_t y = bottom_up ? height - 1 - row : row;
    const std::uint8_t* src = &bytes[offset + row * stride];
    for (std::size_t x = 0; x < width; ++x) {
      const std::uint8_t* px = src + x * bytes_pp;
      image.set(x, y, {px[2], px[1], px[0]});
    }
  }
  return image;
}

}  // namespace

RgbImage load_image(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_binary_file(path);
  static constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') return decode_bmp(bytes, path);
  throw FormatError(FormatErrorKind::parse, fmt::format("{}: not a PNG or BMP image", path.string()));
}

void save_png(const RgbImage& image, const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw FormatError(FormatErrorKind::io, fmt::format("{}: {}", path.string(), png.message));
  }
}

void save_bmp(const RgbImage& image, const std::filesystem::path& path) {
  const std::size_t stride = (image.width * 3 + 3) / 4 * 4;
  const std::size_t data_size = stride * image.height;
  std::vector<std::uint8_t> out(54 + data_size, 0);
  auto put32 = [&](std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
  };
  out[0] = 'B';
  out[1] = 'M';
  put32(2, static_cast<std::uint32_t>(out.size()));
  put32(10, 54);
  put32(14, 40);
  put32(18, static_cast<std::uint32_t>(image.width));
  put32(22, static_cast<std::uint32_t>(image.height));
  out[26] = 1;
  out[28] = 24;
  put32(34, static_cast<std::uint32_t>(data_size));
  for (std::size_t row = 0; row < image.height; ++row) {
    const std::size_t y = image.height - 1 - row;
    std::uint8_t* dst = &out[54 + row * stride];
    for (std::size_t x = 0; x < image.width; ++x) {
      const Rgb c = image.at(x, y);
      dst[x * 3] = c[2];
      dst[x * 3 + 1] = c[1];
      dst[x * 3 + 2] = c[0];
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw FormatError(FormatErrorKind::io, fmt::format("cannot open {} for writing", path.string()));
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace vicap
