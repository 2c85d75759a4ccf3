#pragma once

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "medground/core/result.hpp"

namespace medground {

/// Single-channel samples as stored in the file (8- or 16-bit, or palette indices).
struct GrayImage {
  int width = 0;
  int height = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;  // row-major
};

/// 8-bit interleaved RGB, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::uint8_t* pixel(int x, int y) {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

namespace detail {

struct PngMemReader {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

inline void png_mem_read(png_structp png, png_bytep out, png_size_t n) {
  auto* src = static_cast<PngMemReader*>(png_get_io_ptr(png));
  if (src->offset + n > src->data.size()) png_error(png, "read past end of buffer");
  std::memcpy(out, src->data.data() + src->offset, n);
  src->offset += n;
}

inline void png_mem_write(png_structp png, png_bytep in, png_size_t n) {
  auto* dst = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  dst->insert(dst->end(), in, in + n);
}

inline void png_mem_flush(png_structp) {}

inline void png_silent_warning(png_structp, png_const_charp) {}

inline bool has_png_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

}  // namespace detail

/// Decodes a single-channel PNG keeping raw sample values (no gamma, no scaling).
/// Palette images decode to their indices.
inline Result<GrayImage> decode_gray_png(std::span<const std::uint8_t> bytes) {
  if (!detail::has_png_signature(bytes)) return make_error("unreadable", "unreadable file: not a PNG");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           detail::png_silent_warning);
  if (png == nullptr) return make_error("unreadable", "unreadable file");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return make_error("unreadable", "unreadable file");
  }
  detail::PngMemReader reader{bytes, 0};
  GrayImage img;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  // Reported after libpng state is torn down.
  int status = 0;  // 0 ok, 1 unreadable, 2 multi-channel, 3 zero-area

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return make_error("unreadable", "unreadable file: corrupt PNG data");
  }
  png_set_read_fn(png, &reader, detail::png_mem_read);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (width == 0 || height == 0) {
    status = 3;
  } else if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE) {
    status = 2;
  } else {
    if (depth < 8) png_set_packing(png);
    png_read_update_info(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.bit_depth = depth;
    img.samples.resize(static_cast<std::size_t>(width) * height);
    for (png_uint_32 y = 0; y < height; ++y) {
      const std::uint8_t* row = rows[y];
      for (png_uint_32 x = 0; x < width; ++x) {
        std::uint16_t v = depth == 16 ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1])
                                      : row[x];
        img.samples[static_cast<std::size_t>(y) * width + x] = v;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (status == 2) return make_error("multi_channel", "multi-channel image");
  if (status == 3) return make_error("zero_area", "zero-area image");
  return img;
}

/// Decodes any PNG to 8-bit RGB (for overlays and previews).
inline Result<RgbImage> decode_rgb_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    return make_error("unreadable", std::string("unreadable file: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    return make_error("unreadable", std::string("unreadable file: ") + image.message);
  }
  return out;
}

namespace detail {

// channels: 1 (gray) or 3 (rgb); depth 8 or 16 (16 only for gray).
inline std::vector<std::uint8_t> encode_png(int width, int height, int channels, int depth,
                                            const std::vector<std::uint8_t>& packed) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            png_silent_warning);
  if (png == nullptr) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (depth / 8);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_mem_write, png_mem_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed compression settings keep encoder output byte-stable.
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(packed.data() + static_cast<std::size_t>(y) * rowbytes);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_gray8_png(int width, int height,
                                                  const std::vector<std::uint8_t>& samples) {
  return detail::encode_png(width, height, 1, 8, samples);
}

inline std::vector<std::uint8_t> encode_gray16_png(int width, int height,
                                                   const std::vector<std::uint16_t>& samples) {
  std::vector<std::uint8_t> packed(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    packed[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
    packed[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xFF);
  }
  return detail::encode_png(width, height, 1, 16, packed);
}

inline std::vector<std::uint8_t> encode_rgb_png(const RgbImage& img) {
  return detail::encode_png(img.width, img.height, 3, 8, img.rgb);
}

inline std::vector<std::uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace medground
