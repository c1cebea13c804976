#pragma once

// 8-bit PNG decode/encode on top of libpng, entirely in memory.

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hierxai::png {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved 8-bit raster (row-major, channels innermost).
struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;

  bool operator==(const Raster&) const = default;
};

namespace detail {

struct ReadCursor {
  std::string_view bytes;
  std::size_t pos = 0;
};

inline void read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->bytes.size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, cur->bytes.data() + cur->pos, n);
  cur->pos += n;
}

inline void write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

inline void flush_fn(png_structp) {}

[[noreturn]] inline void error_fn(png_structp, png_const_charp msg) { throw PngError(msg); }
inline void warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

/// Decodes an 8-bit gray or RGB PNG. Palette images are expanded to RGB and
/// alpha is dropped; 16-bit images are rejected.
inline Raster decode(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
    throw PngError("not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::error_fn, detail::warning_fn);
  if (!png) throw PngError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw PngError("png_create_info_struct failed");
  }
  Raster r;
  try {
    detail::ReadCursor cur{bytes, 0};
    png_set_read_fn(png, &cur, detail::read_fn);
    png_read_info(png, info);
    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (width == 0 || height == 0) throw PngError("zero-sized PNG");
    if (depth == 16) throw PngError("unsupported PNG bit depth 16");
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) throw PngError("unsupported PNG channel layout");
    r.height = height;
    r.width = width;
    r.channels = static_cast<std::size_t>(channels);
    r.pixels.resize(r.height * r.width * r.channels);
    std::vector<png_bytep> rows(r.height);
    for (std::size_t y = 0; y < r.height; ++y) rows[y] = r.pixels.data() + y * r.width * r.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return r;
}

/// Encodes deterministically: fixed compression level and filter, no
/// timestamp or text chunks.
inline std::string encode(const Raster& r) {
  if (r.channels != 1 && r.channels != 3) throw PngError("PNG encode supports 1 or 3 channels");
  if (r.pixels.size() != r.height * r.width * r.channels) throw PngError("raster size mismatch");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::error_fn, detail::warning_fn);
  if (!png) throw PngError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw PngError("png_create_info_struct failed");
  }
  std::string out;
  try {
    png_set_write_fn(png, &out, detail::write_fn, detail::flush_fn);
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), 8,
                 r.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < r.height; ++y)
      png_write_row(png, const_cast<png_bytep>(r.pixels.data() + y * r.width * r.channels));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PngError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PngError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace hierxai::png
