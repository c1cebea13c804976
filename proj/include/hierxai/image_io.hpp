#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "hierxai/image.hpp"
#include "hierxai/npy.hpp"
#include "hierxai/png_io.hpp"

namespace hierxai {

struct Size2 {
  std::size_t height = 0;
  std::size_t width = 0;
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Image image_from_raster(const png::Raster& r) {
  const std::size_t n = r.height * r.width;
  std::vector<float> data(n * r.channels);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < r.channels; ++c) data[c * n + i] = static_cast<float>(r.pixels[i * r.channels + c]) / 255.0f;
  return Image(r.height, r.width, r.channels, std::move(data));
}

/// Image (pixel space) quantized to 8 bits per channel.
inline png::Raster raster_from_image(const Image& img) {
  const Image px = denormalize(img);
  png::Raster r{px.height(), px.width(), px.channels(), {}};
  const std::size_t n = px.pixel_count();
  r.pixels.resize(n * px.channels());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < px.channels(); ++c) {
      const float v = std::clamp(px.plane(c)[i], 0.0f, 1.0f);
      r.pixels[i * px.channels() + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  return r;
}

/// Builds an Image from an NPY array shaped (H,W), (C,H,W) or (H,W,C).
/// (C,H,W) wins when both readings are possible.
inline Image image_from_npy(const npy::Array& a) {
  if (a.dtype == npy::DType::u1) throw ImageIoError("image NPY must be float32");
  if (a.shape.size() == 2) return Image(a.shape[0], a.shape[1], 1, a.f32);
  if (a.shape.size() != 3) throw ImageIoError("image NPY must be 2-D or 3-D");
  const auto s0 = a.shape[0], s1 = a.shape[1], s2 = a.shape[2];
  if (s0 == 1 || s0 == 3) return Image(s1, s2, s0, a.f32);
  if (s2 == 1 || s2 == 3) {
    const std::size_t n = s0 * s1;
    std::vector<float> data(n * s2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < s2; ++c) data[c * n + i] = a.f32[i * s2 + c];
    return Image(s0, s1, s2, std::move(data));
  }
  throw ImageIoError("image NPY must have 1 or 3 channels");
}

/// Loads a PNG (8-bit gray/RGB, mapped to [0,1]) or a float32 NPY image,
/// resizing bilinearly to `target` when given.
inline Image load_image(const std::filesystem::path& path, std::optional<Size2> target = std::nullopt) {
  if (!std::filesystem::exists(path)) throw ImageIoError("image not found: " + path.string());
  const std::string bytes = png::read_file(path);
  if (bytes.empty()) throw ImageIoError("empty image file: " + path.string());
  Image img;
  try {
    if (bytes.size() >= 6 && bytes.compare(0, 6, "\x93NUMPY") == 0)
      img = image_from_npy(npy::parse(bytes));
    else
      img = image_from_raster(png::decode(bytes));
  } catch (const std::invalid_argument& e) {
    throw ImageIoError(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw ImageIoError(path.string() + ": " + e.what());
  }
  if (target && (target->height != img.height() || target->width != img.width()))
    img = resize_bilinear(img, target->height, target->width);
  return img;
}

inline void save_png(const std::filesystem::path& path, const Image& img) {
  png::write_file(path, png::encode(raster_from_image(img)));
}

/// Writes an image as float32 NPY in (C,H,W) layout, stored values as-is.
inline void save_npy(const std::filesystem::path& path, const Image& img) {
  npy::write_f32(path, {img.channels(), img.height(), img.width()}, std::vector<float>(img.data().begin(), img.data().end()));
}

inline Mask load_mask(const std::filesystem::path& path) {
  const npy::Array a = npy::read(path);
  if (a.shape.size() != 2) throw ImageIoError("mask NPY must be 2-D");
  if (a.dtype == npy::DType::u1) return Mask(a.shape[0], a.shape[1], a.u8);
  std::vector<std::uint8_t> bits(a.f32.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = a.f32[i] != 0.0f;
  return Mask(a.shape[0], a.shape[1], std::move(bits));
}

inline void save_mask(const std::filesystem::path& path, const Mask& m) {
  npy::write_u8(path, {m.height(), m.width()}, std::vector<std::uint8_t>(m.bits().begin(), m.bits().end()));
}

}  // namespace hierxai
