#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hierxai {

/// Per-channel (mean, std) that was applied to the stored values:
/// stored = (pixel - mean) / std, with pixel in [0,1].
struct Normalization {
  std::vector<float> mean;
  std::vector<float> std;

  bool operator==(const Normalization&) const = default;
};

/// H x W x C float raster stored channel-major (data[c*H*W + y*W + x]).
class Image {
 public:
  Image() = default;

  Image(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f)
      : Image(height, width, channels, std::vector<float>(height * width * channels, fill)) {}

  Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data,
        std::optional<Normalization> norm = std::nullopt)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)), norm_(std::move(norm)) {
    if (height_ < 2 || width_ < 2) throw std::invalid_argument("image must be at least 2x2");
    if (channels_ != 1 && channels_ != 3) throw std::invalid_argument("image must have 1 or 3 channels");
    if (data_.size() != height_ * width_ * channels_) throw std::invalid_argument("image data length mismatch");
    for (float v : data_)
      if (!std::isfinite(v)) throw std::invalid_argument("image contains non-finite values");
    if (norm_) {
      if (norm_->mean.size() != channels_ || norm_->std.size() != channels_)
        throw std::invalid_argument("normalization length must equal channel count");
      for (float s : norm_->std)
        if (!(s > 0.0f)) throw std::invalid_argument("normalization std must be positive");
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixel_count() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  std::span<const float> plane(std::size_t c) const { return std::span<const float>(data_).subspan(c * pixel_count(), pixel_count()); }
  std::span<float> plane(std::size_t c) { return std::span<float>(data_).subspan(c * pixel_count(), pixel_count()); }

  float at(std::size_t c, std::size_t y, std::size_t x) const { return data_[(c * height_ + y) * width_ + x]; }
  float& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * height_ + y) * width_ + x]; }

  const std::optional<Normalization>& normalization() const { return norm_; }

  /// Value in [0,1] pixel space for a stored value of channel c.
  float to_pixel_space(std::size_t c, float stored) const {
    return norm_ ? stored * norm_->std[c] + norm_->mean[c] : stored;
  }
  float to_stored_space(std::size_t c, float pixel) const {
    return norm_ ? (pixel - norm_->mean[c]) / norm_->std[c] : pixel;
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> data_;
  std::optional<Normalization> norm_;
};

/// Boolean per-pixel mask; true marks pixels to occlude (or select).
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t height, std::size_t width, bool value = false)
      : height_(height), width_(width), bits_(height * width, value ? 1 : 0) {}
  Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
      : height_(height), width_(width), bits_(std::move(bits)) {
    if (bits_.size() != height_ * width_) throw std::invalid_argument("mask length mismatch");
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return bits_.size(); }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }
  bool at(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1})); }
  bool empty() const { return count() == 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }

  Mask complement() const {
    Mask out = *this;
    for (auto& b : out.bits_) b = b ? 0 : 1;
    return out;
  }
  Mask operator|(const Mask& o) const {
    check_same(o);
    Mask out = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | o.bits_[i];
    return out;
  }
  Mask operator&(const Mask& o) const {
    check_same(o);
    Mask out = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & o.bits_[i];
    return out;
  }
  bool subset_of(const Mask& o) const {
    check_same(o);
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] && !o.bits_[i]) return false;
    return true;
  }

  bool operator==(const Mask&) const = default;

 private:
  void check_same(const Mask& o) const {
    if (o.height_ != height_ || o.width_ != width_) throw std::invalid_argument("mask dimension mismatch");
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// How occluded pixels are filled. Values for `constant` and `dataset_mean`
/// are given in [0,1] pixel space and converted through the image's
/// normalization; `normalized_zero` writes 0 into the stored values.
struct FillPolicy {
  enum class Kind { normalized_zero, constant, dataset_mean };

  Kind kind = Kind::normalized_zero;
  float value = 0.0f;
  std::vector<float> channel_means;

  static FillPolicy normalized_zero() { return {}; }
  static FillPolicy constant(float v) { return {Kind::constant, v, {}}; }
  static FillPolicy dataset_mean(std::vector<float> means) { return {Kind::dataset_mean, 0.0f, std::move(means)}; }

  float stored_value(const Image& img, std::size_t c) const {
    switch (kind) {
      case Kind::normalized_zero: return 0.0f;
      case Kind::constant: return img.to_stored_space(c, value);
      case Kind::dataset_mean:
        if (channel_means.size() != img.channels())
          throw std::invalid_argument("fill means length must equal channel count");
        return img.to_stored_space(c, channel_means[c]);
    }
    return 0.0f;
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::normalized_zero: return "normalized_zero";
      case Kind::constant: return "constant:" + std::to_string(value);
      case Kind::dataset_mean: return "dataset_mean";
    }
    return {};
  }
};

inline void check_dims(const Image& img, const Mask& mask) {
  if (mask.height() != img.height() || mask.width() != img.width())
    throw std::invalid_argument("mask dimensions do not match image");
}

/// Replaces masked pixels per `fill`; all other values are copied bit-for-bit.
inline Image apply_mask(const Image& img, const Mask& mask, const FillPolicy& fill) {
  check_dims(img, mask);
  Image out = img;
  const std::size_t n = img.pixel_count();
  for (std::size_t c = 0; c < img.channels(); ++c) {
    const float v = fill.stored_value(img, c);
    auto plane = out.plane(c);
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) plane[i] = v;
  }
  return out;
}

/// Overwrites `base` with `source` wherever mask is true.
inline Image composite(const Image& base, const Image& source, const Mask& mask) {
  check_dims(base, mask);
  if (base.height() != source.height() || base.width() != source.width() || base.channels() != source.channels())
    throw std::invalid_argument("composite images differ in shape");
  Image out = base;
  const std::size_t n = base.pixel_count();
  for (std::size_t c = 0; c < base.channels(); ++c) {
    auto dst = out.plane(c);
    auto src = source.plane(c);
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) dst[i] = src[i];
  }
  return out;
}

namespace detail {

// Half-pixel-center bilinear resampling of one plane.
inline void resample_bilinear(std::span<const float> src, std::size_t sh, std::size_t sw, std::span<float> dst,
                              std::size_t dh, std::size_t dw) {
  const double sy = static_cast<double>(sh) / static_cast<double>(dh);
  const double sx = static_cast<double>(sw) / static_cast<double>(dw);
  for (std::size_t y = 0; y < dh; ++y) {
    double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(sh - 1));
    const auto y0 = static_cast<std::size_t>(std::floor(fy));
    const std::size_t y1 = std::min(y0 + 1, sh - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < dw; ++x) {
      double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(sw - 1));
      const auto x0 = static_cast<std::size_t>(std::floor(fx));
      const std::size_t x1 = std::min(x0 + 1, sw - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1.0 - wx) * src[y0 * sw + x0] + wx * src[y0 * sw + x1];
      const double bot = (1.0 - wx) * src[y1 * sw + x0] + wx * src[y1 * sw + x1];
      dst[y * dw + x] = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
}

// Overlap weights of source cells [i, i+1) with destination cell footprints.
inline std::vector<std::vector<std::pair<std::size_t, double>>> area_weights(std::size_t src, std::size_t dst) {
  std::vector<std::vector<std::pair<std::size_t, double>>> w(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t d = 0; d < dst; ++d) {
    const double lo = static_cast<double>(d) * scale;
    const double hi = static_cast<double>(d + 1) * scale;
    for (auto s = static_cast<std::size_t>(std::floor(lo)); s < src && static_cast<double>(s) < hi; ++s) {
      const double overlap = std::min(hi, static_cast<double>(s + 1)) - std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) w[d].emplace_back(s, overlap / scale);
    }
  }
  return w;
}

// Box (area-average) downsampling of one plane; preserves the plane mean.
inline void resample_area(std::span<const float> src, std::size_t sh, std::size_t sw, std::span<float> dst,
                          std::size_t dh, std::size_t dw) {
  const auto wy = area_weights(sh, dh);
  const auto wx = area_weights(sw, dw);
  for (std::size_t y = 0; y < dh; ++y)
    for (std::size_t x = 0; x < dw; ++x) {
      double acc = 0.0;
      for (auto [iy, ay] : wy[y])
        for (auto [ix, ax] : wx[x]) acc += ay * ax * src[iy * sw + ix];
      dst[y * dw + x] = static_cast<float>(acc);
    }
}

}  // namespace detail

/// Bilinear resize with half-pixel centers and edge clamping.
inline Image resize_bilinear(const Image& img, std::size_t height, std::size_t width) {
  if (height == img.height() && width == img.width()) return img;
  std::vector<float> out(height * width * img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c)
    detail::resample_bilinear(img.plane(c), img.height(), img.width(),
                              std::span<float>(out).subspan(c * height * width, height * width), height, width);
  return Image(height, width, img.channels(), std::move(out), img.normalization());
}

/// Area-average resize; intended for shrinking.
inline Image resize_area(const Image& img, std::size_t height, std::size_t width) {
  if (height == img.height() && width == img.width()) return img;
  std::vector<float> out(height * width * img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c)
    detail::resample_area(img.plane(c), img.height(), img.width(),
                          std::span<float>(out).subspan(c * height * width, height * width), height, width);
  return Image(height, width, img.channels(), std::move(out), img.normalization());
}

/// Blurred reference image: shrink so that roughly keep_fraction of the
/// pixels remain (box average, linear factor sqrt(keep_fraction)), then
/// bilinearly upsample back to the original size.
inline Image blur_baseline(const Image& img, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("keep_fraction must be in (0, 1]");
  const double scale = std::sqrt(keep_fraction);
  const auto small_h = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(static_cast<double>(img.height()) * scale)));
  const auto small_w = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(static_cast<double>(img.width()) * scale)));
  if (small_h >= img.height() && small_w >= img.width()) return img;
  const Image small = resize_area(img, std::min(small_h, img.height()), std::min(small_w, img.width()));
  return resize_bilinear(small, img.height(), img.width());
}

/// Converts between gray and RGB; gray -> RGB replicates, RGB -> gray uses
/// Rec.601 luma. Values are converted in pixel space.
inline Image convert_channels(const Image& img, std::size_t channels) {
  if (channels == img.channels()) return img;
  const std::size_t n = img.pixel_count();
  std::vector<float> out(n * channels);
  if (channels == 3) {
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < n; ++i) out[c * n + i] = img.to_pixel_space(0, img.plane(0)[i]);
  } else if (channels == 1) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = 0.299f * img.to_pixel_space(0, img.plane(0)[i]) + 0.587f * img.to_pixel_space(1, img.plane(1)[i]) +
               0.114f * img.to_pixel_space(2, img.plane(2)[i]);
  } else {
    throw std::invalid_argument("unsupported channel count");
  }
  return Image(img.height(), img.width(), channels, std::move(out));
}

/// Applies (x - mean) / std per channel to an un-normalized image.
inline Image normalize(const Image& img, Normalization norm) {
  if (img.normalization()) throw std::invalid_argument("image is already normalized");
  if (norm.mean.size() != img.channels() || norm.std.size() != img.channels())
    throw std::invalid_argument("normalization length must equal channel count");
  std::vector<float> out(img.data().begin(), img.data().end());
  const std::size_t n = img.pixel_count();
  for (std::size_t c = 0; c < img.channels(); ++c)
    for (std::size_t i = 0; i < n; ++i) out[c * n + i] = (out[c * n + i] - norm.mean[c]) / norm.std[c];
  return Image(img.height(), img.width(), img.channels(), std::move(out), std::move(norm));
}

/// Image values mapped back to [0,1] pixel space (drops normalization).
inline Image denormalize(const Image& img) {
  if (!img.normalization()) return img;
  std::vector<float> out(img.size());
  const std::size_t n = img.pixel_count();
  for (std::size_t c = 0; c < img.channels(); ++c)
    for (std::size_t i = 0; i < n; ++i) out[c * n + i] = img.to_pixel_space(c, img.plane(c)[i]);
  return Image(img.height(), img.width(), img.channels(), std::move(out));
}

}  // namespace hierxai
