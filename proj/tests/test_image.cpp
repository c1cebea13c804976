#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "hierxai/image.hpp"
#include "hierxai/image_io.hpp"
#include "hierxai/npy.hpp"
#include "hierxai/png_io.hpp"

using namespace hierxai;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "hierxai_test_image";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Image random_image(std::size_t h, std::size_t w, std::size_t c, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> d(h * w * c);
  for (auto& v : d) v = u(rng);
  return Image(h, w, c, std::move(d));
}

Mask random_mask(std::size_t h, std::size_t w, std::mt19937& rng) {
  Mask m(h, w);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng() % 3 == 0);
  return m;
}

// Bilinear sample with half-pixel centers, written out directly.
float bilinear_at(const std::vector<float>& src, int sh, int sw, double fy, double fx) {
  fy = std::clamp(fy, 0.0, double(sh - 1));
  fx = std::clamp(fx, 0.0, double(sw - 1));
  const int y0 = int(fy), x0 = int(fx);
  const int y1 = std::min(y0 + 1, sh - 1), x1 = std::min(x0 + 1, sw - 1);
  const double dy = fy - y0, dx = fx - x0;
  return float(src[y0 * sw + x0] * (1 - dy) * (1 - dx) + src[y0 * sw + x1] * (1 - dy) * dx +
               src[y1 * sw + x0] * dy * (1 - dx) + src[y1 * sw + x1] * dy * dx);
}

}  // namespace

TEST(Image, RejectsBadShapes) {
  EXPECT_THROW(Image(1, 4, 1), std::invalid_argument);
  EXPECT_THROW(Image(2, 2, 2), std::invalid_argument);
  EXPECT_THROW(Image(2, 2, 1, std::vector<float>(3)), std::invalid_argument);
  EXPECT_THROW(Image(2, 2, 1, std::vector<float>{0, 0, 0, NAN}), std::invalid_argument);
  EXPECT_THROW(Image(2, 2, 1, std::vector<float>(4), Normalization{{0.5f}, {0.0f}}), std::invalid_argument);
}

TEST(LoadImage, BlackPngIsZero) {
  const auto p = scratch("black.png");
  png::write_file(p, png::encode({2, 2, 3, std::vector<std::uint8_t>(12, 0)}));
  const Image img = load_image(p);
  EXPECT_EQ(img.height(), 2u);
  EXPECT_EQ(img.channels(), 3u);
  for (float v : img.data()) EXPECT_EQ(v, 0.0f);
}

TEST(LoadImage, NoTargetKeepsSize) {
  const auto p = scratch("big.png");
  png::write_file(p, png::encode({224, 224, 3, std::vector<std::uint8_t>(224 * 224 * 3, 77)}));
  const Image img = load_image(p);
  EXPECT_EQ(img.height(), 224u);
  EXPECT_EQ(img.width(), 224u);
  EXPECT_EQ(img.channels(), 3u);
}

TEST(LoadImage, GrayResizeMatchesBilinearFormula) {
  const std::vector<std::uint8_t> px{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140, 250};
  const auto p = scratch("gray4.png");
  png::write_file(p, png::encode({4, 4, 1, px}));
  const Image img = load_image(p, Size2{2, 2});
  ASSERT_EQ(img.height(), 2u);
  std::vector<float> src(px.begin(), px.end());
  for (auto& v : src) v /= 255.0f;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      // destination center maps to source coordinate 2*y + 0.5
      EXPECT_NEAR(img.at(0, y, x), bilinear_at(src, 4, 4, 2 * y + 0.5, 2 * x + 0.5), 1e-6);
      // which is the plain average of the 2x2 block
      const float block = (src[(2 * y) * 4 + 2 * x] + src[(2 * y) * 4 + 2 * x + 1] + src[(2 * y + 1) * 4 + 2 * x] +
                           src[(2 * y + 1) * 4 + 2 * x + 1]) / 4;
      EXPECT_NEAR(img.at(0, y, x), block, 1e-6);
    }
}

TEST(LoadImage, Errors) {
  EXPECT_THROW(load_image(scratch("nope.png")), ImageIoError);
  const auto p = scratch("garbage.png");
  png::write_file(p, "not an image at all");
  EXPECT_THROW(load_image(p), ImageIoError);
}

TEST(LoadImage, NpyLayouts) {
  std::vector<float> chw(3 * 2 * 4);
  for (std::size_t i = 0; i < chw.size(); ++i) chw[i] = float(i) / 24;
  const auto p = scratch("chw.npy");
  npy::write_f32(p, {3, 2, 4}, chw);
  const Image a = load_image(p);
  EXPECT_EQ(a.at(2, 1, 3), chw[2 * 8 + 1 * 4 + 3]);

  std::vector<float> hwc(2 * 4 * 3);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) hwc[(y * 4 + x) * 3 + c] = chw[c * 8 + y * 4 + x];
  const auto q = scratch("hwc.npy");
  npy::write_f32(q, {2, 4, 3}, hwc);
  EXPECT_EQ(load_image(q), a);
}

TEST(ApplyMask, Examples) {
  const Image img(2, 2, 1, std::vector<float>{1, 2, 3, 4});
  EXPECT_EQ(apply_mask(img, Mask(2, 2), FillPolicy::constant(0)), img);
  const Image all = apply_mask(img, Mask(2, 2, true), FillPolicy::constant(0));
  for (float v : all.data()) EXPECT_EQ(v, 0.0f);
  Mask top(2, 2);
  top.set(0);
  top.set(1);
  const Image out = apply_mask(img, top, FillPolicy::constant(0));
  EXPECT_EQ(std::vector<float>(out.data().begin(), out.data().end()), (std::vector<float>{0, 0, 3, 4}));
}

TEST(ApplyMask, FillPolicies) {
  const Normalization norm{{0.5f, 0.5f, 0.5f}, {0.25f, 0.25f, 0.25f}};
  const Image img = normalize(Image(2, 2, 3, 0.9f), norm);
  const Mask m(2, 2, true);
  const Image zero = apply_mask(img, m, FillPolicy::normalized_zero());
  for (float v : zero.data()) EXPECT_EQ(v, 0.0f);
  const Image black = apply_mask(img, m, FillPolicy::constant(0.0f));
  for (float v : black.data()) EXPECT_FLOAT_EQ(v, -2.0f);
  const Image dm = apply_mask(img, m, FillPolicy::dataset_mean({0.5f, 0.75f, 1.0f}));
  EXPECT_FLOAT_EQ(dm.at(0, 0, 0), 0.0f);
  EXPECT_FLOAT_EQ(dm.at(1, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(dm.at(2, 1, 1), 2.0f);
  EXPECT_THROW(apply_mask(img, m, FillPolicy::dataset_mean({0.5f})), std::invalid_argument);
  EXPECT_THROW(apply_mask(img, Mask(3, 2), FillPolicy::normalized_zero()), std::invalid_argument);
}

TEST(ApplyMask, IdempotentAndDisjointUnion) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Image img = random_image(5, 6, trial % 2 ? 3 : 1, rng);
    const Mask m1 = random_mask(5, 6, rng);
    const Mask m2 = random_mask(5, 6, rng) & m1.complement();
    const FillPolicy f = FillPolicy::constant(0.3f);
    const Image once = apply_mask(img, m1, f);
    EXPECT_EQ(apply_mask(once, m1, f), once);
    EXPECT_EQ(apply_mask(once, m2, f), apply_mask(img, m1 | m2, f));
    // pixels outside the mask are untouched
    for (std::size_t c = 0; c < img.channels(); ++c)
      for (std::size_t i = 0; i < img.pixel_count(); ++i)
        if (!m1[i]) {
          EXPECT_EQ(once.plane(c)[i], img.plane(c)[i]);
        }
  }
}

TEST(Composite, TakesSourceInsideMask) {
  const Image base(2, 2, 1, 0.0f), src(2, 2, 1, 1.0f);
  Mask m(2, 2);
  m.set(3);
  const Image out = composite(base, src, m);
  EXPECT_EQ(out.at(0, 1, 1), 1.0f);
  EXPECT_EQ(out.at(0, 0, 0), 0.0f);
}

TEST(Blur, KeepAllIsIdentity) {
  std::mt19937 rng(3);
  const Image img = random_image(9, 7, 3, rng);
  const Image out = blur_baseline(img, 1.0);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.data()[i], img.data()[i], 1e-6);
}

TEST(Blur, ConstantStaysConstant) {
  const Image img(16, 12, 3, 0.375f);
  for (double k : {0.01, 0.1, 0.25, 0.6}) {
    const Image out = blur_baseline(img, k);
    for (float v : out.data()) EXPECT_NEAR(v, 0.375f, 1e-6);
  }
}

TEST(Blur, RampTwoStage) {
  std::vector<float> ramp(16);
  for (int i = 0; i < 16; ++i) ramp[i] = float(i);
  const Image img(4, 4, 1, ramp);
  const Image out = blur_baseline(img, 0.25);
  // stage 1: 2x2 box means
  std::vector<float> small(4);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      small[y * 2 + x] = (ramp[8 * y + 2 * x] + ramp[8 * y + 2 * x + 1] + ramp[8 * y + 4 + 2 * x] + ramp[8 * y + 5 + 2 * x]) / 4;
  EXPECT_EQ(small, (std::vector<float>{2.5f, 4.5f, 10.5f, 12.5f}));
  // stage 2: bilinear upsample, source coordinate (d + 0.5) / 2 - 0.5
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      EXPECT_NEAR(out.at(0, y, x), bilinear_at(small, 2, 2, (y + 0.5) / 2 - 0.5, (x + 0.5) / 2 - 0.5), 1e-5);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0), 2.5f);
  EXPECT_FLOAT_EQ(out.at(0, 1, 1), 2.5f + 0.25f * 2 + 0.25f * 8);
}

TEST(Blur, RoughlyPreservesMean) {
  std::mt19937 rng(11);
  const Image img = random_image(32, 32, 1, rng);
  const Image out = blur_baseline(img, 0.1);
  double a = 0, b = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    a += img.data()[i];
    b += out.data()[i];
  }
  EXPECT_NEAR(b / a, 1.0, 0.02);
  EXPECT_THROW(blur_baseline(img, 0.0), std::invalid_argument);
  EXPECT_THROW(blur_baseline(img, 1.5), std::invalid_argument);
}

TEST(Channels, GrayRgbRoundTrip) {
  const Image g(3, 3, 1, 0.4f);
  const Image rgb = convert_channels(g, 3);
  EXPECT_EQ(rgb.channels(), 3u);
  EXPECT_FLOAT_EQ(rgb.at(2, 1, 1), 0.4f);
  EXPECT_NEAR(convert_channels(rgb, 1).at(0, 2, 2), 0.4f, 1e-6);
}

TEST(Normalization, RoundTrip) {
  std::mt19937 rng(5);
  const Image img = random_image(4, 5, 3, rng);
  const Image n = normalize(img, {{0.485f, 0.456f, 0.406f}, {0.229f, 0.224f, 0.225f}});
  const Image back = denormalize(n);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.data()[i], img.data()[i], 1e-6);
  EXPECT_THROW(normalize(n, *n.normalization()), std::invalid_argument);
}

TEST(Npy, RoundTripBitExact) {
  std::mt19937 rng(2);
  std::vector<float> v(5 * 7);
  for (auto& x : v) x = std::uniform_real_distribution<float>(-3, 3)(rng);
  const auto p = scratch("rt.npy");
  npy::write_f32(p, {5, 7}, v);
  const npy::Array a = npy::read(p);
  EXPECT_EQ(a.shape, (std::vector<std::size_t>{5, 7}));
  EXPECT_EQ(a.f32, v);
  const std::string bytes = npy::serialize_f32({5, 7}, v);
  EXPECT_EQ(bytes.substr(0, 6), "\x93NUMPY");
  EXPECT_EQ((bytes.size() - v.size() * 4) % 64, 0u);
}

TEST(Npy, RejectsCorruptInput) {
  EXPECT_THROW(npy::parse("\x93NUMPY"), npy::NpyError);
  EXPECT_THROW(npy::parse("hello world, definitely not npy"), npy::NpyError);
  std::string bytes = npy::serialize_f32({4}, {1, 2, 3, 4});
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(npy::parse(bytes), npy::NpyError);
  EXPECT_THROW(npy::serialize_f32({3}, {1, 2}), npy::NpyError);
}

TEST(Png, RoundTrip) {
  std::mt19937 rng(9);
  for (std::size_t c : {1u, 3u}) {
    png::Raster r{5, 6, c, std::vector<std::uint8_t>(30 * c)};
    for (auto& b : r.pixels) b = std::uint8_t(rng());
    EXPECT_EQ(png::decode(png::encode(r)), r);
  }
  const Image img(3, 4, 3, 0.5f);
  const auto p = scratch("half.png");
  save_png(p, img);
  const Image loaded = load_image(p);
  for (float v : loaded.data()) EXPECT_NEAR(v, 128.0f / 255.0f, 1e-6);
}

TEST(MaskIo, RoundTrip) {
  Mask m(3, 3);
  m.set(4);
  m.set(8);
  const auto p = scratch("m.npy");
  save_mask(p, m);
  EXPECT_EQ(load_mask(p), m);
}
