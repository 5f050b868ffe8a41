#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sgw/metrics.hpp"
#include "sgw/rng.hpp"

namespace {

using sgw::SeededRng;
using sgw::metrics::ImageBuffer;

ImageBuffer random_image(SeededRng& rng, std::size_t w, std::size_t h, std::size_t c,
                         double range = 255.0) {
  ImageBuffer img(w, h, c, range);
  for (auto& p : img.pixels()) p = rng.uniform(0.0, range);
  return img;
}

TEST(Psnr, IdenticalImagesHitTheInfinitySentinel) {
  SeededRng rng(1);
  const auto a = random_image(rng, 16, 16, 1);
  EXPECT_TRUE(std::isinf(sgw::metrics::psnr(a, a)));
}

TEST(Psnr, ConstantOffsetClosedForm) {
  // b = a + 16 everywhere: MSE = 256, PSNR = 10 log10(255^2/256) ~ 24.05 dB.
  SeededRng rng(2);
  ImageBuffer a(12, 9, 1, 255.0);
  for (auto& p : a.pixels()) p = rng.uniform(0.0, 239.0);
  ImageBuffer b = a;
  for (auto& p : b.pixels()) p += 16.0;
  EXPECT_NEAR(sgw::metrics::psnr(a, b), 10.0 * std::log10(65025.0 / 256.0), 1e-12);
  EXPECT_NEAR(sgw::metrics::psnr(a, b), 24.05, 0.01);
}

TEST(Psnr, SingleHotPixelClosedForm) {
  // One pixel differs by 255 in a 16x16 image: MSE = 255^2/256,
  // PSNR = 10 log10(256) ~ 24.08 dB.
  ImageBuffer a(16, 16, 1, 255.0);
  ImageBuffer b = a;
  b.at(3, 5, 0) = 255.0;
  EXPECT_NEAR(sgw::metrics::psnr(a, b), 10.0 * std::log10(256.0), 1e-12);
  EXPECT_NEAR(sgw::metrics::psnr(a, b), 24.08, 0.01);
}

TEST(Psnr, SymmetricInItsArguments) {
  SeededRng rng(3);
  const auto a = random_image(rng, 20, 14, 3);
  const auto b = random_image(rng, 20, 14, 3);
  EXPECT_NEAR(sgw::metrics::psnr(a, b), sgw::metrics::psnr(b, a), 1e-12);
}

TEST(Psnr, StrictlyDecreasesWithNoiseAmplitude) {
  SeededRng rng(4);
  ImageBuffer a(24, 24, 1, 255.0);
  for (auto& p : a.pixels()) p = rng.uniform(60.0, 190.0);
  double prev = std::numeric_limits<double>::infinity();
  for (const double amp : {4.0, 16.0, 48.0}) {
    SeededRng noise(5);
    ImageBuffer b = a;
    for (auto& p : b.pixels())
      p = std::min(255.0, std::max(0.0, p + amp * (noise.uniform() - 0.5)));
    const double v = sgw::metrics::psnr(a, b);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Psnr, ShapeAndRangeErrors) {
  ImageBuffer a(8, 8, 1), b(8, 9, 1), c(8, 8, 1, 128.0);
  EXPECT_THROW(sgw::metrics::psnr(a, b), sgw::ShapeMismatch);
  EXPECT_THROW(sgw::metrics::psnr(a, c), sgw::RangeMismatch);
}

TEST(Ssim, IdenticalImagesScoreOne) {
  SeededRng rng(6);
  const auto a = random_image(rng, 16, 16, 1);
  EXPECT_NEAR(sgw::metrics::ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesClosedForm) {
  // Variance terms vanish; SSIM = (2 mu_a mu_b + C1)/(mu_a^2 + mu_b^2 + C1).
  ImageBuffer a(15, 13, 1, 255.0), b(15, 13, 1, 255.0);
  for (auto& p : a.pixels()) p = 90.0;
  for (auto& p : b.pixels()) p = 140.0;
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double expected = (2.0 * 90.0 * 140.0 + c1) / (90.0 * 90.0 + 140.0 * 140.0 + c1);
  EXPECT_NEAR(sgw::metrics::ssim(a, b), expected, 1e-9);
}

TEST(Ssim, SymmetricInItsArguments) {
  SeededRng rng(7);
  const auto a = random_image(rng, 18, 16, 3);
  const auto b = random_image(rng, 18, 16, 3);
  EXPECT_NEAR(sgw::metrics::ssim(a, b), sgw::metrics::ssim(b, a), 1e-12);
}

TEST(Ssim, BoundedForInRangeInputs) {
  SeededRng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_image(rng, 14, 14, 1);
    const auto b = random_image(rng, 14, 14, 1);
    const double v = sgw::metrics::ssim(a, b);
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Ssim, TooSmallImagesAreRejected) {
  ImageBuffer a(10, 16, 1), b(10, 16, 1);
  EXPECT_THROW(sgw::metrics::ssim(a, b), sgw::TooSmall);
}

TEST(PnmIo, GrayscaleRoundTrip) {
  SeededRng rng(9);
  ImageBuffer img(13, 11, 1, 255.0);
  for (auto& p : img.pixels()) p = std::floor(rng.uniform(0.0, 256.0));
  const auto path = std::filesystem::temp_directory_path() / "sgw_test_img.pgm";
  sgw::metrics::save_image_pnm(img, path.string());
  const auto back = sgw::metrics::load_image_pnm(path.string());
  ASSERT_EQ(back.width(), img.width());
  ASSERT_EQ(back.height(), img.height());
  ASSERT_EQ(back.channels(), 1u);
  for (std::size_t i = 0; i < img.pixels().size(); ++i)
    EXPECT_DOUBLE_EQ(back.pixels()[i], img.pixels()[i]);
  std::filesystem::remove(path);
}

TEST(PnmIo, ColorImageWithCommentsParses) {
  const auto path = std::filesystem::temp_directory_path() / "sgw_test_img.ppm";
  {
    std::ofstream out(path);
    out << "P3\n# a comment\n2 2\n255\n"
        << "1 2 3  4 5 6\n7 8 9  10 11 12\n";
  }
  const auto img = sgw::metrics::load_image_pnm(path.string());
  EXPECT_EQ(img.channels(), 3u);
  EXPECT_DOUBLE_EQ(img.at(1, 0, 2), 6.0);
  EXPECT_DOUBLE_EQ(img.at(0, 1, 0), 7.0);
  std::filesystem::remove(path);
}

TEST(PnmIo, MalformedFilesThrow) {
  const auto path = std::filesystem::temp_directory_path() / "sgw_test_bad.pgm";
  {
    std::ofstream out(path);
    out << "P2\n3 3\n255\n1 2 3 4\n";  // truncated samples
  }
  EXPECT_THROW(sgw::metrics::load_image_pnm(path.string()), sgw::MalformedFile);
  {
    std::ofstream out(path);
    out << "P7\n1 1\n255\n0\n";  // unsupported magic
  }
  EXPECT_THROW(sgw::metrics::load_image_pnm(path.string()), sgw::MalformedFile);
  {
    std::ofstream out(path);
    out << "P2\n1 1\n255\n999\n";  // sample above maxval
  }
  EXPECT_THROW(sgw::metrics::load_image_pnm(path.string()), sgw::MalformedFile);
  std::filesystem::remove(path);
}

}  // namespace
