#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sgw/errors.hpp"

namespace sgw::metrics {

// Grayscale or RGB image with a declared dynamic range [0, R].
class ImageBuffer {
 public:
  ImageBuffer(std::size_t width, std::size_t height, std::size_t channels, double range = 255.0)
      : width_(width), height_(height), channels_(channels), range_(range),
        pixels_(width * height * channels, 0.0) {
    if (width_ < 1 || height_ < 1) throw InvalidArgument("ImageBuffer: dimensions must be >= 1");
    if (channels_ != 1 && channels_ != 3)
      throw InvalidArgument("ImageBuffer: channels must be 1 or 3");
    if (!(range_ > 0.0)) throw InvalidArgument("ImageBuffer: range must be > 0");
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t channels() const { return channels_; }
  double range() const { return range_; }

  double& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels_[(y * width_ + x) * channels_ + c];
  }
  double at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels_[(y * width_ + x) * channels_ + c];
  }

  const std::vector<double>& pixels() const { return pixels_; }
  std::vector<double>& pixels() { return pixels_; }

  void validate_pixels() const {
    for (double v : pixels_)
      if (!(v >= 0.0 && v <= range_))
        throw InvalidArgument("ImageBuffer: pixel outside [0, R]");
  }

  bool same_shape(const ImageBuffer& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

 private:
  std::size_t width_, height_, channels_;
  double range_;
  std::vector<double> pixels_;
};

namespace detail_metrics {

inline void require_comparable(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("images differ in dimensions or channels");
  if (a.range() != b.range()) throw RangeMismatch("images declare different dynamic ranges");
}

}  // namespace detail_metrics

// 10 log10(R^2 / MSE); +inf for identical images.
inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  detail_metrics::require_comparable(a, b);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixels().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(a.range() * a.range() / mse);
}

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

namespace detail_metrics {

inline const std::vector<double>& gaussian_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kSsimWindow * kSsimWindow);
    const double c = (kSsimWindow - 1) / 2.0;
    double sum = 0.0;
    for (std::size_t y = 0; y < kSsimWindow; ++y)
      for (std::size_t x = 0; x < kSsimWindow; ++x) {
        const double dx = x - c, dy = y - c;
        v[y * kSsimWindow + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
        sum += v[y * kSsimWindow + x];
      }
    for (double& e : v) e /= sum;
    return v;
  }();
  return w;
}

}  // namespace detail_metrics

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1 = (0.01 R)^2,
// C2 = (0.03 R)^2, valid-region windows only (no padding), channels averaged.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  detail_metrics::require_comparable(a, b);
  if (a.width() < kSsimWindow || a.height() < kSsimWindow)
    throw TooSmall("ssim: both image dimensions must be >= 11");
  const double c1 = 0.01 * a.range() * 0.01 * a.range();
  const double c2 = 0.03 * a.range() * 0.03 * a.range();
  const auto& win = detail_metrics::gaussian_window();

  double channel_sum = 0.0;
  for (std::size_t ch = 0; ch < a.channels(); ++ch) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t y0 = 0; y0 + kSsimWindow <= a.height(); ++y0) {
      for (std::size_t x0 = 0; x0 + kSsimWindow <= a.width(); ++x0) {
        double mu_a = 0.0, mu_b = 0.0;
        for (std::size_t wy = 0; wy < kSsimWindow; ++wy)
          for (std::size_t wx = 0; wx < kSsimWindow; ++wx) {
            const double w = win[wy * kSsimWindow + wx];
            mu_a += w * a.at(x0 + wx, y0 + wy, ch);
            mu_b += w * b.at(x0 + wx, y0 + wy, ch);
          }
        double var_a = 0.0, var_b = 0.0, cov = 0.0;
        for (std::size_t wy = 0; wy < kSsimWindow; ++wy)
          for (std::size_t wx = 0; wx < kSsimWindow; ++wx) {
            const double w = win[wy * kSsimWindow + wx];
            const double da = a.at(x0 + wx, y0 + wy, ch) - mu_a;
            const double db = b.at(x0 + wx, y0 + wy, ch) - mu_b;
            var_a += w * da * da;
            var_b += w * db * db;
            cov += w * da * db;
          }
        const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
        const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        acc += num / den;
        ++count;
      }
    }
    channel_sum += acc / static_cast<double>(count);
  }
  return channel_sum / static_cast<double>(a.channels());
}

// ---- plain-text PGM (P2) / PPM (P3) ----

namespace detail_metrics {

inline int next_token(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comments per the netpbm convention.
  while (true) {
    const int c = in.peek();
    if (c == EOF) throw MalformedFile(path + ": unexpected end of file");
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
      continue;
    }
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    break;
  }
  int value;
  if (!(in >> value)) throw MalformedFile(path + ": expected an integer token");
  return value;
}

}  // namespace detail_metrics

inline ImageBuffer load_image_pnm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedFile(path + ": cannot open");
  std::string magic;
  if (!(in >> magic)) throw EmptyFile(path + ": empty file");
  std::size_t channels;
  if (magic == "P2") channels = 1;
  else if (magic == "P3") channels = 3;
  else throw MalformedFile(path + ": unsupported magic '" + magic + "', expected P2 or P3");
  const int w = detail_metrics::next_token(in, path);
  const int h = detail_metrics::next_token(in, path);
  const int maxval = detail_metrics::next_token(in, path);
  if (w < 1 || h < 1) throw MalformedFile(path + ": bad dimensions");
  if (maxval < 1) throw MalformedFile(path + ": bad maxval");
  ImageBuffer img(static_cast<std::size_t>(w), static_cast<std::size_t>(h), channels,
                  static_cast<double>(maxval));
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < channels; ++c) {
        const int v = detail_metrics::next_token(in, path);
        if (v < 0 || v > maxval)
          throw MalformedFile(path + ": sample " + std::to_string(v) + " outside [0, maxval]");
        img.at(x, y, c) = static_cast<double>(v);
      }
  return img;
}

inline void save_image_pnm(const ImageBuffer& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MalformedFile(path + ": cannot open for writing");
  out << (img.channels() == 1 ? "P2" : "P3") << "\n"
      << img.width() << " " << img.height() << "\n"
      << static_cast<long>(img.range()) << "\n";
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < img.channels(); ++c) {
        out << static_cast<long>(std::lround(img.at(x, y, c)));
        out << ((x + 1 == img.width() && c + 1 == img.channels()) ? '\n' : ' ');
      }
  }
}

}  // namespace sgw::metrics
