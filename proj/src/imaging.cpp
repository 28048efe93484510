#include "vac/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace vac {

namespace {

float clamp_unit(double v) noexcept { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("image dimensions must be positive");
  if (channels != 1 && channels != 3) throw std::invalid_argument("images have 1 or 3 channels");
  pixels_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

void Image::clamp() noexcept {
  for (float& v : pixels_) v = std::clamp(v, 0.0f, 1.0f);
}

int reflect_index(int i, int n) noexcept {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

GaussianKernel make_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("gaussian sigma must be finite and >= 0");
  GaussianKernel k;
  k.sigma = sigma;
  if (sigma == 0.0) {
    k.weights = {1.0};
    return k;
  }
  k.radius = static_cast<int>(std::ceil(3.0 * sigma));
  k.weights.resize(2 * k.radius + 1);
  double sum = 0.0;
  for (int t = -k.radius; t <= k.radius; ++t) {
    const double w = std::exp(-(t * t) / (2.0 * sigma * sigma));
    k.weights[t + k.radius] = w;
    sum += w;
  }
  for (double& w : k.weights) w /= sum;
  return k;
}

Image gaussian_blur(const Image& image, double sigma) {
  const GaussianKernel k = make_kernel(sigma);
  if (k.radius == 0) return image;

  const int h = image.height(), w = image.width(), r = k.radius;
  Image out(h, w, image.channels());
  std::vector<double> horiz(image.plane_size());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t) acc += k.weights[t + r] * image.at(c, y, reflect_index(x - t, w));
        horiz[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          acc += k.weights[t + r] * horiz[static_cast<std::size_t>(reflect_index(y - t, h)) * w + x];
        out.at(c, y, x) = clamp_unit(acc);
      }
    }
  }
  return out;
}

Kernel2d outer_product(const std::vector<double>& taps) {
  Kernel2d k;
  k.size = static_cast<int>(taps.size());
  k.weights.resize(taps.size() * taps.size());
  for (std::size_t i = 0; i < taps.size(); ++i)
    for (std::size_t j = 0; j < taps.size(); ++j) k.weights[i * taps.size() + j] = taps[i] * taps[j];
  return k;
}

Image conv2d_reference(const Image& image, const Kernel2d& kernel) {
  if (kernel.size % 2 == 0 || kernel.size < 1) throw std::invalid_argument("convolution kernel size must be odd");
  if (kernel.weights.size() != static_cast<std::size_t>(kernel.size) * kernel.size)
    throw std::invalid_argument("convolution kernel has wrong number of weights");
  const int h = image.height(), w = image.width(), r = kernel.radius();
  Image out(h, w, image.channels());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          const int sy = reflect_index(y - dy, h);
          for (int dx = -r; dx <= r; ++dx) acc += kernel.at(dy, dx) * image.at(c, sy, reflect_index(x - dx, w));
        }
        out.at(c, y, x) = clamp_unit(acc);
      }
    }
  }
  return out;
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: image shapes differ");
  double sse = 0.0;
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - db[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(da.size()) / sse);
}

double sample_bilinear(const Image& image, int channel, double y, double x) noexcept {
  const int h = image.height(), w = image.width();
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - y0, fx = x - x0;
  const double top = (1.0 - fx) * image.at(channel, y0, x0) + fx * image.at(channel, y0, x1);
  const double bottom = (1.0 - fx) * image.at(channel, y1, x0) + fx * image.at(channel, y1, x1);
  return (1.0 - fy) * top + fy * bottom;
}

Image resize_bilinear(const Image& image, int new_height, int new_width) {
  if (new_height <= 0 || new_width <= 0) throw std::invalid_argument("resize target must be positive");
  const double sy = static_cast<double>(image.height()) / new_height;
  const double sx = static_cast<double>(image.width()) / new_width;
  Image out(new_height, new_width, image.channels());
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < new_height; ++y)
      for (int x = 0; x < new_width; ++x)
        out.at(c, y, x) = clamp_unit(sample_bilinear(image, c, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5));
  return out;
}

Image resize_nearest(const Image& image, int new_height, int new_width) {
  if (new_height <= 0 || new_width <= 0) throw std::invalid_argument("resize target must be positive");
  Image out(new_height, new_width, image.channels());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < new_height; ++y) {
      const int src_y = std::min(image.height() - 1, (y * image.height()) / new_height);
      for (int x = 0; x < new_width; ++x) {
        const int src_x = std::min(image.width() - 1, (x * image.width()) / new_width);
        out.at(c, y, x) = image.at(c, src_y, src_x);
      }
    }
  }
  return out;
}

Image zoom_center(const Image& image, double factor) {
  if (!(factor >= 1.0)) throw std::invalid_argument("zoom factor must be >= 1");
  const int h = image.height(), w = image.width();
  const double cy = 0.5 * h, cx = 0.5 * w;
  Image out(h, w, image.channels());
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(c, y, x) =
            clamp_unit(sample_bilinear(image, c, (y + 0.5 - cy) / factor + cy - 0.5, (x + 0.5 - cx) / factor + cx - 0.5));
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out(image.height(), image.width(), image.channels());
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < image.height(); ++y)
      for (int x = 0; x < image.width(); ++x) out.at(c, y, x) = image.at(c, y, image.width() - 1 - x);
  return out;
}

std::vector<double> luminance(const Image& image) {
  std::vector<double> out(image.plane_size());
  if (image.channels() == 1) {
    const auto p = image.plane(0);
    std::copy(p.begin(), p.end(), out.begin());
    return out;
  }
  const auto r = image.plane(0), g = image.plane(1), b = image.plane(2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

}  // namespace vac
