#pragma once

// Raster operations on unit-interval images.
//
// Pixels are stored planar (all of channel 0, then channel 1, ...), row-major
// within a plane, as single-precision floats. Filtering arithmetic is done in
// double and results are clamped to [0, 1] once on exit.
//
// Borders use half-sample symmetric reflection (... c b a | a b c ... ), which
// keeps constant images fixed and preserves the mean under any normalized
// symmetric kernel.

#include <cstddef>
#include <span>
#include <vector>

namespace vac {

class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  float& at(int c, int y, int x) { return pixels_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }
  float at(int c, int y, int x) const { return pixels_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }

  std::span<float> data() noexcept { return pixels_; }
  std::span<const float> data() const noexcept { return pixels_; }
  std::span<float> plane(int c) noexcept { return std::span<float>(pixels_).subspan(c * plane_size(), plane_size()); }
  std::span<const float> plane(int c) const noexcept {
    return std::span<const float>(pixels_).subspan(c * plane_size(), plane_size());
  }

  bool same_shape(const Image& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  void clamp() noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> pixels_;
};

/// Maps an out-of-range coordinate into [0, n) by symmetric reflection.
int reflect_index(int i, int n) noexcept;

struct GaussianKernel {
  double sigma = 0.0;
  int radius = 0;               // ceil(3 sigma)
  std::vector<double> weights;  // 2 * radius + 1 taps, sums to 1
};

/// Throws std::invalid_argument for negative or non-finite sigma.
GaussianKernel make_kernel(double sigma);

/// Separable Gaussian blur, horizontal pass then vertical pass.
/// sigma == 0 returns the input unchanged.
Image gaussian_blur(const Image& image, double sigma);

/// Square odd-sized 2-D kernel, row-major.
struct Kernel2d {
  int size = 1;
  std::vector<double> weights{1.0};

  int radius() const noexcept { return size / 2; }
  double at(int dy, int dx) const { return weights[static_cast<std::size_t>(dy + radius()) * size + dx + radius()]; }
};

Kernel2d outer_product(const std::vector<double>& taps);

/// Direct 2-D convolution with reflected borders, O(HW k^2).
/// Throws std::invalid_argument for even kernel sizes.
Image conv2d_reference(const Image& image, const Kernel2d& kernel);

/// 10 log10(1 / MSE) in dB; +infinity for identical images.
/// Throws std::invalid_argument on shape mismatch.
double psnr(const Image& a, const Image& b);

/// Bilinear interpolation with half-pixel centers and clamped edges.
Image resize_bilinear(const Image& image, int new_height, int new_width);

/// Nearest-neighbour resampling with half-pixel centers.
Image resize_nearest(const Image& image, int new_height, int new_width);

/// Bilinear sample at continuous pixel-center coordinates, edges clamped.
double sample_bilinear(const Image& image, int channel, double y, double x) noexcept;

/// Magnifies the central 1/factor region back to full size (factor >= 1).
Image zoom_center(const Image& image, double factor);

Image flip_horizontal(const Image& image);

/// Luma (Rec. 601) of a 3-channel image, or the single channel as-is.
std::vector<double> luminance(const Image& image);

}  // namespace vac
