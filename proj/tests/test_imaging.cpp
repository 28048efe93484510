#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "vac/imaging.hpp"

using namespace vac;

namespace {

double max_abs_diff(const Image& got, const std::vector<double>& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got.data()[i] - want[i]));
  return worst;
}

double mean(const Image& img) {
  double s = 0.0;
  for (float v : img.data()) s += v;
  return s / static_cast<double>(img.size());
}

}  // namespace

TEST_SUITE("imaging") {
  TEST_CASE("reflection index") {
    CHECK(reflect_index(-1, 5) == 0);
    CHECK(reflect_index(-2, 5) == 1);
    CHECK(reflect_index(5, 5) == 4);
    CHECK(reflect_index(6, 5) == 3);
    CHECK(reflect_index(3, 5) == 3);
    for (int n : {1, 2, 7, 32})
      for (int i = -100; i <= 100; ++i) CHECK(reflect_index(i, n) == oracle::reflect(i, n));
  }

  TEST_CASE("kernel shape") {
    const auto k = make_kernel(2.0);
    CHECK(k.radius == 6);
    CHECK(k.weights.size() == 13);
    CHECK(std::accumulate(k.weights.begin(), k.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    for (int t = 0; t < k.radius; ++t) CHECK(k.weights[t] == k.weights[2 * k.radius - t]);
    CHECK(make_kernel(0.5).radius == 2);
    CHECK_THROWS_AS(make_kernel(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_kernel(NAN), std::invalid_argument);
  }

  TEST_CASE("separable blur matches direct 2-D convolution") {
    double worst = 0.0;
    int image = 0;
    for (double sigma : {0.5, 1.0, 2.0, 4.0, 8.0})
      for (int i = 0; i < 12; ++i, ++image) {
        const int h = 6 + (image * 7) % 27, w = 5 + (image * 11) % 28;
        const Image img = oracle::random_image(h, w, image % 2 ? 3 : 1, 100 + image);
        worst = std::max(worst, max_abs_diff(gaussian_blur(img, sigma), oracle::brute_blur(img, sigma)));
      }
    CHECK(worst <= 1e-6);
  }

  TEST_CASE("library reference convolution agrees with the separable path") {
    const Image img = oracle::random_image(20, 17, 3, 3);
    const Image sep = gaussian_blur(img, 1.5);
    const Image direct = conv2d_reference(img, outer_product(make_kernel(1.5).weights));
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(sep.data()[i] - direct.data()[i]) <= 1e-6);
    Kernel2d even;
    even.size = 2;
    even.weights = {1, 0, 0, 0};
    CHECK_THROWS_AS(conv2d_reference(img, even), std::invalid_argument);
  }

  TEST_CASE("sigma 0 is the identity bit for bit") {
    const Image img = oracle::random_image(32, 32, 3, 1);
    CHECK(gaussian_blur(img, 0.0) == img);
  }

  TEST_CASE("constant images are fixed points") {
    for (float v : {0.0f, 0.25f, 1.0f}) {
      const Image img(16, 16, 3, v);
      for (double sigma : {0.5, 2.0, 8.0}) {
        const Image out = gaussian_blur(img, sigma);
        for (float p : out.data()) CHECK(std::abs(p - v) <= 1e-6);
      }
    }
  }

  TEST_CASE("blur preserves the mean, is linear and stays in range") {
    const Image a = oracle::random_image(24, 24, 3, 10);
    const Image b = oracle::random_image(24, 24, 3, 11);
    for (double sigma : {1.0, 3.0}) {
      const Image ba = gaussian_blur(a, sigma), bb = gaussian_blur(b, sigma);
      CHECK(std::abs(mean(ba) - mean(a)) <= 1e-5);
      Image mix(24, 24, 3);
      for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = 0.3f * a.data()[i] + 0.7f * b.data()[i];
      const Image bm = gaussian_blur(mix, sigma);
      for (std::size_t i = 0; i < mix.size(); ++i) {
        CHECK(std::abs(bm.data()[i] - (0.3 * ba.data()[i] + 0.7 * bb.data()[i])) <= 1e-5);
        CHECK(bm.data()[i] >= 0.0f);
        CHECK(bm.data()[i] <= 1.0f);
      }
    }
  }

  TEST_CASE("larger sigma removes more variance") {
    const Image img = oracle::random_image(32, 32, 1, 12);
    auto variance = [](const Image& im) {
      const double m = mean(im);
      double s = 0.0;
      for (float v : im.data()) s += (v - m) * (v - m);
      return s;
    };
    CHECK(variance(gaussian_blur(img, 1.0)) < variance(img));
    CHECK(variance(gaussian_blur(img, 2.0)) < variance(gaussian_blur(img, 1.0)));
  }

  TEST_CASE("psnr") {
    const Image a(8, 8, 1, 0.5f);
    CHECK(std::isinf(psnr(a, a)));
    Image b = a;
    for (float& v : b.data()) v = 0.6f;
    // MSE = 0.01 everywhere.
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
    CHECK_THROWS_AS(psnr(a, Image(8, 9, 1)), std::invalid_argument);
  }

  TEST_CASE("resampling") {
    Image img(2, 2, 1);
    img.at(0, 0, 0) = 0.0f;
    img.at(0, 0, 1) = 1.0f;
    img.at(0, 1, 0) = 0.5f;
    img.at(0, 1, 1) = 0.25f;
    const Image up = resize_nearest(img, 4, 4);
    CHECK(up.at(0, 0, 0) == 0.0f);
    CHECK(up.at(0, 1, 1) == 0.0f);
    CHECK(up.at(0, 0, 3) == 1.0f);
    CHECK(up.at(0, 3, 0) == 0.5f);
    CHECK(up.at(0, 3, 3) == 0.25f);
    CHECK(resize_nearest(up, 2, 2) == img);

    CHECK(sample_bilinear(img, 0, 0.5, 0.5) == doctest::Approx(0.4375));
    CHECK(sample_bilinear(img, 0, -3.0, 9.0) == 1.0);

    const Image r = oracle::random_image(9, 13, 3, 4);
    CHECK(resize_bilinear(r, 9, 13) == r);
    const Image half = resize_bilinear(oracle::random_image(8, 8, 1, 5), 4, 4);
    CHECK(half.height() == 4);
    CHECK_THROWS_AS(resize_bilinear(r, 0, 3), std::invalid_argument);
  }

  TEST_CASE("zoom and flip") {
    const Image img = oracle::random_image(10, 12, 3, 6);
    CHECK(zoom_center(img, 1.0) == img);
    CHECK_THROWS_AS(zoom_center(img, 0.5), std::invalid_argument);
    const Image f = flip_horizontal(img);
    CHECK(f.at(1, 2, 0) == img.at(1, 2, 11));
    CHECK(flip_horizontal(f) == img);
  }

  TEST_CASE("luminance") {
    Image img(1, 1, 3);
    img.at(0, 0, 0) = 1.0f;
    CHECK(luminance(img)[0] == doctest::Approx(0.299));
    CHECK_THROWS_AS(Image(0, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(Image(3, 3, 2), std::invalid_argument);
  }
}
