#include "vac/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "vac/errors.hpp"
#include "vac/parallel.hpp"
#include "vac/text.hpp"

namespace vac {

namespace {

constexpr std::array<std::string_view, 14> kNames = {
    "gaussian_noise", "shot_noise", "impulse_noise", "defocus_blur", "glass_blur",
    "motion_blur",    "zoom_blur",  "snow",          "fog",          "brightness",
    "contrast",       "elastic_transform", "pixelate", "jpeg_approx",
};

std::size_t kind_index(CorruptionKind kind) { return static_cast<std::size_t>(kind); }

void check_severity(int severity) {
  if (severity < 1 || severity > 5) throw ConfigError("severity must be in 1..5, got " + std::to_string(severity));
}

// A single-channel field of doubles, row-major.
struct Field {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Field(int height, int width, double fill = 0.0) : h(height), w(width), v(static_cast<std::size_t>(h) * w, fill) {}
  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Correlation with a reflect-bordered kernel; no clamping.
Field convolve(const Field& f, const Kernel2d& k) {
  Field out(f.h, f.w);
  const int r = k.radius();
  for (int y = 0; y < f.h; ++y)
    for (int x = 0; x < f.w; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double wgt = k.at(dy, dx);
          if (wgt == 0.0) continue;
          acc += wgt * f.at(reflect_index(y + dy, f.h), reflect_index(x + dx, f.w));
        }
      out.at(y, x) = acc;
    }
  return out;
}

Image map_pixels(const Image& in, auto&& fn) {
  Image out = in;
  for (auto& p : out.data()) p = static_cast<float>(fn(static_cast<double>(p)));
  out.clamp();
  return out;
}

Image convolve_image(const Image& in, const Kernel2d& k) { return conv2d_reference(in, k); }

// --- noise ---------------------------------------------------------------

Image gaussian_noise(const Image& in, double stddev, Rng& rng) {
  return map_pixels(in, [&](double x) { return x + stddev * standard_normal(rng); });
}

Image shot_noise(const Image& in, double photons, Rng& rng) {
  if (!(photons > 0)) throw ConfigError("shot_noise photons must be positive");
  return map_pixels(in, [&](double x) {
    const double mean = std::max(x, 0.0) * photons;
    if (mean <= 0.0) return 0.0;
    std::poisson_distribution<long> dist(mean);
    return static_cast<double>(dist(rng)) / photons;
  });
}

// Exactly floor(fraction * H * W) distinct pixel positions, every channel set
// to 0 or 1 together.
Image impulse_noise(const Image& in, double fraction, Rng& rng) {
  Image out = in;
  const std::size_t n = in.plane_size();
  const auto count = static_cast<std::size_t>(std::floor(std::clamp(fraction, 0.0, 1.0) * static_cast<double>(n)));
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_index(rng, n - i);
    std::swap(pos[i], pos[j]);
    const float value = bernoulli(rng, 0.5) ? 1.0f : 0.0f;
    for (int c = 0; c < in.channels(); ++c) out.plane(c)[pos[i]] = value;
  }
  return out;
}

// --- blur ----------------------------------------------------------------

Image glass_blur(const Image& in, int delta, int iterations, Rng& rng) {
  Image out = in;
  const int h = in.height(), w = in.width();
  for (int it = 0; it < iterations; ++it)
    for (int y = h - 1; y >= 0; --y)
      for (int x = w - 1; x >= 0; --x) {
        const int dy = static_cast<int>(uniform_index(rng, 2 * delta + 1)) - delta;
        const int dx = static_cast<int>(uniform_index(rng, 2 * delta + 1)) - delta;
        const int ny = reflect_index(y + dy, h), nx = reflect_index(x + dx, w);
        for (int c = 0; c < in.channels(); ++c) std::swap(out.at(c, y, x), out.at(c, ny, nx));
      }
  return out;
}

Image zoom_blur(const Image& in, double max_zoom) {
  std::vector<double> acc(in.size(), 0.0);
  int n = 0;
  for (int i = 0;; ++i) {
    const double z = 1.0 + 0.01 * i;
    if (z > max_zoom + 1e-9) break;
    const Image zoomed = zoom_center(in, z);
    const auto src = zoomed.data();
    for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += src[p];
    ++n;
  }
  Image out = in;
  auto dst = out.data();
  for (std::size_t p = 0; p < acc.size(); ++p) dst[p] = static_cast<float>(acc[p] / n);
  out.clamp();
  return out;
}

// --- weather -------------------------------------------------------------

Image snow(const Image& in, const std::vector<double>& p, Rng& rng) {
  const double mean = p[0], spread = p[1], threshold = p[2], half_length = p[3], lift = p[4];
  const int h = in.height(), w = in.width();
  Field layer(h, w);
  for (auto& v : layer.v) {
    v = mean + spread * standard_normal(rng);
    if (v < threshold) v = 0.0;
  }
  // Flakes streak roughly downward.
  const double angle = std::numbers::pi * (0.25 + 0.5 * uniform01(rng));
  layer = convolve(layer, line_kernel(half_length, angle));

  const auto gray = luminance(in);
  Image out = in;
  for (int c = 0; c < in.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = in.at(c, y, x);
        const double g = gray[static_cast<std::size_t>(y) * w + x];
        const double lifted = (1.0 - lift) * v + lift * std::max(v, 1.5 * g + 0.5);
        const double flakes = layer.at(y, x) + layer.at(h - 1 - y, w - 1 - x);
        out.at(c, y, x) = static_cast<float>(lifted + flakes);
      }
  out.clamp();
  return out;
}

Image fog(const Image& in, double amount, double decay, Rng& rng) {
  int size = 2;
  while (size < std::max(in.height(), in.width())) size *= 2;
  const auto plasma = plasma_fractal(size, decay, rng);
  const auto px = in.data();
  const double peak = px.empty() ? 0.0 : *std::max_element(px.begin(), px.end());
  Image out = in;
  for (int c = 0; c < in.channels(); ++c)
    for (int y = 0; y < in.height(); ++y)
      for (int x = 0; x < in.width(); ++x) {
        const double haze = amount * plasma[static_cast<std::size_t>(y) * size + x];
        out.at(c, y, x) = static_cast<float>((in.at(c, y, x) + haze) * peak / (peak + amount));
      }
  out.clamp();
  return out;
}

// --- digital -------------------------------------------------------------

Image contrast(const Image& in, double factor) {
  double mean = 0.0;
  for (float v : in.data()) mean += v;
  mean /= static_cast<double>(in.size());
  return map_pixels(in, [&](double x) { return (x - mean) * factor + mean; });
}

Image elastic(const Image& in, double alpha, double smoothing, Rng& rng) {
  const int h = in.height(), w = in.width();
  const Kernel2d k = outer_product(make_kernel(smoothing).weights);
  auto displacement = [&] {
    Field f(h, w);
    for (auto& v : f.v) v = 2.0 * uniform01(rng) - 1.0;
    f = convolve(f, k);
    double ss = 0.0;
    for (double v : f.v) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(f.v.size()));
    for (auto& v : f.v) v = rms > 0 ? alpha * v / rms : 0.0;
    return f;
  };
  const Field dy = displacement();
  const Field dx = displacement();
  Image out = in;
  for (int c = 0; c < in.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(c, y, x) = static_cast<float>(sample_bilinear(in, c, y + dy.at(y, x), x + dx.at(y, x)));
  out.clamp();
  return out;
}

// Downscale by block means, where block (by, bx) is exactly the set of pixels
// the nearest-neighbour upscale maps back to it, then upscale. Bilinear
// downscaling aliases at integer factors and breaks severity ordering.
Image pixelate(const Image& in, double factor) {
  const int h = in.height(), w = in.width();
  const int sh = std::max(1, static_cast<int>(std::lround(h * factor)));
  const int sw = std::max(1, static_cast<int>(std::lround(w * factor)));
  Image small(sh, sw, in.channels());
  std::vector<double> sum(static_cast<std::size_t>(sh) * sw);
  std::vector<int> count(sum.size());
  for (int c = 0; c < in.channels(); ++c) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t b = static_cast<std::size_t>(std::min(sh - 1, y * sh / h)) * sw + std::min(sw - 1, x * sw / w);
        sum[b] += in.at(c, y, x);
        ++count[b];
      }
    auto plane = small.plane(c);
    for (std::size_t b = 0; b < sum.size(); ++b) plane[b] = count[b] ? static_cast<float>(sum[b] / count[b]) : 0.0f;
  }
  return resize_nearest(small, h, w);
}

constexpr std::array<int, 64> kJpegLuma = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,  14, 13, 16, 24, 40,  57,
    69, 56, 14, 17, 22,  29,  51,  87,  80, 62, 18, 22, 37,  56,  68,  109, 103, 77, 24, 35, 55,  64,
    81, 104, 113, 92, 49, 64, 78,  87,  103, 121, 120, 101, 72, 92, 95, 98,  112, 100, 103, 99,
};

// Baseline-JPEG quantization of an 8x8 orthonormal DCT, luma table for every
// channel, no chroma subsampling or entropy coding.
Image jpeg_approx(const Image& in, double quality) {
  const double q = std::clamp(quality, 1.0, 100.0);
  const double scale = q < 50 ? 5000.0 / q : 200.0 - 2.0 * q;
  std::array<double, 64> table{};
  for (int i = 0; i < 64; ++i) table[i] = std::clamp(std::floor((kJpegLuma[i] * scale + 50.0) / 100.0), 1.0, 255.0);

  std::array<double, 64> basis{};  // basis[u * 8 + x]
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x)
      basis[u * 8 + x] = (u == 0 ? std::sqrt(0.125) : 0.5) * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);

  const int h = in.height(), w = in.width();
  Image out = in;
  std::array<double, 64> block{}, tmp{}, coef{};
  for (int c = 0; c < in.channels(); ++c)
    for (int by = 0; by < h; by += 8)
      for (int bx = 0; bx < w; bx += 8) {
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            block[y * 8 + x] = 255.0 * in.at(c, std::min(by + y, h - 1), std::min(bx + x, w - 1)) - 128.0;
        // rows then columns
        for (int y = 0; y < 8; ++y)
          for (int u = 0; u < 8; ++u) {
            double s = 0;
            for (int x = 0; x < 8; ++x) s += basis[u * 8 + x] * block[y * 8 + x];
            tmp[y * 8 + u] = s;
          }
        for (int v = 0; v < 8; ++v)
          for (int u = 0; u < 8; ++u) {
            double s = 0;
            for (int y = 0; y < 8; ++y) s += basis[v * 8 + y] * tmp[y * 8 + u];
            coef[v * 8 + u] = std::round(s / table[v * 8 + u]) * table[v * 8 + u];
          }
        for (int v = 0; v < 8; ++v)
          for (int x = 0; x < 8; ++x) {
            double s = 0;
            for (int u = 0; u < 8; ++u) s += basis[u * 8 + x] * coef[v * 8 + u];
            tmp[v * 8 + x] = s;
          }
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            if (by + y >= h || bx + x >= w) continue;
            double s = 0;
            for (int v = 0; v < 8; ++v) s += basis[v * 8 + y] * tmp[v * 8 + x];
            out.at(c, by + y, bx + x) = static_cast<float>((s + 128.0) / 255.0);
          }
      }
  out.clamp();
  return out;
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  auto res = std::to_chars(buf, buf + sizeof buf, v, 16);
  std::string s(buf, res.ptr);
  return std::string(8 - s.size(), '0') + s;
}

std::uint32_t parse_hex32(std::string_view s, const std::string& where) {
  std::uint32_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw IoError(where + ": bad checksum '" + std::string(s) + "'");
  return v;
}

std::uint32_t suite_checksum(const SuiteManifest& m) {
  std::vector<std::uint8_t> bytes;
  for (const auto& [key, crc] : m.set_checksums)
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * b)));
  return crc32(bytes);
}

}  // namespace

std::string_view to_string(CorruptionKind kind) { return kNames.at(kind_index(kind)); }

std::string_view to_string(CorruptionFamily family) {
  switch (family) {
    case CorruptionFamily::kNoise: return "noise";
    case CorruptionFamily::kBlur: return "blur";
    case CorruptionFamily::kWeather: return "weather";
    case CorruptionFamily::kDigital: return "digital";
  }
  return "?";
}

CorruptionKind parse_corruption_kind(std::string_view name) {
  name = text::trim(name);
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<CorruptionKind>(i);
  if (name == "gaussian_blur") throw ConfigError("gaussian_blur is the training operator and is excluded from the suite");
  throw ConfigError("unknown corruption '" + std::string(name) + "'");
}

CorruptionFamily family_of(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kGaussianNoise:
    case CorruptionKind::kShotNoise:
    case CorruptionKind::kImpulseNoise: return CorruptionFamily::kNoise;
    case CorruptionKind::kDefocusBlur:
    case CorruptionKind::kGlassBlur:
    case CorruptionKind::kMotionBlur:
    case CorruptionKind::kZoomBlur: return CorruptionFamily::kBlur;
    case CorruptionKind::kSnow:
    case CorruptionKind::kFog: return CorruptionFamily::kWeather;
    default: return CorruptionFamily::kDigital;
  }
}

// ---------------------------------------------------------------------------

SeverityTable SeverityTable::defaults() {
  using K = CorruptionKind;
  SeverityTable t;
  auto row = [&](K k, std::array<std::vector<double>, 5> v) { t.rows_[k] = std::move(v); };
  row(K::kGaussianNoise, {{{0.04}, {0.06}, {0.08}, {0.09}, {0.10}}});
  row(K::kShotNoise, {{{500}, {250}, {100}, {75}, {50}}});
  row(K::kImpulseNoise, {{{0.01}, {0.02}, {0.03}, {0.05}, {0.07}}});
  row(K::kDefocusBlur, {{{1.0}, {1.5}, {2.0}, {2.5}, {3.0}}});
  row(K::kGlassBlur, {{{1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 3}}});
  row(K::kMotionBlur, {{{1}, {2}, {3}, {4}, {5}}});
  row(K::kZoomBlur, {{{1.06}, {1.11}, {1.16}, {1.21}, {1.26}}});
  row(K::kSnow, {{{0.10, 0.20, 0.60, 1, 0.05},
                  {0.12, 0.22, 0.55, 1, 0.10},
                  {0.15, 0.25, 0.50, 2, 0.15},
                  {0.20, 0.28, 0.45, 2, 0.20},
                  {0.25, 0.30, 0.40, 3, 0.25}}});
  row(K::kFog, {{{0.2, 3.0}, {0.5, 3.0}, {0.75, 2.5}, {1.0, 2.0}, {1.5, 1.75}}});
  row(K::kBrightness, {{{0.05}, {0.10}, {0.15}, {0.20}, {0.30}}});
  row(K::kContrast, {{{0.75}, {0.5}, {0.4}, {0.3}, {0.15}}});
  row(K::kElasticTransform, {{{0.6, 2.0}, {0.9, 2.0}, {1.2, 2.0}, {1.5, 2.0}, {1.8, 2.0}}});
  row(K::kPixelate, {{{0.9}, {0.8}, {0.7}, {0.6}, {0.5}}});
  row(K::kJpegApprox, {{{80}, {65}, {58}, {50}, {40}}});
  return t;
}

const std::vector<ParamInfo>& SeverityTable::param_info(CorruptionKind kind) {
  static const std::array<std::vector<ParamInfo>, 14> info = {{
      {{"std", +1}},
      {{"photons", -1}},
      {{"fraction", +1}},
      {{"radius", +1}},
      {{"delta", +1}, {"iterations", +1}},
      {{"half_length", +1}},
      {{"max_zoom", +1}},
      {{"mean", +1}, {"spread", +1}, {"threshold", -1}, {"half_length", +1}, {"lift", +1}},
      {{"amount", +1}, {"decay", -1}},
      {{"shift", +1}},
      {{"factor", -1}},
      {{"alpha", +1}, {"smoothing", -1}},
      {{"factor", -1}},
      {{"quality", -1}},
  }};
  return info.at(kind_index(kind));
}

const std::vector<double>& SeverityTable::params(CorruptionKind kind, int severity) const {
  check_severity(severity);
  const auto it = rows_.find(kind);
  if (it == rows_.end()) throw ConfigError("no severity row for " + std::string(to_string(kind)));
  return it->second[severity - 1];
}

void SeverityTable::set(CorruptionKind kind, int severity, std::vector<double> params) {
  check_severity(severity);
  if (params.size() != param_info(kind).size())
    throw ConfigError(std::string(to_string(kind)) + " takes " + std::to_string(param_info(kind).size()) +
                      " parameters");
  rows_[kind][severity - 1] = std::move(params);
}

void SeverityTable::validate() const {
  for (const auto& [kind, rows] : rows_) {
    const auto& info = param_info(kind);
    for (int s = 1; s < 5; ++s) {
      const auto& a = rows[s - 1];
      const auto& b = rows[s];
      bool moved = false;
      for (std::size_t i = 0; i < info.size(); ++i) {
        const double step = (b.at(i) - a.at(i)) * info[i].direction;
        if (step < 0)
          throw ConfigError(std::string(to_string(kind)) + ": " + info[i].name + " weakens from severity " +
                            std::to_string(s) + " to " + std::to_string(s + 1));
        moved = moved || step > 0;
      }
      if (!moved)
        throw ConfigError(std::string(to_string(kind)) + ": severities " + std::to_string(s) + " and " +
                          std::to_string(s + 1) + " are identical");
    }
  }
}

std::string SeverityTable::describe(CorruptionKind kind, int severity) const {
  const auto& p = params(kind, severity);
  const auto& info = param_info(kind);
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ',';
    out += info[i].name + "=" + text::format_double(p[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

Kernel2d disk_kernel(double radius) {
  if (!(radius >= 0)) throw std::invalid_argument("disk radius must be non-negative");
  const int r = static_cast<int>(std::ceil(radius));
  Kernel2d k;
  k.size = 2 * r + 1;
  k.weights.assign(static_cast<std::size_t>(k.size) * k.size, 0.0);
  double total = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x)
      if (x * x + y * y <= radius * radius + 1e-12) {
        k.weights[static_cast<std::size_t>(y + r) * k.size + x + r] = 1.0;
        total += 1.0;
      }
  for (auto& w : k.weights) w /= total;
  return k;
}

Kernel2d line_kernel(double half_length, double angle) {
  if (!(half_length >= 0)) throw std::invalid_argument("line length must be non-negative");
  const int r = static_cast<int>(std::ceil(half_length));
  Kernel2d k;
  k.size = 2 * r + 1;
  k.weights.assign(static_cast<std::size_t>(k.size) * k.size, 0.0);
  const int steps = std::max(1, static_cast<int>(std::ceil(half_length * 10)));
  const double c = std::cos(angle), s = std::sin(angle);
  for (int i = -steps; i <= steps; ++i) {
    const double t = half_length * i / steps;
    const double fy = t * s + r, fx = t * c + r;
    const int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
    const double wy = fy - y0, wx = fx - x0;
    auto splat = [&](int y, int x, double wgt) {
      if (wgt == 0.0 || y < 0 || x < 0 || y >= k.size || x >= k.size) return;
      k.weights[static_cast<std::size_t>(y) * k.size + x] += wgt;
    };
    splat(y0, x0, (1 - wy) * (1 - wx));
    splat(y0, x0 + 1, (1 - wy) * wx);
    splat(y0 + 1, x0, wy * (1 - wx));
    splat(y0 + 1, x0 + 1, wy * wx);
  }
  double total = 0.0;
  for (double w : k.weights) total += w;
  for (auto& w : k.weights) w /= total;
  return k;
}

std::vector<double> plasma_fractal(int size, double decay, Rng& rng) {
  if (size < 2 || (size & (size - 1)) != 0) throw std::invalid_argument("plasma size must be a power of two >= 2");
  if (!(decay > 0)) throw std::invalid_argument("plasma decay must be positive");
  std::vector<double> m(static_cast<std::size_t>(size) * size, 0.0);
  const int mask = size - 1;
  auto at = [&](int y, int x) -> double& { return m[static_cast<std::size_t>(y & mask) * size + (x & mask)]; };
  double wibble = 100.0;
  for (int step = size; step >= 2; step /= 2) {
    const int half = step / 2;
    for (int y = 0; y < size; y += step)
      for (int x = 0; x < size; x += step)
        at(y + half, x + half) = (at(y, x) + at(y, x + step) + at(y + step, x) + at(y + step, x + step)) / 4 +
                                 wibble * (2 * uniform01(rng) - 1);
    for (int y = 0; y < size; y += step)
      for (int x = 0; x < size; x += step) {
        at(y, x + half) = (at(y, x) + at(y, x + step) + at(y - half, x + half) + at(y + half, x + half)) / 4 +
                          wibble * (2 * uniform01(rng) - 1);
        at(y + half, x) = (at(y, x) + at(y + step, x) + at(y + half, x - half) + at(y + half, x + half)) / 4 +
                          wibble * (2 * uniform01(rng) - 1);
      }
    wibble /= decay;
  }
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  const double min = *lo, range = *hi - *lo;
  for (auto& v : m) v = range > 0 ? (v - min) / range : 0.0;
  return m;
}

Image apply_corruption(const Image& image, const CorruptionSpec& spec, std::uint64_t image_index,
                       const SeverityTable& table) {
  check_severity(spec.severity);
  if (image.empty()) throw ConfigError("cannot corrupt an empty image");
  const auto& p = table.params(spec.kind, spec.severity);
  Rng rng = make_rng({spec.seed, static_cast<std::uint64_t>(Stream::kCorrupt), kind_index(spec.kind) + 1,
                      static_cast<std::uint64_t>(spec.severity), image_index});
  using K = CorruptionKind;
  switch (spec.kind) {
    case K::kGaussianNoise: return gaussian_noise(image, p[0], rng);
    case K::kShotNoise: return shot_noise(image, p[0], rng);
    case K::kImpulseNoise: return impulse_noise(image, p[0], rng);
    case K::kDefocusBlur: return convolve_image(image, disk_kernel(p[0]));
    case K::kGlassBlur: return glass_blur(image, static_cast<int>(p[0]), static_cast<int>(p[1]), rng);
    case K::kMotionBlur:
      return convolve_image(image, line_kernel(p[0], std::numbers::pi * uniform01(rng)));
    case K::kZoomBlur: return zoom_blur(image, p[0]);
    case K::kSnow: return snow(image, p, rng);
    case K::kFog: return fog(image, p[0], p[1], rng);
    case K::kBrightness: return map_pixels(image, [&](double x) { return x + p[0]; });
    case K::kContrast: return contrast(image, p[0]);
    case K::kElasticTransform: return elastic(image, p[0], p[1], rng);
    case K::kPixelate: return pixelate(image, p[0]);
    case K::kJpegApprox: return jpeg_approx(image, p[0]);
  }
  throw ConfigError("unhandled corruption kind");
}

// ---------------------------------------------------------------------------

std::filesystem::path suite_set_path(const std::filesystem::path& root, CorruptionKind kind, int severity) {
  return root / std::string(to_string(kind)) / std::to_string(severity) / "data.bin";
}

SuiteManifest generate_corrupted_dataset(const Dataset& dataset, const std::vector<CorruptionKind>& kinds,
                                         const std::vector<int>& severities, std::uint64_t seed,
                                         const std::filesystem::path& root, const GenerateOptions& options) {
  dataset.validate();
  if (kinds.empty() || severities.empty()) throw ConfigError("nothing to generate");
  for (int s : severities) check_severity(s);
  if (std::filesystem::exists(root / "manifest.txt") && !options.overwrite)
    throw IoError(root.string() + " already holds a suite; pass the overwrite flag to replace it");

  SuiteManifest m;
  m.seed = seed;
  m.records = dataset.size();
  m.source_checksum = crc32(encode_records(dataset));
  m.label_checksum = crc32(dataset.labels);
  m.kinds = kinds;
  m.severities = severities;

  for (CorruptionKind kind : kinds)
    for (int severity : severities) {
      Dataset out;
      out.meta = dataset.meta;
      out.meta.split = std::string(to_string(kind)) + "/" + std::to_string(severity);
      out.labels = dataset.labels;
      out.images.resize(dataset.size());
      const CorruptionSpec spec{kind, severity, seed};
      parallel_for(dataset.size(), options.threads,
                   [&](std::size_t i) { out.images[i] = apply_corruption(dataset.images[i], spec, i, options.table); });
      const auto path = suite_set_path(root, kind, severity);
      std::filesystem::create_directories(path.parent_path());
      m.set_checksums[{kind, severity}] = save_records(path, out);
      m.parameters[{kind, severity}] = options.table.describe(kind, severity);
    }
  m.suite_checksum = suite_checksum(m);
  write_manifest(root, m);
  return m;
}

void write_manifest(const std::filesystem::path& root, const SuiteManifest& m) {
  std::filesystem::create_directories(root);
  const auto path = root / "manifest.txt";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# corruption suite\n"
      << "seed = " << m.seed << "\n"
      << "records = " << m.records << "\n"
      << "source_checksum = " << hex32(m.source_checksum) << "\n"
      << "label_checksum = " << hex32(m.label_checksum) << "\n";
  out << "kinds = ";
  for (std::size_t i = 0; i < m.kinds.size(); ++i) out << (i ? "," : "") << to_string(m.kinds[i]);
  out << "\nseverities = ";
  for (std::size_t i = 0; i < m.severities.size(); ++i) out << (i ? "," : "") << m.severities[i];
  out << "\n";
  for (const auto& [key, crc] : m.set_checksums) {
    const auto it = m.parameters.find(key);
    out << "set " << to_string(key.first) << " " << key.second << " = " << hex32(crc);
    if (it != m.parameters.end()) out << " " << it->second;
    out << "\n";
  }
  out << "suite_checksum = " << hex32(m.suite_checksum) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

SuiteManifest read_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.txt";
  std::ifstream in(path);
  if (!in) throw IoError("no suite manifest at " + path.string());
  SuiteManifest m;
  const std::string where = path.string();
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw IoError(where + ": malformed line '" + line + "'");
    const std::string key(text::trim(t.substr(0, eq)));
    const std::string value(text::trim(t.substr(eq + 1)));
    try {
      if (key == "seed") {
        m.seed = std::stoull(value);
      } else if (key == "records") {
        m.records = std::stoull(value);
      } else if (key == "source_checksum") {
        m.source_checksum = parse_hex32(value, where);
      } else if (key == "label_checksum") {
        m.label_checksum = parse_hex32(value, where);
      } else if (key == "kinds") {
        for (const auto& k : text::split(value, ',')) m.kinds.push_back(parse_corruption_kind(k));
      } else if (key == "severities") {
        for (const auto& s : text::split(value, ',')) m.severities.push_back(std::stoi(s));
      } else if (key == "suite_checksum") {
        m.suite_checksum = parse_hex32(value, where);
      } else if (key.starts_with("set ")) {
        std::istringstream ks(key.substr(4));
        std::string kind;
        int severity = 0;
        ks >> kind >> severity;
        const auto sp = value.find(' ');
        const auto k = std::make_pair(parse_corruption_kind(kind), severity);
        m.set_checksums[k] = parse_hex32(value.substr(0, sp), where);
        if (sp != std::string::npos) m.parameters[k] = std::string(text::trim(std::string_view(value).substr(sp)));
      } else {
        throw IoError(where + ": unknown key '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      throw IoError(where + ": bad value for '" + key + "': " + e.what());
    }
  }
  if (suite_checksum(m) != m.suite_checksum) throw IoError(where + ": suite checksum mismatch");
  return m;
}

// ---------------------------------------------------------------------------

CalibrationReport measure_severity_psnr(const std::vector<CorruptionKind>& kinds, std::span<const Image> samples,
                                        const SeverityTable& table, std::uint64_t seed, unsigned threads) {
  if (samples.empty()) throw ConfigError("calibration needs sample images");
  CalibrationReport report;
  report.kinds = kinds;
  std::vector<double> per_image(samples.size());
  for (CorruptionKind kind : kinds) {
    auto& row = report.mean_psnr[kind];
    for (int s = 1; s <= 5; ++s) {
      const CorruptionSpec spec{kind, s, seed};
      parallel_for(samples.size(), threads, [&](std::size_t i) {
        per_image[i] = psnr(samples[i], apply_corruption(samples[i], spec, i, table));
      });
      double sum = 0.0;
      for (double v : per_image) sum += v;
      row[s - 1] = sum / static_cast<double>(samples.size());
    }
  }
  return report;
}

void check_calibration(const CalibrationReport& report) {
  for (CorruptionKind kind : report.kinds) {
    const auto& row = report.mean_psnr.at(kind);
    for (int s = 1; s < 5; ++s)
      if (!(row[s] < row[s - 1])) {
        std::ostringstream msg;
        msg << "severity calibration failed for " << to_string(kind) << ": mean PSNR " << row[s - 1]
            << " dB at severity " << s << ", " << row[s] << " dB at severity " << s + 1;
        throw CalibrationError(msg.str());
      }
  }
}

CalibrationReport severity_calibration_report(const std::vector<CorruptionKind>& kinds,
                                              std::span<const Image> samples, const SeverityTable& table,
                                              std::uint64_t seed, unsigned threads) {
  if (samples.size() < 100)
    throw ConfigError("calibration needs at least 100 images, got " + std::to_string(samples.size()));
  auto report = measure_severity_psnr(kinds, samples, table, seed, threads);
  check_calibration(report);
  return report;
}

}  // namespace vac
