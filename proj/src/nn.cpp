#include "vac/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "vac/errors.hpp"

namespace vac::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + ")";
}

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)), values(shape_numel(shape), fill) {}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void Parameter::zero_grad() {
  grad = Tensor(value.shape, 0.0);
  has_grad = false;
}

// ---------------------------------------------------------------------------

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, recording_ ? &p : nullptr});
  return Var{nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::function<void(Tape&, std::size_t)> backprop) {
  nodes_.push_back(Node{std::move(value), {}, recording_ ? std::move(backprop) : nullptr, nullptr});
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.values.empty()) n.grad = Tensor(n.value.shape, 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!recording_) throw std::logic_error("backward on a tape that did not record the forward pass");
  if (nodes_.empty() || loss.id >= nodes_.size()) throw std::logic_error("backward without a recorded forward pass");
  if (consumed_) throw std::logic_error("backward already ran on this tape");
  if (nodes_[loss.id].value.numel() != 1) throw std::logic_error("backward needs a scalar loss");
  consumed_ = true;
  grad(loss.id).values[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backprop && !n.grad.values.empty()) n.backprop(*this, i);
  }
  for (Node& n : nodes_) {
    if (!n.param) continue;
    Parameter& p = *n.param;
    if (p.grad.shape != p.value.shape) p.grad = Tensor(p.value.shape, 0.0);
    if (!n.grad.values.empty())
      for (std::size_t j = 0; j < p.grad.values.size(); ++j) p.grad.values[j] += n.grad.values[j];
    p.has_grad = true;
  }
}

// ---------------------------------------------------------------------------

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Column matrix (C*k*k, H*W) for one image, zero padded.
void im2col(const double* img, int c, int h, int w, int k, int pad, double* cols) {
  const int hw = h * w;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + static_cast<std::size_t>((ch * k + ky) * k + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - pad;
            row[y * w + x] =
                (sy >= 0 && sy < h && sx >= 0 && sx < w) ? img[(static_cast<std::size_t>(ch) * h + sy) * w + sx] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, int c, int h, int w, int k, int pad, double* img) {
  const int hw = h * w;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + static_cast<std::size_t>((ch * k + ky) * k + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - pad;
            if (sx < 0 || sx >= w) continue;
            img[(static_cast<std::size_t>(ch) * h + sy) * w + sx] += row[y * w + x];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Tape& tape, Var x, Var weight, Var bias, int pad) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  const Tensor& bv = tape.value(bias);
  require(xv.shape.size() == 4, "conv2d: input must be (B, C, H, W), got " + shape_string(xv.shape));
  require(wv.shape.size() == 4 && wv.dim(2) == wv.dim(3), "conv2d: weight must be (O, C, k, k)");
  const int batch = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const int o = wv.dim(0), k = wv.dim(2);
  require(wv.dim(1) == c, "conv2d: channel mismatch " + shape_string(xv.shape) + " vs " + shape_string(wv.shape));
  require(bv.shape == std::vector<int>{o}, "conv2d: bias must be (O)");
  require(2 * pad == k - 1, "conv2d: only 'same' padding is supported");

  const int ckk = c * k * k, hw = h * w;
  Tensor out({batch, o, h, w});
  RowMat cols(ckk, hw);
  ConstMapMat wm(wv.values.data(), o, ckk);
  for (int b = 0; b < batch; ++b) {
    im2col(xv.values.data() + static_cast<std::size_t>(b) * c * hw, c, h, w, k, pad, cols.data());
    MapMat ym(out.values.data() + static_cast<std::size_t>(b) * o * hw, o, hw);
    ym.noalias() = wm * cols;
    for (int i = 0; i < o; ++i) ym.row(i).array() += bv.values[i];
  }

  return tape.push(std::move(out), [x, weight, bias, pad](Tape& t, std::size_t self) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(weight);
    const int batch = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    const int o = wv.dim(0), k = wv.dim(2), ckk = c * k * k, hw = h * w;
    const Tensor& gy = t.grad_or_empty(self);
    // The network input is a constant; skip its gradient.
    const bool want_gx = t.needs_grad(x.id);
    Tensor* gx = want_gx ? &t.grad(x.id) : nullptr;
    Tensor& gw = t.grad(weight.id);
    Tensor& gb = t.grad(bias.id);
    RowMat cols(ckk, hw), dcols(ckk, hw);
    ConstMapMat wm(wv.values.data(), o, ckk);
    MapMat gwm(gw.values.data(), o, ckk);
    for (int b = 0; b < batch; ++b) {
      ConstMapMat gym(gy.values.data() + static_cast<std::size_t>(b) * o * hw, o, hw);
      im2col(xv.values.data() + static_cast<std::size_t>(b) * c * hw, c, h, w, k, pad, cols.data());
      gwm.noalias() += gym * cols.transpose();
      if (want_gx) {
        dcols.noalias() = wm.transpose() * gym;
        col2im_add(dcols.data(), c, h, w, k, pad, gx->values.data() + static_cast<std::size_t>(b) * c * hw);
      }
      for (int i = 0; i < o; ++i) gb.values[i] += gym.row(i).sum();
    }
  });
}

Var relu(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  return tape.push(std::move(out), [x](Tape& t, std::size_t self) {
    const Tensor& xv = t.value(x);
    const Tensor& gy = t.grad_or_empty(self);
    Tensor& gx = t.grad(x.id);
    for (std::size_t i = 0; i < gy.values.size(); ++i)
      if (xv.values[i] > 0.0) gx.values[i] += gy.values[i];
  });
}

Var maxpool2(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  require(xv.shape.size() == 4, "maxpool2: input must be (B, C, H, W)");
  const int batch = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "maxpool2: spatial dimensions must be even, got " + shape_string(xv.shape));
  const int oh = h / 2, ow = w / 2;
  Tensor out({batch, c, oh, ow});
  std::vector<std::uint32_t> argmax(out.numel());
  std::size_t oi = 0;
  for (int p = 0; p < batch * c; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx, ++oi) {
        std::size_t best = base + static_cast<std::size_t>(2 * y) * w + 2 * xx;
        for (std::size_t cand : {best + 1, best + w, best + w + 1})
          if (xv.values[cand] > xv.values[best]) best = cand;
        out.values[oi] = xv.values[best];
        argmax[oi] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return tape.push(std::move(out), [x, argmax = std::move(argmax)](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad_or_empty(self);
    Tensor& gx = t.grad(x.id);
    for (std::size_t i = 0; i < gy.values.size(); ++i) gx.values[argmax[i]] += gy.values[i];
  });
}

Var flatten(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  const int batch = out.dim(0);
  out.shape = {batch, static_cast<int>(out.numel() / static_cast<std::size_t>(batch))};
  return tape.push(std::move(out), [x](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad_or_empty(self);
    Tensor& gx = t.grad(x.id);
    for (std::size_t i = 0; i < gy.values.size(); ++i) gx.values[i] += gy.values[i];
  });
}

Var linear(Tape& tape, Var x, Var weight, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  const Tensor& bv = tape.value(bias);
  require(xv.shape.size() == 2 && wv.shape.size() == 2, "linear: expects (B, F) input and (out, in) weight");
  const int batch = xv.dim(0), in = xv.dim(1), outf = wv.dim(0);
  require(wv.dim(1) == in, "linear: input features " + std::to_string(in) + " vs weight " + shape_string(wv.shape));
  require(bv.shape == std::vector<int>{outf}, "linear: bias must be (out)");
  Tensor out({batch, outf});
  MapMat ym(out.values.data(), batch, outf);
  ym.noalias() = ConstMapMat(xv.values.data(), batch, in) * ConstMapMat(wv.values.data(), outf, in).transpose();
  for (int r = 0; r < batch; ++r)
    for (int j = 0; j < outf; ++j) ym(r, j) += bv.values[j];
  return tape.push(std::move(out), [x, weight, bias](Tape& t, std::size_t self) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(weight);
    const int batch = xv.dim(0), in = xv.dim(1), outf = wv.dim(0);
    ConstMapMat gy(t.grad_or_empty(self).values.data(), batch, outf);
    MapMat(t.grad(x.id).values.data(), batch, in).noalias() += gy * ConstMapMat(wv.values.data(), outf, in);
    MapMat(t.grad(weight.id).values.data(), outf, in).noalias() +=
        gy.transpose() * ConstMapMat(xv.values.data(), batch, in);
    Tensor& gb = t.grad(bias.id);
    for (int j = 0; j < outf; ++j) gb.values[j] += gy.col(j).sum();
  });
}

Var scale(Tape& tape, Var x, double alpha) {
  Tensor out = tape.value(x);
  for (double& v : out.values) v *= alpha;
  return tape.push(std::move(out), [x, alpha](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad_or_empty(self);
    Tensor& gx = t.grad(x.id);
    for (std::size_t i = 0; i < gy.values.size(); ++i) gx.values[i] += alpha * gy.values[i];
  });
}

Var cross_entropy(Tape& tape, Var logits, std::span<const int> labels) {
  const Tensor& z = tape.value(logits);
  require(z.shape.size() == 2, "cross_entropy: logits must be (B, classes)");
  const int batch = z.dim(0), classes = z.dim(1);
  require(static_cast<int>(labels.size()) == batch, "cross_entropy: label count does not match batch");
  std::vector<double> probs(z.numel());
  double total = 0.0;
  for (int r = 0; r < batch; ++r) {
    const int y = labels[r];
    if (y < 0 || y >= classes)
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    const double* row = z.values.data() + static_cast<std::size_t>(r) * classes;
    const double m = *std::max_element(row, row + classes);
    double s = 0.0;
    for (int j = 0; j < classes; ++j) s += std::exp(row[j] - m);
    const double lse = m + std::log(s);
    total += lse - row[y];
    for (int j = 0; j < classes; ++j) probs[static_cast<std::size_t>(r) * classes + j] = std::exp(row[j] - lse);
  }
  Tensor loss({1}, total / batch);
  if (!loss.all_finite()) throw NumericalError("cross_entropy: non-finite loss");
  std::vector<int> ys(labels.begin(), labels.end());
  return tape.push(std::move(loss), [logits, ys = std::move(ys), probs = std::move(probs), classes](Tape& t, std::size_t self) {
    const double g = t.grad_or_empty(self).values[0];
    Tensor& gz = t.grad(logits.id);
    const int batch = static_cast<int>(ys.size());
    const double coef = g / batch;
    for (int r = 0; r < batch; ++r) {
      for (int j = 0; j < classes; ++j) {
        const std::size_t i = static_cast<std::size_t>(r) * classes + j;
        gz.values[i] += coef * (probs[i] - (j == ys[r] ? 1.0 : 0.0));
      }
    }
  });
}

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("empty image batch");
  const Image& first = images.front();
  Tensor t({static_cast<int>(images.size()), first.channels(), first.height(), first.width()});
  std::size_t off = 0;
  for (const Image& im : images) {
    if (!im.same_shape(first)) throw std::invalid_argument("images in a batch must share a shape");
    for (float v : im.data()) t.values[off++] = v;
  }
  return t;
}

// ---------------------------------------------------------------------------

SmallConvNet::SmallConvNet(const Architecture& arch, std::uint64_t seed) : arch_(arch) {
  if (arch.height % 4 != 0 || arch.width % 4 != 0) throw std::invalid_argument("input size must be divisible by 4");
  const int flat = arch.conv2 * (arch.height / 4) * (arch.width / 4);
  struct Spec {
    const char* name;
    std::vector<int> shape;
    int fan_in;
  };
  const std::vector<Spec> specs = {
      {"conv1.weight", {arch.conv1, arch.in_channels, 3, 3}, arch.in_channels * 9},
      {"conv1.bias", {arch.conv1}, arch.in_channels * 9},
      {"conv2.weight", {arch.conv2, arch.conv1, 3, 3}, arch.conv1 * 9},
      {"conv2.bias", {arch.conv2}, arch.conv1 * 9},
      {"fc1.weight", {arch.hidden, flat}, flat},
      {"fc1.bias", {arch.hidden}, flat},
      {"fc2.weight", {arch.classes, arch.hidden}, arch.hidden},
      {"fc2.bias", {arch.classes}, arch.hidden},
  };
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Parameter p;
    p.name = specs[i].name;
    p.value = Tensor(specs[i].shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(specs[i].fan_in));
    Rng rng = make_rng({seed, static_cast<std::uint64_t>(Stream::kInit), i});
    for (double& v : p.value.values) v = bound * (2.0 * uniform01(rng) - 1.0);
    p.zero_grad();
    params_.push_back(std::move(p));
  }
}

Parameter& SmallConvNet::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter named " + name);
}

std::size_t SmallConvNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void SmallConvNet::check_input(const Tensor& batch) const {
  if (batch.shape.size() != 4 || batch.dim(1) != arch_.in_channels || batch.dim(2) != arch_.height ||
      batch.dim(3) != arch_.width) {
    throw std::invalid_argument("SmallConvNet: expected (B, " + std::to_string(arch_.in_channels) + ", " +
                                std::to_string(arch_.height) + ", " + std::to_string(arch_.width) + ") input, got " +
                                shape_string(batch.shape));
  }
  // ReLU would silently map NaN to 0.
  if (!batch.all_finite()) throw NumericalError("SmallConvNet: non-finite input");
}

Var SmallConvNet::run(Tape& tape, const Tensor& batch, const std::vector<Var>& p) const {
  Var h = tape.constant(batch);
  h = maxpool2(tape, relu(tape, conv2d(tape, h, p[0], p[1], 1)));
  h = maxpool2(tape, relu(tape, conv2d(tape, h, p[2], p[3], 1)));
  h = relu(tape, linear(tape, flatten(tape, h), p[4], p[5]));
  h = linear(tape, h, p[6], p[7]);
  if (!tape.value(h).all_finite()) throw NumericalError("SmallConvNet: non-finite logits");
  return h;
}

Var SmallConvNet::forward(Tape& tape, const Tensor& batch) {
  check_input(batch);
  std::vector<Var> p;
  for (auto& param : params_) p.push_back(tape.parameter(param));
  return run(tape, batch, p);
}

Tensor SmallConvNet::logits(const Tensor& batch) const {
  check_input(batch);
  Tape tape(false);
  std::vector<Var> p;
  for (const auto& param : params_) p.push_back(tape.constant(param.value));
  return tape.value(run(tape, batch, p));
}

void SmallConvNet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const int rows = logits.dim(0), cols = logits.dim(1);
  std::vector<int> out(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const double* row = logits.values.data() + static_cast<std::size_t>(r) * cols;
    out[r] = static_cast<int>(std::max_element(row, row + cols) - row);  // first max wins
  }
  return out;
}

std::vector<int> ModelClassifier::predict(std::span<const Image> images) const {
  std::vector<int> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); i += static_cast<std::size_t>(batch_)) {
    const auto chunk = images.subspan(i, std::min(images.size() - i, static_cast<std::size_t>(batch_)));
    const auto pred = argmax_rows(model_.logits(images_to_tensor(chunk)));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

double top1_error(const Classifier& classifier, std::span<const Image> images, std::span<const std::uint8_t> labels) {
  if (images.empty()) throw std::invalid_argument("top1_error: empty dataset");
  if (images.size() != labels.size()) throw std::invalid_argument("top1_error: image/label count mismatch");
  const auto pred = classifier.predict(images);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += pred[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------

Sgd::Sgd(SmallConvNet& model, SgdOptions options) : model_(model), options_(options) {
  for (const auto& p : model.parameters()) velocity_.emplace_back(p.value.shape, 0.0);
}

void Sgd::step(double lr) {
  auto& params = model_.parameters();
  for (const auto& p : params)
    if (!p.has_grad) throw std::logic_error("sgd step without a gradient for " + p.name);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value.values;
    const auto& g = params[i].grad.values;
    auto& v = velocity_[i].values;
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = options_.momentum * v[j] + g[j] + options_.weight_decay * w[j];
      w[j] -= lr * v[j];
    }
    params[i].zero_grad();
  }
}

double LrSchedule::at(int epoch) const {
  switch (kind) {
    case LrScheduleKind::kConstant: return base;
    case LrScheduleKind::kCosine:
      return 0.5 * base * (1.0 + std::cos(std::numbers::pi * epoch / std::max(1, total_epochs)));
    case LrScheduleKind::kStep: {
      double lr = base;
      for (int m : milestones)
        if (epoch >= m) lr *= gamma;
      return lr;
    }
  }
  return base;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'V', 'A', 'C', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SmallConvNet& model, std::uint64_t config_digest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, config_digest);
  const Architecture& a = model.architecture();
  for (int v : {a.in_channels, a.height, a.width, a.conv1, a.conv2, a.hidden, a.classes})
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (int d : p.value.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(p.value.values.data()),
              static_cast<std::streamsize>(p.value.values.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw IoError(path.string() + ": not a checkpoint");
  if (get<std::uint32_t>(in) != kVersion) throw IoError(path.string() + ": unsupported checkpoint version");
  Checkpoint ck;
  ck.config_digest = get<std::uint64_t>(in);
  int* fields[] = {&ck.arch.in_channels, &ck.arch.height, &ck.arch.width, &ck.arch.conv1,
                   &ck.arch.conv2, &ck.arch.hidden, &ck.arch.classes};
  for (int* f : fields) *f = static_cast<int>(get<std::uint32_t>(in));
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    p.name.resize(get<std::uint32_t>(in));
    in.read(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    std::vector<int> shape(get<std::uint32_t>(in));
    for (int& d : shape) d = static_cast<int>(get<std::uint32_t>(in));
    p.value = Tensor(shape);
    in.read(reinterpret_cast<char*>(p.value.values.data()),
            static_cast<std::streamsize>(p.value.values.size() * sizeof(double)));
    if (!in) throw IoError(path.string() + ": truncated parameter " + p.name);
    p.zero_grad();
    ck.params.push_back(std::move(p));
  }
  return ck;
}

SmallConvNet load_model(const Checkpoint& checkpoint) {
  SmallConvNet model(checkpoint.arch, 0);
  auto& params = model.parameters();
  if (params.size() != checkpoint.params.size()) throw IoError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& src = checkpoint.params[i];
    if (src.name != params[i].name || src.value.shape != params[i].value.shape)
      throw IoError("checkpoint parameter " + src.name + " does not match the architecture");
    params[i].value = src.value;
  }
  return model;
}

}  // namespace vac::nn
