#pragma once

// Minimal reverse-mode differentiation for a small convolutional classifier.
//
// A Tape records each op's output value together with a closure that pushes
// the output gradient back to its inputs. Leaf parameters accumulate into
// Parameter::grad when Tape::backward runs. Everything is double precision.
//
// Accumulation order is fixed: convolutions run image by image as
// im2col + one GEMM, so a given image's activations do not depend on batch
// composition, and repeated runs of the same build are bit-identical.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "vac/imaging.hpp"
#include "vac/random.hpp"

namespace vac::nn {

/// Cache-line aligned storage. Vectorized kernels peel a different number of
/// leading elements depending on the buffer address, which changes the
/// summation order; a fixed alignment keeps results independent of where the
/// allocator happens to place a tensor.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

struct Tensor {
  std::vector<int> shape;
  Buffer values;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);

  std::size_t numel() const noexcept { return values.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool has_grad = false;

  void zero_grad();
};

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Tape {
 public:
  /// A non-recording tape computes values only; backward() is an error.
  explicit Tape(bool recording = true) : recording_(recording) {}

  Var constant(Tensor value);
  Var parameter(Parameter& p);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every parameter leaf.
  /// Throws std::logic_error if nothing was recorded or loss is not scalar.
  void backward(Var loss);

  // Op plumbing.
  Var push(Tensor value, std::function<void(Tape&, std::size_t self)> backprop);
  Tensor& grad(std::size_t id);
  const Tensor& grad_or_empty(std::size_t id) const { return nodes_[id].grad; }
  /// False for constants: nothing upstream consumes their gradient.
  bool needs_grad(std::size_t id) const { return nodes_.at(id).backprop || nodes_.at(id).param; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, std::size_t)> backprop;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  bool recording_;
  bool consumed_ = false;
};

// Ops. Shapes: images (B, C, H, W); matrices (B, F).

/// 2-D convolution, stride 1, zero padding `pad` = (k - 1) / 2 so the output
/// keeps the input size. weight (O, C, k, k), bias (O).
Var conv2d(Tape& tape, Var x, Var weight, Var bias, int pad);
Var relu(Tape& tape, Var x);
/// 2x2 max pooling, stride 2; ties go to the first element in row-major order.
Var maxpool2(Tape& tape, Var x);
Var flatten(Tape& tape, Var x);
/// y = x W^T + b with weight (out, in), bias (out).
Var linear(Tape& tape, Var x, Var weight, Var bias);
Var scale(Tape& tape, Var x, double alpha);
/// Mean over the batch of -log softmax(logits)[label], max-subtracted.
/// Throws std::out_of_range for labels outside [0, classes).
Var cross_entropy(Tape& tape, Var logits, std::span<const int> labels);

/// Stacks images into a (B, C, H, W) tensor.
Tensor images_to_tensor(std::span<const Image> images);

// ---------------------------------------------------------------------------

struct Architecture {
  int in_channels = 3;
  int height = 32;
  int width = 32;
  int conv1 = 32;
  int conv2 = 64;
  int hidden = 128;
  int classes = 10;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// conv3x3(C->conv1) relu maxpool2 conv3x3(conv1->conv2) relu maxpool2
/// flatten dense(->hidden) relu dense(->classes).
class SmallConvNet {
 public:
  /// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), seeded
  /// per parameter.
  SmallConvNet(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const noexcept { return arch_; }
  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  Parameter& parameter(const std::string& name);
  std::size_t parameter_count() const noexcept;

  /// Records the forward pass on `tape` and returns (B, classes) logits.
  /// Throws std::invalid_argument on shape mismatch, NumericalError on
  /// non-finite input or logits.
  Var forward(Tape& tape, const Tensor& batch);
  Tensor logits(const Tensor& batch) const;

  void zero_grad();

 private:
  void check_input(const Tensor& batch) const;
  Var run(Tape& tape, const Tensor& batch, const std::vector<Var>& params) const;

  Architecture arch_;
  std::vector<Parameter> params_;
};

/// Argmax per row, lowest index on ties.
std::vector<int> argmax_rows(const Tensor& logits);

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::vector<int> predict(std::span<const Image> images) const = 0;
};

class ModelClassifier final : public Classifier {
 public:
  explicit ModelClassifier(const SmallConvNet& model, int batch_size = 256) : model_(model), batch_(batch_size) {}
  std::vector<int> predict(std::span<const Image> images) const override;

 private:
  const SmallConvNet& model_;
  int batch_;
};

/// Fraction of images whose prediction differs from the label.
/// Throws std::invalid_argument for an empty set.
double top1_error(const Classifier& classifier, std::span<const Image> images, std::span<const std::uint8_t> labels);

// ---------------------------------------------------------------------------

struct SgdOptions {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// v <- mu v + g + lambda W;  W <- W - lr v;  gradients cleared.
class Sgd {
 public:
  Sgd(SmallConvNet& model, SgdOptions options);

  /// Throws std::logic_error if any parameter has no gradient.
  void step(double lr);
  const std::vector<Tensor>& velocities() const noexcept { return velocity_; }

 private:
  SmallConvNet& model_;
  SgdOptions options_;
  std::vector<Tensor> velocity_;
};

enum class LrScheduleKind { kConstant, kCosine, kStep };

struct LrSchedule {
  LrScheduleKind kind = LrScheduleKind::kCosine;
  double base = 0.05;
  int total_epochs = 1;
  std::vector<int> milestones;  // kStep
  double gamma = 0.1;           // kStep

  double at(int epoch) const;
};

// ---------------------------------------------------------------------------
// Checkpoints: "VACCKPT1", u32 version, u64 config digest, architecture,
// then per parameter: name, shape, raw little-endian doubles.

struct Checkpoint {
  Architecture arch;
  std::uint64_t config_digest = 0;
  std::vector<Parameter> params;
};

void save_checkpoint(const std::filesystem::path& path, const SmallConvNet& model, std::uint64_t config_digest);
Checkpoint read_checkpoint(const std::filesystem::path& path);
SmallConvNet load_model(const Checkpoint& checkpoint);

}  // namespace vac::nn
