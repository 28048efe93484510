#pragma once

// Blur curricula: schedule construction, epoch -> segment lookup and the
// replay sampler that picks each image's blur level.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vac/random.hpp"

namespace vac {

/// Fraction of the run spent in the blur deficit, kept rational so that
/// floor(N * fraction) is exact.
struct DeficitFraction {
  int numerator = 1;
  int denominator = 5;

  friend bool operator==(const DeficitFraction&, const DeficitFraction&) = default;
};

DeficitFraction parse_fraction(std::string_view text);
std::string to_string(const DeficitFraction& f);

struct CurriculumConfig {
  int total_epochs = 200;
  int sigma_max = 2;  // power of two >= 1
  DeficitFraction deficit{};

  /// Throws ConfigError.
  void validate() const;
  int deficit_epochs() const;
  /// log2(sigma_max).
  int levels() const;
};

struct Segment {
  int epochs = 0;
  double sigma = 0.0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class ScheduleKind { kVac, kLinear, kInverse, kSteep, kConstant, kContinuous };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

class Schedule {
 public:
  Schedule(std::vector<Segment> segments, ScheduleKind kind);

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const Segment& operator[](std::size_t i) const { return segments_.at(i); }
  std::size_t size() const noexcept { return segments_.size(); }
  ScheduleKind kind() const noexcept { return kind_; }
  int total_epochs() const noexcept { return cumulative_.back(); }
  /// Epochs in segments [0, i].
  int cumulative_epochs(std::size_t i) const { return cumulative_.at(i); }

  friend bool operator==(const Schedule& a, const Schedule& b) {
    return a.kind_ == b.kind_ && a.segments_ == b.segments_;
  }

 private:
  std::vector<Segment> segments_;
  ScheduleKind kind_;
  std::vector<int> cumulative_;
};

/// Replay probabilities over segments 0..i, p_j = n_j / sum_{m<=i} n_m.
/// The integer epoch counts are kept so sampling is exact.
struct ReplayDistribution {
  std::vector<int> epochs;
  std::vector<double> weights;
  int total = 0;

  std::size_t size() const noexcept { return epochs.size(); }
};

/// Progressive de-blurring schedule: floor(N * deficit) blur epochs split
/// over sigma_max, sigma_max/2, ..., 1 with budgets growing 2x per level,
/// followed by the remaining epochs at sigma 0.
///
/// Fractional budgets are rounded to nearest for every blur segment except
/// the last, which absorbs the remainder so the deficit total is exact.
Schedule define_curriculum(const CurriculumConfig& config);

/// Zero-based epoch -> segment index. Throws std::out_of_range.
std::size_t segment_at(const Schedule& schedule, int epoch);

ReplayDistribution replay_distribution(const Schedule& schedule, std::size_t segment_index);

/// Draws segment j with probability p_j and returns its sigma.
double sample_blur_level(const ReplayDistribution& dist, const Schedule& schedule, Rng& rng);

/// Line format: "<epochs> <sigma>" per segment, '#' comments. The kind is
/// carried in a "# kind: <name>" comment.
std::string format_schedule(const Schedule& schedule);
Schedule parse_schedule(std::string_view text);

// ---------------------------------------------------------------------------
// Blur policies

struct SigmaWeight {
  double sigma = 0.0;
  double probability = 0.0;
};

/// Per-epoch, per-image rule that picks a blur level.
class BlurPolicy {
 public:
  virtual ~BlurPolicy() = default;

  virtual double sample(int epoch, Rng& rng) const = 0;
  /// Theoretical distribution of sample(epoch, .), merged by sigma.
  virtual std::vector<SigmaWeight> distribution(int epoch) const = 0;
  virtual int total_epochs() const = 0;
  /// Index of the active schedule segment, for logging.
  virtual std::size_t segment_index(int epoch) const = 0;
};

/// Segment-wise schedule. With replay, images in segment i draw their sigma
/// from segments 0..i; without it every image uses sigma_i.
class ScheduledBlurPolicy final : public BlurPolicy {
 public:
  ScheduledBlurPolicy(Schedule schedule, bool replay);

  double sample(int epoch, Rng& rng) const override;
  std::vector<SigmaWeight> distribution(int epoch) const override;
  int total_epochs() const override { return schedule_.total_epochs(); }
  std::size_t segment_index(int epoch) const override { return segment_at(schedule_, epoch); }

  const Schedule& schedule() const noexcept { return schedule_; }
  bool replay() const noexcept { return replay_; }

 private:
  Schedule schedule_;
  bool replay_;
  std::vector<ReplayDistribution> per_segment_;
};

/// Blur each image with probability p at a fixed sigma, every epoch.
class ConstantBlurPolicy final : public BlurPolicy {
 public:
  ConstantBlurPolicy(int total_epochs, double probability, double sigma);

  double sample(int epoch, Rng& rng) const override;
  std::vector<SigmaWeight> distribution(int epoch) const override;
  int total_epochs() const override { return total_epochs_; }
  std::size_t segment_index(int) const override { return 0; }

 private:
  int total_epochs_;
  double probability_;
  double sigma_;
};

/// Fixed sigma; the blurred fraction decays linearly from 1 at epoch 0 to 0
/// at the end of the deficit window.
class ContinuousBlurPolicy final : public BlurPolicy {
 public:
  ContinuousBlurPolicy(int total_epochs, int deficit_epochs, double sigma);

  double blurred_fraction(int epoch) const;
  double sample(int epoch, Rng& rng) const override;
  std::vector<SigmaWeight> distribution(int epoch) const override;
  int total_epochs() const override { return total_epochs_; }
  std::size_t segment_index(int epoch) const override { return epoch < deficit_epochs_ ? 0 : 1; }

 private:
  int total_epochs_;
  int deficit_epochs_;
  double sigma_;
};

// ---------------------------------------------------------------------------
// Ablation variants

enum class VariantKind {
  kVac,
  kLinear,
  kInverse,
  kContinuous,
  kSteep,
  kConstant,
  kVanilla,
};

std::string_view to_string(VariantKind kind);
VariantKind parse_variant_kind(std::string_view name);

struct VariantParams {
  int sigma_max = 2;
  DeficitFraction deficit{};
  // constant / continuous
  double blur_probability = 1.0;
  double blur_sigma = 2.0;
};

struct Curriculum {
  Schedule schedule;
  std::shared_ptr<const BlurPolicy> policy;
};

/// Builds a curriculum variant:
///   vac        define_curriculum, with replay
///   linear     deficit split into equal steps over sigma_max..1, with replay
///   inverse    vac epochs with the sigma order reversed, with replay
///   steep      (floor(N_def / 2), sigma_max) then clean, no replay
///   constant   probability p at blur_sigma every epoch
///   continuous blur_sigma, linearly decaying fraction over the deficit
///   vanilla    sigma 0 throughout
Curriculum make_variant(VariantKind kind, int total_epochs, const VariantParams& params);

}  // namespace vac
