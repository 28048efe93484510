#include "vac/curriculum.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cctype>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vac/errors.hpp"
#include "vac/text.hpp"

namespace vac {

namespace {

bool is_power_of_two(int v) { return v >= 1 && (v & (v - 1)) == 0; }

using text::format_double;
using text::trim;

std::vector<SigmaWeight> merge_by_sigma(const std::vector<SigmaWeight>& in) {
  std::map<double, double, std::greater<>> acc;
  for (const auto& w : in) acc[w.sigma] += w.probability;
  std::vector<SigmaWeight> out;
  for (const auto& [s, p] : acc) out.push_back({s, p});
  return out;
}

}  // namespace

DeficitFraction parse_fraction(std::string_view text) {
  text = trim(text);
  DeficitFraction f{};
  const auto slash = text.find('/');
  auto parse_int = [&](std::string_view s, int& out) {
    s = trim(s);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || p != s.data() + s.size())
      throw ConfigError("invalid deficit fraction '" + std::string(text) + "'");
  };
  if (slash == std::string_view::npos) {
    // Decimal form, e.g. 0.2 -> 1/5. Limited to 4 decimal places.
    double v = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size())
      throw ConfigError("invalid deficit fraction '" + std::string(text) + "'");
    const long scaled = std::lround(v * 10000.0);
    if (std::abs(v * 10000.0 - static_cast<double>(scaled)) > 1e-6)
      throw ConfigError("deficit fraction needs at most 4 decimals or n/d form");
    long g = std::gcd(scaled, 10000L);
    if (g == 0) g = 1;
    f.numerator = static_cast<int>(scaled / g);
    f.denominator = static_cast<int>(10000L / g);
  } else {
    parse_int(text.substr(0, slash), f.numerator);
    parse_int(text.substr(slash + 1), f.denominator);
  }
  if (f.denominator <= 0 || f.numerator <= 0 || f.numerator >= f.denominator)
    throw ConfigError("deficit fraction must lie strictly between 0 and 1");
  return f;
}

std::string to_string(const DeficitFraction& f) {
  return std::to_string(f.numerator) + "/" + std::to_string(f.denominator);
}

void CurriculumConfig::validate() const {
  if (!is_power_of_two(sigma_max))
    throw ConfigError("sigma_max must be a power of two >= 1, got " + std::to_string(sigma_max));
  if (deficit.denominator <= 0 || deficit.numerator <= 0 || deficit.numerator >= deficit.denominator)
    throw ConfigError("deficit fraction must lie strictly between 0 and 1");
  if (total_epochs < 5) throw ConfigError("total_epochs must be >= 5");
  if (deficit_epochs() < 1)
    throw ConfigError("deficit fraction " + to_string(deficit) + " of " + std::to_string(total_epochs) +
                      " epochs leaves no deficit epochs");
}

int CurriculumConfig::deficit_epochs() const {
  return static_cast<int>(static_cast<long long>(total_epochs) * deficit.numerator / deficit.denominator);
}

int CurriculumConfig::levels() const {
  int k = 0;
  while ((1 << (k + 1)) <= sigma_max) ++k;
  return k;
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kVac: return "vac";
    case ScheduleKind::kLinear: return "linear";
    case ScheduleKind::kInverse: return "inverse";
    case ScheduleKind::kSteep: return "steep";
    case ScheduleKind::kConstant: return "constant";
    case ScheduleKind::kContinuous: return "continuous";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  for (auto k : {ScheduleKind::kVac, ScheduleKind::kLinear, ScheduleKind::kInverse, ScheduleKind::kSteep,
                 ScheduleKind::kConstant, ScheduleKind::kContinuous}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

Schedule::Schedule(std::vector<Segment> segments, ScheduleKind kind)
    : segments_(std::move(segments)), kind_(kind) {
  if (segments_.empty()) throw ConfigError("schedule has no segments");
  int sum = 0;
  for (const auto& s : segments_) {
    if (s.epochs < 1) throw InfeasibleScheduleError("schedule segment with " + std::to_string(s.epochs) + " epochs");
    if (!(s.sigma >= 0.0) || !std::isfinite(s.sigma)) throw ConfigError("schedule segment with invalid sigma");
    sum += s.epochs;
    cumulative_.push_back(sum);
  }
}

Schedule define_curriculum(const CurriculumConfig& config) {
  config.validate();
  const int n_def = config.deficit_epochs();
  const int k_levels = config.levels();
  if (n_def < k_levels + 1) {
    throw InfeasibleScheduleError("deficit of " + std::to_string(n_def) + " epochs cannot cover " +
                                  std::to_string(k_levels + 1) + " blur levels");
  }

  // n_k* = n_def * 2^k / (2^(K+1) - 1). The denominator is odd, so the
  // fraction never lands on .5 and integer round-half-up is exact.
  const long long denom = (1LL << (k_levels + 1)) - 1;
  std::vector<Segment> segments;
  int assigned = 0;
  for (int k = 0; k <= k_levels; ++k) {
    const double sigma = static_cast<double>(config.sigma_max >> k);
    int epochs;
    if (k < k_levels) {
      const long long num = static_cast<long long>(n_def) << k;
      epochs = static_cast<int>((2 * num + denom) / (2 * denom));
    } else {
      epochs = n_def - assigned;
    }
    if (epochs < 1) {
      throw InfeasibleScheduleError("blur level sigma=" + format_double(sigma) + " would receive " +
                                    std::to_string(epochs) + " epochs (deficit " + std::to_string(n_def) + ")");
    }
    assigned += epochs;
    segments.push_back({epochs, sigma});
  }
  segments.push_back({config.total_epochs - n_def, 0.0});
  return Schedule(std::move(segments), ScheduleKind::kVac);
}

std::size_t segment_at(const Schedule& schedule, int epoch) {
  if (epoch < 0 || epoch >= schedule.total_epochs()) {
    throw std::out_of_range("epoch " + std::to_string(epoch) + " outside schedule of " +
                            std::to_string(schedule.total_epochs()) + " epochs");
  }
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (epoch < schedule.cumulative_epochs(i)) return i;
  }
  return schedule.size() - 1;  // unreachable
}

ReplayDistribution replay_distribution(const Schedule& schedule, std::size_t segment_index) {
  if (segment_index >= schedule.size()) {
    throw std::out_of_range("segment " + std::to_string(segment_index) + " outside schedule of " +
                            std::to_string(schedule.size()) + " segments");
  }
  ReplayDistribution dist;
  for (std::size_t j = 0; j <= segment_index; ++j) dist.epochs.push_back(schedule[j].epochs);
  dist.total = schedule.cumulative_epochs(segment_index);
  for (int n : dist.epochs) dist.weights.push_back(static_cast<double>(n) / dist.total);
  return dist;
}

double sample_blur_level(const ReplayDistribution& dist, const Schedule& schedule, Rng& rng) {
  if (dist.size() == 1) return schedule[0].sigma;
  // Integer draw against the epoch counts keeps p_j = n_j / total exact.
  auto r = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(dist.total)));
  for (std::size_t j = 0; j < dist.size(); ++j) {
    if (r < dist.epochs[j]) return schedule[j].sigma;
    r -= dist.epochs[j];
  }
  return schedule[dist.size() - 1].sigma;
}

std::string format_schedule(const Schedule& schedule) {
  std::ostringstream out;
  out << "# kind: " << to_string(schedule.kind()) << "\n";
  out << "# epochs sigma\n";
  for (const auto& s : schedule.segments()) out << s.epochs << ' ' << format_double(s.sigma) << '\n';
  return out.str();
}

Schedule parse_schedule(std::string_view text) {
  ScheduleKind kind = ScheduleKind::kVac;
  std::vector<Segment> segments;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      line = trim(line.substr(1));
      if (line.starts_with("kind:")) kind = parse_schedule_kind(trim(line.substr(5)));
      continue;
    }
    const auto sp = line.find_first_of(" \t");
    if (sp == std::string_view::npos)
      throw ConfigError("schedule line " + std::to_string(line_no) + ": expected '<epochs> <sigma>'");
    const auto a = trim(line.substr(0, sp));
    const auto b = trim(line.substr(sp));
    Segment seg;
    auto r1 = std::from_chars(a.data(), a.data() + a.size(), seg.epochs);
    auto r2 = std::from_chars(b.data(), b.data() + b.size(), seg.sigma);
    if (r1.ec != std::errc{} || r1.ptr != a.data() + a.size() || r2.ec != std::errc{} ||
        r2.ptr != b.data() + b.size())
      throw ConfigError("schedule line " + std::to_string(line_no) + ": cannot parse '" + std::string(line) + "'");
    segments.push_back(seg);
  }
  return Schedule(std::move(segments), kind);
}

// ---------------------------------------------------------------------------

ScheduledBlurPolicy::ScheduledBlurPolicy(Schedule schedule, bool replay)
    : schedule_(std::move(schedule)), replay_(replay) {
  for (std::size_t i = 0; i < schedule_.size(); ++i) per_segment_.push_back(replay_distribution(schedule_, i));
}

double ScheduledBlurPolicy::sample(int epoch, Rng& rng) const {
  const std::size_t i = segment_at(schedule_, epoch);
  if (!replay_) return schedule_[i].sigma;
  return sample_blur_level(per_segment_[i], schedule_, rng);
}

std::vector<SigmaWeight> ScheduledBlurPolicy::distribution(int epoch) const {
  const std::size_t i = segment_at(schedule_, epoch);
  if (!replay_) return {{schedule_[i].sigma, 1.0}};
  std::vector<SigmaWeight> out;
  const auto& d = per_segment_[i];
  for (std::size_t j = 0; j < d.size(); ++j) out.push_back({schedule_[j].sigma, d.weights[j]});
  return merge_by_sigma(out);
}

ConstantBlurPolicy::ConstantBlurPolicy(int total_epochs, double probability, double sigma)
    : total_epochs_(total_epochs), probability_(probability), sigma_(sigma) {
  if (total_epochs < 1) throw ConfigError("total_epochs must be positive");
  if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("blur probability must lie in [0, 1]");
  if (!(sigma >= 0.0)) throw ConfigError("blur sigma must be >= 0");
}

double ConstantBlurPolicy::sample(int epoch, Rng& rng) const {
  if (epoch < 0 || epoch >= total_epochs_) throw std::out_of_range("epoch outside policy range");
  return bernoulli(rng, probability_) ? sigma_ : 0.0;
}

std::vector<SigmaWeight> ConstantBlurPolicy::distribution(int) const {
  return merge_by_sigma({{sigma_, probability_}, {0.0, 1.0 - probability_}});
}

ContinuousBlurPolicy::ContinuousBlurPolicy(int total_epochs, int deficit_epochs, double sigma)
    : total_epochs_(total_epochs), deficit_epochs_(deficit_epochs), sigma_(sigma) {
  if (deficit_epochs < 1 || deficit_epochs > total_epochs) throw ConfigError("invalid deficit window");
  if (!(sigma >= 0.0)) throw ConfigError("blur sigma must be >= 0");
}

double ContinuousBlurPolicy::blurred_fraction(int epoch) const {
  if (epoch < 0 || epoch >= total_epochs_) throw std::out_of_range("epoch outside policy range");
  return std::max(0.0, 1.0 - static_cast<double>(epoch) / deficit_epochs_);
}

double ContinuousBlurPolicy::sample(int epoch, Rng& rng) const {
  return bernoulli(rng, blurred_fraction(epoch)) ? sigma_ : 0.0;
}

std::vector<SigmaWeight> ContinuousBlurPolicy::distribution(int epoch) const {
  const double f = blurred_fraction(epoch);
  return merge_by_sigma({{sigma_, f}, {0.0, 1.0 - f}});
}

// ---------------------------------------------------------------------------

std::string_view to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::kVac: return "vac";
    case VariantKind::kLinear: return "linear";
    case VariantKind::kInverse: return "inverse";
    case VariantKind::kContinuous: return "continuous";
    case VariantKind::kSteep: return "steep";
    case VariantKind::kConstant: return "constant";
    case VariantKind::kVanilla: return "vanilla";
  }
  return "unknown";
}

VariantKind parse_variant_kind(std::string_view name) {
  for (auto k : {VariantKind::kVac, VariantKind::kLinear, VariantKind::kInverse, VariantKind::kContinuous,
                 VariantKind::kSteep, VariantKind::kConstant, VariantKind::kVanilla}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown curriculum kind '" + std::string(name) + "'");
}

Curriculum make_variant(VariantKind kind, int total_epochs, const VariantParams& params) {
  CurriculumConfig cfg{total_epochs, params.sigma_max, params.deficit};
  switch (kind) {
    case VariantKind::kVac: {
      Schedule s = define_curriculum(cfg);
      return {s, std::make_shared<ScheduledBlurPolicy>(s, true)};
    }
    case VariantKind::kLinear: {
      cfg.validate();
      const int n_def = cfg.deficit_epochs();
      const int steps = cfg.levels() + 1;
      if (n_def < steps) throw InfeasibleScheduleError("deficit too short for a linear curriculum");
      std::vector<Segment> segs;
      const int base = n_def / steps;
      const int extra = n_def % steps;  // spread over the last blur steps
      for (int k = 0; k < steps; ++k) {
        segs.push_back({base + (k >= steps - extra ? 1 : 0), static_cast<double>(cfg.sigma_max >> k)});
      }
      segs.push_back({total_epochs - n_def, 0.0});
      Schedule s(std::move(segs), ScheduleKind::kLinear);
      return {s, std::make_shared<ScheduledBlurPolicy>(s, true)};
    }
    case VariantKind::kInverse: {
      Schedule vac = define_curriculum(cfg);
      std::vector<Segment> segs = vac.segments();
      const std::size_t n = segs.size();
      for (std::size_t i = 0; i < n; ++i) segs[i].sigma = vac[n - 1 - i].sigma;
      Schedule s(std::move(segs), ScheduleKind::kInverse);
      return {s, std::make_shared<ScheduledBlurPolicy>(s, true)};
    }
    case VariantKind::kSteep: {
      cfg.validate();
      const int blur = cfg.deficit_epochs() / 2;
      if (blur < 1) throw InfeasibleScheduleError("deficit too short for a steep curriculum");
      Schedule s({{blur, static_cast<double>(cfg.sigma_max)}, {total_epochs - blur, 0.0}}, ScheduleKind::kSteep);
      return {s, std::make_shared<ScheduledBlurPolicy>(s, false)};
    }
    case VariantKind::kConstant: {
      Schedule s({{total_epochs, params.blur_sigma}}, ScheduleKind::kConstant);
      return {s, std::make_shared<ConstantBlurPolicy>(total_epochs, params.blur_probability, params.blur_sigma)};
    }
    case VariantKind::kContinuous: {
      cfg.validate();
      const int n_def = cfg.deficit_epochs();
      Schedule s({{n_def, params.blur_sigma}, {total_epochs - n_def, 0.0}}, ScheduleKind::kContinuous);
      return {s, std::make_shared<ContinuousBlurPolicy>(total_epochs, n_def, params.blur_sigma)};
    }
    case VariantKind::kVanilla: {
      Schedule s({{total_epochs, 0.0}}, ScheduleKind::kConstant);
      return {s, std::make_shared<ConstantBlurPolicy>(total_epochs, 1.0, 0.0)};
    }
  }
  throw ConfigError("unknown curriculum kind");
}

}  // namespace vac
