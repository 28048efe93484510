#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>

#include "vac/curriculum.hpp"
#include "vac/errors.hpp"
#include "oracles.hpp"

using namespace vac;

namespace {

Schedule vac_schedule(int n, int sigma_max) { return define_curriculum({n, sigma_max, {}}); }

}  // namespace

TEST_SUITE("curriculum") {
  TEST_CASE("published schedules") {
    CHECK(vac_schedule(200, 2).segments() == std::vector<Segment>{{13, 2}, {27, 1}, {160, 0}});
    CHECK(vac_schedule(100, 8).segments() == std::vector<Segment>{{1, 8}, {3, 4}, {5, 2}, {11, 1}, {80, 0}});
  }

  TEST_CASE("desk-scale and degenerate schedules") {
    CHECK(vac_schedule(50, 2).segments() == std::vector<Segment>{{3, 2}, {7, 1}, {40, 0}});
    CHECK(vac_schedule(100, 1).segments() == std::vector<Segment>{{20, 1}, {80, 0}});
  }

  TEST_CASE("schedule matches the exact-arithmetic oracle") {
    int checked = 0;
    for (int n = 5; n <= 400; ++n)
      for (int sigma_max : {1, 2, 4, 8, 16}) {
        const auto expected = oracle::schedule(n, sigma_max);
        bool feasible = true;
        for (const auto& s : expected) feasible = feasible && s.epochs >= 1;
        if (!feasible) {
          CHECK_THROWS_AS(vac_schedule(n, sigma_max), InfeasibleScheduleError);
          continue;
        }
        const Schedule s = vac_schedule(n, sigma_max);
        CHECK(s.segments() == expected);
        CHECK(s.total_epochs() == n);
        ++checked;
      }
    CHECK(checked > 1000);
  }

  TEST_CASE("deficit fraction other than 1/5") {
    CurriculumConfig cfg{200, 2, {3, 10}};
    CHECK(define_curriculum(cfg).segments() == oracle::schedule(200, 2, 3, 10));
    CHECK(parse_fraction("0.3") == DeficitFraction{3, 10});
    CHECK(parse_fraction("2/5") == DeficitFraction{2, 5});
    CHECK_THROWS_AS(parse_fraction("1.2"), ConfigError);
    CHECK_THROWS_AS(parse_fraction("0"), ConfigError);
    CHECK_THROWS_AS(parse_fraction("abc"), ConfigError);
  }

  TEST_CASE("invalid configurations") {
    CHECK_THROWS_AS(vac_schedule(200, 3), ConfigError);
    CHECK_THROWS_AS(vac_schedule(200, 0), ConfigError);
    CHECK_THROWS_AS(vac_schedule(4, 2), ConfigError);
    // 10 epochs give N_def = 2: sigma 2 gets round(2/3) = 1, sigma 1 gets 1.
    CHECK(vac_schedule(10, 2).segments() == std::vector<Segment>{{1, 2}, {1, 1}, {8, 0}});
    // N_def = 1 cannot hold two blur levels.
    CHECK_THROWS_AS(vac_schedule(9, 2), InfeasibleScheduleError);
    CHECK_THROWS_AS(Schedule({{0, 2}, {10, 0}}, ScheduleKind::kVac), InfeasibleScheduleError);
  }

  TEST_CASE("segment lookup") {
    const Schedule s = vac_schedule(200, 2);
    CHECK(segment_at(s, 0) == 0);
    CHECK(segment_at(s, 12) == 0);
    CHECK(segment_at(s, 13) == 1);
    CHECK(segment_at(s, 39) == 1);
    CHECK(segment_at(s, 40) == 2);
    CHECK(segment_at(s, 199) == 2);
    CHECK_THROWS_AS(segment_at(s, 200), std::out_of_range);
    CHECK_THROWS_AS(segment_at(s, -1), std::out_of_range);
  }

  TEST_CASE("replay distribution") {
    const Schedule s = vac_schedule(200, 2);
    const auto d0 = replay_distribution(s, 0);
    REQUIRE(d0.size() == 1);
    CHECK(d0.weights[0] == 1.0);
    const auto d2 = replay_distribution(s, 2);
    REQUIRE(d2.size() == 3);
    CHECK(d2.weights[0] == doctest::Approx(0.065).epsilon(1e-12));
    CHECK(d2.weights[1] == doctest::Approx(0.135).epsilon(1e-12));
    CHECK(d2.weights[2] == doctest::Approx(0.800).epsilon(1e-12));
    CHECK(d2.total == 200);
    CHECK_THROWS_AS(replay_distribution(s, 3), std::out_of_range);
  }

  TEST_CASE("sampled sigma frequencies pass a chi-square test") {
    const Schedule s = vac_schedule(200, 2);
    const auto dist = replay_distribution(s, 2);
    Rng rng = make_rng({12345});
    std::map<double, int> counts;
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[sample_blur_level(dist, s, rng)];
    const double expected[] = {0.065, 0.135, 0.800};
    const double sigmas[] = {2, 1, 0};
    double chi2 = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double freq = static_cast<double>(counts[sigmas[j]]) / n;
      CHECK(std::abs(freq - expected[j]) <= 0.01);
      const double e = expected[j] * n;
      chi2 += (counts[sigmas[j]] - e) * (counts[sigmas[j]] - e) / e;
    }
    const double critical = boost::math::quantile(boost::math::chi_squared(2), 0.99);
    CHECK(chi2 < critical);
  }

  TEST_CASE("scheduled policy: epoch 0 is all sigma_max, replay off uses the active sigma") {
    const auto vac = make_variant(VariantKind::kVac, 200, {});
    Rng rng = make_rng({7});
    for (int i = 0; i < 1000; ++i) CHECK(vac.policy->sample(0, rng) == 2.0);
    const auto steep = make_variant(VariantKind::kSteep, 200, {});
    CHECK(steep.schedule.segments() == std::vector<Segment>{{20, 2}, {180, 0}});
    for (int i = 0; i < 1000; ++i) CHECK(steep.policy->sample(150, rng) == 0.0);
    for (int i = 0; i < 1000; ++i) CHECK(steep.policy->sample(19, rng) == 2.0);
  }

  TEST_CASE("policy distributions are merged and sum to one") {
    for (auto kind : {VariantKind::kVac, VariantKind::kLinear, VariantKind::kInverse, VariantKind::kContinuous,
                      VariantKind::kSteep, VariantKind::kConstant, VariantKind::kVanilla}) {
      VariantParams p;
      p.blur_probability = 0.2;
      const auto c = make_variant(kind, 200, p);
      for (int e = 0; e < 200; ++e) {
        double total = 0.0;
        for (const auto& w : c.policy->distribution(e)) total += w.probability;
        CHECK(total == doctest::Approx(1.0));
      }
      CHECK(c.policy->total_epochs() == 200);
      CHECK(c.schedule.total_epochs() == 200);
    }
  }

  TEST_CASE("ablation variants") {
    CHECK(make_variant(VariantKind::kLinear, 200, {}).schedule.segments() ==
          std::vector<Segment>{{20, 2}, {20, 1}, {160, 0}});
    // 9 deficit epochs over 4 levels: the remainder goes to the last step.
    CHECK(make_variant(VariantKind::kLinear, 45, {.sigma_max = 8}).schedule.segments() ==
          std::vector<Segment>{{2, 8}, {2, 4}, {2, 2}, {3, 1}, {36, 0}});
    CHECK(make_variant(VariantKind::kInverse, 200, {}).schedule.segments() ==
          std::vector<Segment>{{13, 0}, {27, 1}, {160, 2}});

    VariantParams p;
    p.blur_probability = 0.2;
    const auto c20 = make_variant(VariantKind::kConstant, 50, p);
    const auto d = c20.policy->distribution(30);
    REQUIRE(d.size() == 2);
    CHECK(d[0].sigma == 2.0);
    CHECK(d[0].probability == doctest::Approx(0.2));

    const auto cont = make_variant(VariantKind::kContinuous, 200, {});
    auto* policy = dynamic_cast<const ContinuousBlurPolicy*>(cont.policy.get());
    REQUIRE(policy != nullptr);
    CHECK(policy->blurred_fraction(0) == 1.0);
    CHECK(policy->blurred_fraction(20) == doctest::Approx(0.5));
    CHECK(policy->blurred_fraction(40) == 0.0);
    CHECK(policy->blurred_fraction(199) == 0.0);

    const auto vanilla = make_variant(VariantKind::kVanilla, 50, {});
    Rng rng = make_rng({1});
    for (int e = 0; e < 50; ++e) CHECK(vanilla.policy->sample(e, rng) == 0.0);
  }

  TEST_CASE("vanilla and sigma-0 policies draw nothing from the RNG") {
    const auto vanilla = make_variant(VariantKind::kVanilla, 50, {});
    Rng a = make_rng({9}), b = make_rng({9});
    for (int i = 0; i < 100; ++i) vanilla.policy->sample(3, a);
    CHECK(a() == b());
  }

  TEST_CASE("schedule text round trip") {
    for (auto kind : {VariantKind::kVac, VariantKind::kLinear, VariantKind::kInverse, VariantKind::kSteep}) {
      const auto c = make_variant(kind, 100, {.sigma_max = 8});
      CHECK(parse_schedule(format_schedule(c.schedule)) == c.schedule);
    }
    CHECK(format_schedule(vac_schedule(200, 2)) == "# kind: vac\n# epochs sigma\n13 2\n27 1\n160 0\n");
    CHECK_THROWS_AS(parse_schedule("13\n"), ConfigError);
    CHECK_THROWS_AS(parse_schedule("0 2\n10 0\n"), InfeasibleScheduleError);
  }

  TEST_CASE("variant names") {
    for (auto kind : {VariantKind::kVac, VariantKind::kLinear, VariantKind::kInverse, VariantKind::kContinuous,
                      VariantKind::kSteep, VariantKind::kConstant, VariantKind::kVanilla})
      CHECK(parse_variant_kind(to_string(kind)) == kind);
    CHECK_THROWS_AS(parse_variant_kind("exponential"), ConfigError);
  }
}
