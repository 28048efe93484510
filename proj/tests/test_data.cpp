#include <doctest.h>

#include <map>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vac/data.hpp"
#include "vac/errors.hpp"

using namespace vac;

namespace {

Dataset tiny(std::size_t n, int classes = 10) { return make_synthetic_dataset(n, classes, 8, 8, 3, 21, "train"); }

std::vector<Batch> drain(EpochIterator it) {
  std::vector<Batch> out;
  while (auto b = it.next()) out.push_back(std::move(*b));
  return out;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("records round trip through disk") {
    const Dataset ds = tiny(30);
    fixture::TempDir dir("records");
    const auto crc = save_records(dir / "train.bin", ds);
    const Dataset back = load_dataset(dir / "train.bin");
    CHECK(back.labels == ds.labels);
    CHECK(back.images == ds.images);
    CHECK(back.meta.checksum == crc);
    CHECK(back.meta.split == "train");
    CHECK(std::filesystem::file_size(dir / "train.bin") == 30 * (1 + 8 * 8 * 3));
    CHECK(encode_records(back) == encode_records(ds));
  }

  TEST_CASE("byte layout is label then planar pixels") {
    std::vector<std::uint8_t> bytes(1 + 2 * 2 * 3);
    bytes[0] = 7;
    for (std::size_t i = 1; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i * 20);
    bytes[12] = 255;
    const Dataset ds = decode_records(bytes, {2, 2, 3, 10, "x", 0});
    CHECK(ds.labels[0] == 7);
    CHECK(ds.images[0].at(0, 0, 0) == doctest::Approx(20 / 255.0));
    CHECK(ds.images[0].at(1, 0, 0) == doctest::Approx(100 / 255.0));
    CHECK(ds.images[0].at(2, 1, 1) == 1.0f);
    CHECK(quantize(1.0f) == 255);
    CHECK(quantize(-0.2f) == 0);
    CHECK(quantize(0.5f) == 128);
  }

  TEST_CASE("truncated files and bad labels") {
    const Dataset ds = tiny(4);
    auto bytes = encode_records(ds);
    CHECK_THROWS_AS(decode_records(std::span(bytes).first(bytes.size() - 1), ds.meta), IoError);
    bytes[0] = 10;
    CHECK_THROWS_AS(decode_records(bytes, ds.meta), ConfigError);

    fixture::TempDir dir("bad");
    save_records(dir / "a.bin", ds);
    auto raw = fixture::read_bytes(dir / "a.bin");
    raw[5] ^= 1;
    std::ofstream(dir / "a.bin", std::ios::binary).write(raw.data(), static_cast<std::streamsize>(raw.size()));
    CHECK_THROWS_AS(load_dataset(dir / "a.bin"), IoError);
    CHECK_THROWS_AS(load_dataset(dir / "missing.bin"), IoError);
    fixture::write_text(dir / "b.bin", std::string(10, '\0'));
    fixture::write_text(dir / "b.bin.meta", "height = 2\nwidth = 2\nchannels = 1\ncolour = blue\n");
    CHECK_THROWS_AS(load_dataset(dir / "b.bin"), ConfigError);
  }

  TEST_CASE("multi-file loads concatenate in order") {
    const Dataset a = tiny(5), b = make_synthetic_dataset(3, 10, 8, 8, 3, 99);
    fixture::TempDir dir("multi");
    save_records(dir / "a.bin", a);
    save_records(dir / "b.bin", b);
    const Dataset both = load_records({dir / "a.bin", dir / "b.bin"}, a.meta);
    REQUIRE(both.size() == 8);
    CHECK(both.images[5] == b.images[0]);
    CHECK(both.labels[7] == b.labels[2]);
  }

  TEST_CASE("stratified subset") {
    const Dataset ds = tiny(200);
    const Dataset s = subset(ds, 55, 3);
    CHECK(s.size() == 55);
    const auto hist = label_histogram(s);
    for (int c = 0; c < 10; ++c) CHECK(hist[c] == (c < 5 ? 6u : 5u));
    CHECK(subset(ds, 55, 3).images == s.images);
    CHECK(subset(ds, 55, 4).images != s.images);
    // Every chosen image comes from the source with its own label.
    std::multiset<std::uint8_t> labels(s.labels.begin(), s.labels.end());
    CHECK(labels.size() == 55);
    for (std::size_t i = 0; i < s.size(); ++i) {
      bool found = false;
      for (std::size_t j = 0; j < ds.size() && !found; ++j) found = ds.images[j] == s.images[i] && ds.labels[j] == s.labels[i];
      CHECK(found);
    }
    CHECK(subset(ds, 200, 1).size() == 200);
    CHECK_THROWS_AS(subset(ds, 201, 1), ConfigError);
  }

  TEST_CASE("subset falls back to uniform when a class runs short") {
    Dataset ds = tiny(20);
    for (auto& l : ds.labels) l = l == 9 ? 0 : l;
    const Dataset s = subset(ds, 20, 1);
    CHECK(s.size() == 20);
  }

  TEST_CASE("batch plans are permutations fixed by seed and epoch") {
    const auto plan = make_batch_plan(101, 5, 3, 16, {});
    std::vector<std::size_t> sorted = plan.permutation;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> expected(101);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(sorted == expected);
    CHECK(make_batch_plan(101, 5, 3, 16, {}).permutation == plan.permutation);
    CHECK(make_batch_plan(101, 5, 4, 16, {}).permutation != plan.permutation);
    CHECK(make_batch_plan(101, 6, 3, 16, {}).permutation != plan.permutation);
    CHECK_THROWS_AS(make_batch_plan(10, 1, 0, 0, {}), ConfigError);
  }

  TEST_CASE("an epoch visits every record once") {
    const Dataset ds = tiny(45);
    const auto vanilla = make_variant(VariantKind::kVanilla, 10, {});
    EpochIterator it(ds, make_batch_plan(45, 1, 0, 16, {}), *vanilla.policy, 0, 2);
    CHECK(it.batches() == 3);
    const auto batches = drain(std::move(it));
    REQUIRE(batches.size() == 3);
    CHECK(batches[2].size() == 13);
    std::set<std::size_t> seen;
    for (const auto& b : batches)
      for (std::size_t i = 0; i < b.size(); ++i) {
        seen.insert(b.indices[i]);
        CHECK(b.labels[i] == ds.labels[b.indices[i]]);
      }
    CHECK(seen.size() == 45);
  }

  TEST_CASE("sigma 0 with augmentation off yields the stored images") {
    const Dataset ds = tiny(20);
    const auto vanilla = make_variant(VariantKind::kVanilla, 10, {});
    AugmentOptions off;
    off.enabled = false;
    for (const auto& b : drain(EpochIterator(ds, make_batch_plan(20, 1, 2, 7, off), *vanilla.policy, 2, 3)))
      for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(b.sigmas[i] == 0.0);
        CHECK(b.images[i] == ds.images[b.indices[i]]);
      }
  }

  TEST_CASE("first VAC epoch is fully blurred at sigma_max") {
    const Dataset ds = tiny(64);
    const auto vac = make_variant(VariantKind::kVac, 50, {});
    AugmentOptions off;
    off.enabled = false;
    for (const auto& b : drain(EpochIterator(ds, make_batch_plan(64, 1, 0, 32, off), *vac.policy, 0, 3)))
      for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(b.sigmas[i] == 2.0);
        CHECK(b.images[i] == gaussian_blur(ds.images[b.indices[i]], 2.0));
      }
  }

  TEST_CASE("blur is applied before augmentation") {
    const Dataset ds = tiny(40);
    const auto vac = make_variant(VariantKind::kVac, 50, {});
    const AugmentOptions aug;
    const auto plan = make_batch_plan(40, 1, 0, 40, aug);
    const auto batch = drain(EpochIterator(ds, plan, *vac.policy, 0, 3)).at(0);
    int shifted = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t idx = batch.indices[i];
      auto aug_rng = [&] { return make_rng({plan.epoch_seed, static_cast<std::uint64_t>(Stream::kAugment), idx}); };
      Rng r1 = aug_rng();
      CHECK(batch.images[i] == augment(gaussian_blur(ds.images[idx], 2.0), aug, r1));
      // With a nonzero crop offset the zero border makes the order visible.
      Rng probe = aug_rng();
      const bool offset = uniform_index(probe, 9) != 4 || uniform_index(probe, 9) != 4;
      if (offset) {
        Rng r2 = aug_rng();
        CHECK(batch.images[i] != gaussian_blur(augment(ds.images[idx], aug, r2), 2.0));
        ++shifted;
      }
    }
    CHECK(shifted > 0);
  }

  TEST_CASE("blur draws do not depend on the augmentation toggle") {
    const Dataset ds = tiny(120);
    const auto vac = make_variant(VariantKind::kVac, 50, {});
    AugmentOptions off;
    off.enabled = false;
    for (int epoch : {0, 5, 20}) {
      const auto with = drain(EpochIterator(ds, make_batch_plan(120, 8, epoch, 50, {}), *vac.policy, epoch, 4));
      const auto without = drain(EpochIterator(ds, make_batch_plan(120, 8, epoch, 50, off), *vac.policy, epoch, 4));
      REQUIRE(with.size() == without.size());
      for (std::size_t b = 0; b < with.size(); ++b) {
        CHECK(with[b].indices == without[b].indices);
        CHECK(with[b].sigmas == without[b].sigmas);
      }
    }
  }

  TEST_CASE("augmentation crop and flip") {
    Image img(4, 4, 1);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) img.at(0, y, x) = static_cast<float>(y * 4 + x) / 16.0f;
    AugmentOptions opts;
    opts.pad = 1;
    opts.flip_probability = 1.0;
    bool saw_shift = false;
    for (std::uint64_t s = 0; s < 20; ++s) {
      Rng rng = make_rng({s}), probe = make_rng({s});
      const int oy = static_cast<int>(uniform_index(probe, 3)) - 1;
      const int ox = static_cast<int>(uniform_index(probe, 3)) - 1;
      const Image out = augment(img, opts, rng);
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
          const int sy = y + oy, sx = 3 - x + ox;
          const float want = (sy < 0 || sy > 3 || sx < 0 || sx > 3) ? 0.0f : img.at(0, sy, sx);
          CHECK(out.at(0, y, x) == want);
        }
      saw_shift = saw_shift || oy != 0 || ox != 0;
    }
    CHECK(saw_shift);
    opts.enabled = false;
    Rng rng = make_rng({1});
    CHECK(augment(img, opts, rng) == img);
  }

  TEST_CASE("synthetic data") {
    const Dataset a = make_synthetic_dataset(30, 10, 16, 16, 3, 1);
    CHECK(a.images == make_synthetic_dataset(30, 10, 16, 16, 3, 1).images);
    CHECK(a.images != make_synthetic_dataset(30, 10, 16, 16, 3, 2).images);
    CHECK_NOTHROW(a.validate());
    const auto hist = label_histogram(a);
    for (auto h : hist) CHECK(h == 3);
    CHECK_THROWS_AS(make_synthetic_dataset(0, 10, 8, 8, 3, 1), ConfigError);
  }
}
