#include <doctest.h>

#include <cmath>
#include <functional>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vac/errors.hpp"
#include "vac/nn.hpp"

using namespace vac;
using namespace vac::nn;

namespace {

constexpr double kGradTolerance = 1e-4;

Architecture small_arch() {
  Architecture a;
  a.in_channels = 3;
  a.height = 8;
  a.width = 8;
  a.conv1 = 3;
  a.conv2 = 4;
  a.hidden = 6;
  a.classes = 5;
  return a;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("conv2d gradients") {
    auto x = oracle::param("x", oracle::random_tensor({2, 2, 5, 6}, 1));
    auto w = oracle::param("w", oracle::random_tensor({3, 2, 3, 3}, 2, 0.5));
    auto b = oracle::param("b", oracle::random_tensor({3}, 3));
    const oracle::Readout head(2, 3 * 5 * 6, 4);
    CHECK(oracle::check_gradients({&x, &w, &b}, [&](Tape& t, const std::vector<Var>& v) {
            return head(t, conv2d(t, v[0], v[1], v[2], 1));
          }) <= kGradTolerance);
    Tape t(false);
    CHECK_THROWS_AS(conv2d(t, t.constant(x.value), t.constant(w.value), t.constant(b.value), 0), std::invalid_argument);
  }

  TEST_CASE("conv2d forward against a direct sum") {
    const Tensor x = oracle::random_tensor({1, 2, 4, 4}, 5);
    const Tensor w = oracle::random_tensor({1, 2, 3, 3}, 6);
    Tape t(false);
    const Tensor y = t.value(conv2d(t, t.constant(x), t.constant(w), t.constant(Tensor({1}, 0.25)), 1));
    REQUIRE(y.shape == std::vector<int>{1, 1, 4, 4});
    for (int oy = 0; oy < 4; ++oy)
      for (int ox = 0; ox < 4; ++ox) {
        double want = 0.25;
        for (int c = 0; c < 2; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy + ky - 1, ix = ox + kx - 1;
              if (iy < 0 || iy >= 4 || ix < 0 || ix >= 4) continue;
              want += w.values[(c * 3 + ky) * 3 + kx] * x.values[(c * 4 + iy) * 4 + ix];
            }
        CHECK(y.values[oy * 4 + ox] == doctest::Approx(want).epsilon(1e-12));
      }
  }

  TEST_CASE("relu and scale gradients") {
    auto x = oracle::param("x", oracle::random_tensor({2, 12}, 7));
    for (double& v : x.value.values) v += v >= 0 ? 0.05 : -0.05;  // keep off the kink
    const oracle::Readout head(2, 12, 8);
    CHECK(oracle::check_gradients({&x}, [&](Tape& t, const std::vector<Var>& v) {
            return head(t, scale(t, relu(t, v[0]), -1.7));
          }) <= kGradTolerance);
  }

  TEST_CASE("maxpool gradients and tie rule") {
    auto x = oracle::param("x", oracle::random_tensor({2, 2, 4, 6}, 9));
    const oracle::Readout head(2, 2 * 2 * 3, 10);
    CHECK(oracle::check_gradients({&x}, [&](Tape& t, const std::vector<Var>& v) { return head(t, maxpool2(t, v[0])); }) <=
          kGradTolerance);

    Parameter tie = oracle::param("tie", Tensor({1, 1, 2, 2}, 0.5));
    Tape t;
    const Var y = maxpool2(t, t.parameter(tie));
    CHECK(t.value(y).values[0] == 0.5);
    const oracle::Readout one(1, 1, 11);
    t.backward(one(t, y));
    CHECK(tie.grad.values[0] != 0.0);
    CHECK(tie.grad.values[1] == 0.0);
    CHECK(tie.grad.values[2] == 0.0);
    CHECK(tie.grad.values[3] == 0.0);
  }

  TEST_CASE("linear gradients") {
    auto x = oracle::param("x", oracle::random_tensor({3, 7}, 12));
    auto w = oracle::param("w", oracle::random_tensor({4, 7}, 13));
    auto b = oracle::param("b", oracle::random_tensor({4}, 14));
    const oracle::Readout head(3, 4, 15);
    CHECK(oracle::check_gradients({&x, &w, &b}, [&](Tape& t, const std::vector<Var>& v) {
            return head(t, linear(t, v[0], v[1], v[2]));
          }) <= kGradTolerance);
  }

  TEST_CASE("cross entropy value and gradient") {
    auto logits = oracle::param("z", oracle::random_tensor({4, 5}, 16, 3.0));
    const std::vector<int> labels{0, 4, 2, 2};
    Tape t(false);
    const double got = t.value(cross_entropy(t, t.constant(logits.value), labels)).values[0];
    CHECK(got == doctest::Approx(oracle::cross_entropy(logits.value, labels)).epsilon(1e-14));
    CHECK(oracle::check_gradients({&logits}, [&](Tape& tp, const std::vector<Var>& v) {
            return cross_entropy(tp, v[0], labels);
          }) <= kGradTolerance);

    // Large logits stay finite thanks to the max shift.
    Tensor big({1, 2});
    big.values = {1000.0, 0.0};
    Tape t2(false);
    CHECK(t2.value(cross_entropy(t2, t2.constant(big), std::vector<int>{1})).values[0] == doctest::Approx(1000.0));
    Tape t3(false);
    CHECK_THROWS_AS(cross_entropy(t3, t3.constant(big), std::vector<int>{2}), std::out_of_range);
  }

  TEST_CASE("end-to-end network gradients") {
    SmallConvNet net(small_arch(), 3);
    const Tensor batch = oracle::random_tensor({2, 3, 8, 8}, 17);
    const std::vector<int> labels{1, 4};
    std::vector<Parameter*> params;
    for (auto& p : net.parameters()) params.push_back(&p);
    // Evaluate through the op layer with the network's own parameters as inputs.
    SmallConvNet probe = net;
    const double err = oracle::check_gradients(params, [&](Tape& t, const std::vector<Var>& v) {
      Var h = relu(t, conv2d(t, t.constant(batch), v[0], v[1], 1));
      h = maxpool2(t, h);
      h = maxpool2(t, relu(t, conv2d(t, h, v[2], v[3], 1)));
      h = relu(t, linear(t, flatten(t, h), v[4], v[5]));
      return cross_entropy(t, linear(t, h, v[6], v[7]), labels);
    });
    CHECK(err <= kGradTolerance);

    // The network's own forward pass records the same graph.
    Tape t;
    const Var logits = probe.forward(t, batch);
    CHECK(t.value(logits) == net.logits(batch));
    t.backward(cross_entropy(t, logits, labels));
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i]->grad.numel(); ++j)
        CHECK(probe.parameters()[i].grad.values[j] == doctest::Approx(params[i]->grad.values[j]).epsilon(1e-12));
  }

  TEST_CASE("per-image logits do not depend on the batch") {
    SmallConvNet net(small_arch(), 4);
    const Tensor pair = oracle::random_tensor({2, 3, 8, 8}, 18);
    Tensor first({1, 3, 8, 8});
    std::copy(pair.values.begin(), pair.values.begin() + 192, first.values.begin());
    const Tensor both = net.logits(pair), one = net.logits(first);
    for (int k = 0; k < 5; ++k) CHECK(both.values[k] == one.values[k]);
  }

  TEST_CASE("initialization") {
    const SmallConvNet a(small_arch(), 1), b(small_arch(), 1), c(small_arch(), 2);
    CHECK(a.parameters()[0].value == b.parameters()[0].value);
    CHECK(a.parameters()[0].value != c.parameters()[0].value);
    for (const auto& p : a.parameters()) {
      const int fan_in = p.name.starts_with("conv1") ? 27 : p.name.starts_with("conv2") ? 27 : p.name.starts_with("fc1") ? 16 : 6;
      const double bound = 1.0 / std::sqrt(fan_in);
      for (double v : p.value.values) CHECK(std::abs(v) <= bound);
    }
    CHECK(a.parameter_count() == 3 * 27 + 3 + 4 * 27 + 4 + 6 * 16 + 6 + 5 * 6 + 5);
    CHECK_THROWS_AS(SmallConvNet(Architecture{3, 10, 10}, 1), std::invalid_argument);
  }

  TEST_CASE("sgd with momentum and weight decay over two steps") {
    SmallConvNet net(small_arch(), 5);
    Sgd sgd(net, {0.9, 0.01});
    auto& p = net.parameter("fc2.bias");
    const double w0 = p.value.values[0];
    const double g1 = 0.3, g2 = -0.2, lr = 0.1;
    auto set_grads = [&](double g) {
      for (auto& q : net.parameters()) {
        std::fill(q.grad.values.begin(), q.grad.values.end(), g);
        q.has_grad = true;
      }
    };
    set_grads(g1);
    sgd.step(lr);
    const double v1 = g1 + 0.01 * w0;
    const double w1 = w0 - lr * v1;
    CHECK(p.value.values[0] == doctest::Approx(w1).epsilon(1e-15));
    CHECK_FALSE(p.has_grad);
    set_grads(g2);
    sgd.step(lr);
    const double v2 = 0.9 * v1 + g2 + 0.01 * w1;
    CHECK(p.value.values[0] == doctest::Approx(w1 - lr * v2).epsilon(1e-15));
    CHECK(sgd.velocities()[7].values[0] == doctest::Approx(v2).epsilon(1e-15));
    CHECK_THROWS_AS(sgd.step(lr), std::logic_error);
  }

  TEST_CASE("learning-rate schedules") {
    const LrSchedule cosine{LrScheduleKind::kCosine, 0.1, 50, {}, 0.1};
    CHECK(cosine.at(0) == doctest::Approx(0.1));
    CHECK(cosine.at(25) == doctest::Approx(0.05));
    CHECK(cosine.at(50) == doctest::Approx(0.0));
    for (int e = 1; e < 50; ++e) CHECK(cosine.at(e) < cosine.at(e - 1));
    const LrSchedule step{LrScheduleKind::kStep, 0.1, 50, {20, 40}, 0.1};
    CHECK(step.at(19) == doctest::Approx(0.1));
    CHECK(step.at(20) == doctest::Approx(0.01));
    CHECK(step.at(45) == doctest::Approx(0.001));
    CHECK(LrSchedule{LrScheduleKind::kConstant, 0.3, 5, {}, 0.1}.at(4) == 0.3);
  }

  TEST_CASE("checkpoint round trip") {
    const SmallConvNet net(small_arch(), 6);
    fixture::TempDir dir("ckpt");
    save_checkpoint(dir / "m.ckpt", net, 0xabcdef);
    const Checkpoint ck = read_checkpoint(dir / "m.ckpt");
    CHECK(ck.config_digest == 0xabcdef);
    CHECK(ck.arch == small_arch());
    const SmallConvNet back = load_model(ck);
    for (std::size_t i = 0; i < net.parameters().size(); ++i)
      CHECK(back.parameters()[i].value == net.parameters()[i].value);
    const Tensor batch = oracle::random_tensor({3, 3, 8, 8}, 19);
    CHECK(back.logits(batch) == net.logits(batch));

    auto bytes = fixture::read_bytes(dir / "m.ckpt");
    std::ofstream(dir / "short.ckpt", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    CHECK_THROWS_AS(read_checkpoint(dir / "short.ckpt"), IoError);
    bytes[0] = 'X';
    std::ofstream(dir / "bad.ckpt", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), IoError);
    CHECK_THROWS_AS(read_checkpoint(dir / "none.ckpt"), IoError);
  }

  TEST_CASE("predictions and top-1 error") {
    Tensor logits({3, 3});
    logits.values = {1, 1, 0, 0, 2, 2, 5, 1, 5};
    CHECK(argmax_rows(logits) == std::vector<int>{0, 1, 0});

    struct Fixed final : Classifier {
      std::vector<int> predict(std::span<const Image> images) const override {
        std::vector<int> out;
        for (std::size_t i = 0; i < images.size(); ++i) out.push_back(static_cast<int>(i % 2));
        return out;
      }
    } fixed;
    const std::vector<Image> images(4, Image(4, 4, 3));
    const std::vector<std::uint8_t> labels{0, 1, 1, 1};
    CHECK(top1_error(fixed, images, labels) == 0.25);
    CHECK_THROWS_AS(top1_error(fixed, {}, {}), std::invalid_argument);

    const SmallConvNet net(small_arch(), 7);
    const ModelClassifier clf(net, 2);
    std::vector<Image> five;
    for (int i = 0; i < 5; ++i) five.push_back(oracle::random_image(8, 8, 3, 40 + i));
    const auto pred = clf.predict(five);
    CHECK(pred == argmax_rows(net.logits(images_to_tensor(five))));
  }

  TEST_CASE("tape and shape errors") {
    SmallConvNet net(small_arch(), 8);
    Tape off(false);
    CHECK_THROWS_AS(off.backward(net.forward(off, oracle::random_tensor({1, 3, 8, 8}, 1))), std::logic_error);
    Tape t;
    const Var logits = net.forward(t, oracle::random_tensor({1, 3, 8, 8}, 1));
    CHECK_THROWS_AS(t.backward(logits), std::logic_error);
    const Var loss = cross_entropy(t, logits, std::vector<int>{0});
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), std::logic_error);
    CHECK_THROWS_AS(net.logits(oracle::random_tensor({1, 1, 8, 8}, 1)), std::invalid_argument);
    Tensor nan = oracle::random_tensor({1, 3, 8, 8}, 2);
    nan.values[5] = NAN;
    CHECK_THROWS_AS(net.logits(nan), NumericalError);
    CHECK_THROWS_AS(images_to_tensor(std::vector<Image>{Image(8, 8, 3), Image(4, 4, 3)}), std::invalid_argument);
  }
}
