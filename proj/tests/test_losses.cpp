#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "litenext/losses.hpp"
#include "test_util.hpp"

using namespace litenext;
using testutil::fill_uniform;
using testutil::grad_check;

namespace {

// Brute-force windowed morphology with zero padding: erosion is "every
// pixel in the k-window is 1", dilation is "any pixel is 1".
void brute_morph(const std::vector<float>& s, int H, int W, int k,
                 std::vector<float>& se, std::vector<float>& sd) {
  const int pad = (k - 1) / 2;
  se.assign(s.size(), 0);
  sd.assign(s.size(), 0);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      bool all = true, any = false;
      for (int di = -pad; di <= pad; ++di)
        for (int dj = -pad; dj <= pad; ++dj) {
          const int ii = i + di, jj = j + dj;
          const bool v =
              ii >= 0 && ii < H && jj >= 0 && jj < W && s[ii * W + jj] == 1;
          all = all && v;
          any = any || v;
        }
      se[i * W + j] = all ? 1.0f : 0.0f;
      sd[i * W + j] = any ? 1.0f : 0.0f;
    }
}

Tensor<float> random_mask(int H, int W, std::mt19937_64& rng,
                          double density = 0.4) {
  Tensor<float> m({H, W});
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int64_t i = 0; i < m.size(); ++i)
    m.data()[i] = uni(rng) < density ? 1.0f : 0.0f;
  return m;
}

}  // namespace

TEST_CASE("morphology matches the brute-force windowed oracle") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size_pick(16, 64);
  for (int trial = 0; trial < 30; ++trial) {
    const int H = size_pick(rng), W = size_pick(rng);
    auto mask = random_mask(H, W, rng);
    for (int k : {3, 5, 9}) {
      std::vector<float> se(mask.size()), sd(mask.size());
      detail::morph_erode_dilate(mask.data(), H, W, k, se.data(), sd.data());
      std::vector<float> se_ref, sd_ref;
      brute_morph(mask.vec(), H, W, k, se_ref, sd_ref);
      REQUIRE(se == se_ref);
      REQUIRE(sd == sd_ref);
      // Erosion shrinks, dilation grows.
      for (int64_t i = 0; i < mask.size(); ++i) {
        REQUIRE(se[i] <= mask.data()[i]);
        REQUIRE(mask.data()[i] <= sd[i]);
      }
    }
  }
}

TEST_CASE("weight mask: all-zero input is uniformly background weight") {
  Tensor<float> mask({8, 8});
  auto wm = build_weight_mask(mask, MwlConfig{});
  for (int64_t i = 0; i < wm.size(); ++i) CHECK(wm.data()[i] == 0.1f);
}

TEST_CASE("weight mask: single center pixel, k=3") {
  Tensor<float> mask({5, 5});
  mask.data()[2 * 5 + 2] = 1.0f;
  MwlConfig cfg;
  cfg.k = 3;
  auto wm = build_weight_mask(mask, cfg);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const float v = wm.data()[i * 5 + j];
      if (std::abs(i - 2) <= 1 && std::abs(j - 2) <= 1)
        CHECK(v == 0.6f);  // margin: dilated but not eroded
      else
        CHECK(v == 0.1f);
    }
}

TEST_CASE("weight mask: values partition into the three levels") {
  std::mt19937_64 rng(2);
  MwlConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    auto mask = random_mask(24, 31, rng);
    auto wm = build_weight_mask(mask, cfg);
    for (int64_t i = 0; i < wm.size(); ++i) {
      const float v = wm.data()[i];
      const bool is_b = v == (float)cfg.w_b, is_o = v == (float)cfg.w_o,
                 is_m = v == (float)cfg.w_m;
      REQUIRE((int)is_b + (int)is_o + (int)is_m == 1);
    }
  }
}

TEST_CASE("weight mask: k=1 collapses to object/background only") {
  std::mt19937_64 rng(3);
  auto mask = random_mask(16, 16, rng);
  MwlConfig cfg;
  cfg.k = 1;
  auto wm = build_weight_mask(mask, cfg);
  for (int64_t i = 0; i < wm.size(); ++i)
    CHECK(wm.data()[i] == (mask.data()[i] == 1.0f ? 0.3f : 0.1f));
}

TEST_CASE("weight mask: non-binary input error lists flat indices") {
  Tensor<float> mask({4, 4});
  mask.data()[5] = 0.5f;
  CHECK_THROWS_WITH_AS(build_weight_mask(mask, MwlConfig{}),
                       doctest::Contains("[5]"), std::invalid_argument);
}

TEST_CASE("MwlConfig validation") {
  MwlConfig bad;
  bad.w_b = 0.3;
  bad.w_o = 0.3;
  bad.w_m = 0.4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  MwlConfig even;
  even.k = 4;
  CHECK_THROWS_AS(even.validate(), std::invalid_argument);
  MwlConfig sum;
  sum.w_m = 0.7;
  CHECK_THROWS_AS(sum.validate(), std::invalid_argument);
}

TEST_CASE("mwl: single pixel hand value 0.6*ln2") {
  auto p = Tensor<float>::scalar(0.5f);
  auto y = Tensor<float>::scalar(1.0f);
  auto w = Tensor<float>::scalar(0.6f);
  CHECK(mwl_loss(p, y, w).item() ==
        doctest::Approx(0.6 * std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("mwl: uniform unit weights equal plain BCE") {
  std::mt19937_64 rng(4);
  Tensor<double> p({6, 7}), y({6, 7});
  fill_uniform(p, rng, 0.01, 0.99);
  for (int64_t i = 0; i < y.size(); ++i)
    y.data()[i] = (i % 3 == 0) ? 1.0 : 0.0;
  Tensor<double> w({6, 7}, 1.0);
  const double a = mwl_loss(p, y, w).item();
  const double b = baseline_loss(BaselineKind::kBce, p, y).item();
  CHECK(std::abs(a - b) < 1e-9);
}

TEST_CASE("mwl: perfect prediction is (near) zero and loss is monotone in w") {
  Tensor<float> y({4, 4});
  y.data()[3] = 1.0f;
  Tensor<float> p = y;  // same storage values; copy for clarity
  Tensor<float> w1({4, 4}, 0.5f), w2({4, 4}, 0.9f);
  CHECK(mwl_loss(p, y, w1).item() < 1e-5f);
  std::mt19937_64 rng(5);
  Tensor<float> q({4, 4});
  fill_uniform(q, rng, 0.1f, 0.9f);
  CHECK(mwl_loss(q, y, w2).item() >= mwl_loss(q, y, w1).item());
}

TEST_CASE("dice: closed forms") {
  // Perfect binary overlap: smoothing-limited.
  Tensor<float> y({1, 1, 8, 8});
  for (int i = 0; i < 20; ++i) y.data()[i] = 1.0f;
  CHECK(dice_loss(y, y).item() <= 1e-3f);

  // Inverted half-ones 16x16: 1 - s/(256+s), s=1.
  Tensor<float> t({1, 1, 16, 16}), p({1, 1, 16, 16});
  for (int i = 0; i < 128; ++i) t.data()[i] = 1.0f;
  for (int i = 128; i < 256; ++i) p.data()[i] = 1.0f;
  CHECK(dice_loss(p, t).item() ==
        doctest::Approx(1.0 - 1.0 / 257.0).epsilon(1e-6));

  // Both empty: smoothing rescues 0/0 exactly.
  Tensor<float> z({1, 1, 4, 4});
  CHECK(dice_loss(z, z).item() == 0.0f);
}

TEST_CASE("dice: per-sample mean over the batch") {
  Tensor<float> p({2, 1, 2, 2}), t({2, 1, 2, 2});
  for (int i = 0; i < 4; ++i) t.data()[i] = 1.0f;  // sample 0 all ones
  for (int i = 0; i < 4; ++i) p.data()[i] = 1.0f;
  // sample 1: p zero, t zero -> dice 0; sample 0 perfect -> ~0.
  const float batch = dice_loss(p, t).item();
  Tensor<float> p0({1, 1, 2, 2}, 1.0f), t0({1, 1, 2, 2}, 1.0f);
  Tensor<float> p1({1, 1, 2, 2}), t1({1, 1, 2, 2});
  const float want =
      0.5f * (dice_loss(p0, t0).item() + dice_loss(p1, t1).item());
  CHECK(batch == doctest::Approx(want).epsilon(1e-7));
}

TEST_CASE("serp: identity, orthogonality, negation, scaling invariance") {
  Tensor<float> e = Tensor<float>::from({4}, {1, 2, 3, 4});
  CHECK(serp_loss(e, e).item() == doctest::Approx(0.0).epsilon(1e-6));

  Tensor<float> a = Tensor<float>::from({2}, {1, 0});
  Tensor<float> b = Tensor<float>::from({2}, {0, 1});
  CHECK(serp_loss(a, b).item() == doctest::Approx(1.0).epsilon(1e-6));

  Tensor<float> neg = Tensor<float>::from({4}, {-1, -2, -3, -4});
  CHECK(serp_loss(e, neg).item() == doctest::Approx(2.0).epsilon(1e-6));

  std::mt19937_64 rng(6);
  Tensor<float> u({8}), v({8});
  fill_uniform(u, rng);
  fill_uniform(v, rng);
  const float base = serp_loss(u, v).item();
  for (float c : {0.5f, 3.0f, 10.0f}) {
    Tensor<float> cu(u.shape());
    for (int i = 0; i < 8; ++i) cu.data()[i] = c * u.data()[i];
    CHECK(std::abs(serp_loss(cu, v).item() - base) < 1e-6f);
    CHECK(serp_loss(u, v, 1e-8f).item() >= 0.0f);
  }
}

TEST_CASE("serp: range [0,2] and gradient only into the main embedding") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor<float> u({16}), v({16});
    fill_uniform(u, rng);
    fill_uniform(v, rng);
    const float l = serp_loss(u, v).item();
    REQUIRE(l >= 0.0f);
    REQUIRE(l <= 2.0f);
  }

  Tensor<double> m({2, 4}, 0.0, true), t({2, 4}, 0.0, true);
  fill_uniform(m, rng);
  fill_uniform(t, rng);
  Tape<double> tape;
  auto loss = serp_loss(m, t);
  backward(loss);
  CHECK(m.has_grad());
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("total loss decomposes bitwise and skips SeRP in d/dlogits") {
  std::mt19937_64 rng(8);
  Tensor<double> e_m({2, 8}, 0.0, true), e_t({2, 8});
  Tensor<double> logits({2, 1, 6, 6}, 0.0, true);
  fill_uniform(e_m, rng);
  fill_uniform(e_t, rng);
  fill_uniform(logits, rng, -2.0, 2.0);
  Tensor<double> target({2, 1, 6, 6});
  for (int64_t i = 0; i < target.size(); ++i)
    target.data()[i] = (i % 4 == 0) ? 1.0 : 0.0;
  auto wm = build_weight_mask(target, MwlConfig{});

  auto out = total_loss(e_m, e_t, logits, target, wm);
  const double parts = out.serp.item() + out.mwl.item() + out.dice.item();
  CHECK(out.total.item() == parts);

  // d total / d logits must equal d (mwl + dice) / d logits.
  auto full = [&]() {
    return total_loss(e_m, e_t, logits, target, wm).total;
  };
  auto masks_only = [&]() {
    auto probs = sigmoid(logits);
    return add(mwl_loss(probs, target, wm), dice_loss(probs, target));
  };
  logits.zero_grad();
  {
    Tape<double> tape;
    backward(full());
  }
  std::vector<double> g_full(logits.grad(), logits.grad() + logits.size());
  logits.zero_grad();
  {
    Tape<double> tape;
    backward(masks_only());
  }
  for (int64_t i = 0; i < logits.size(); ++i)
    CHECK(g_full[i] == doctest::Approx(logits.grad()[i]).epsilon(1e-12));
  logits.zero_grad();
}

TEST_CASE("finite-difference gradients of the loss terms at 64-bit") {
  std::mt19937_64 rng(9);
  Tensor<double> logits({1, 1, 5, 5}, 0.0, true);
  fill_uniform(logits, rng, -1.5, 1.5);
  Tensor<double> target({1, 1, 5, 5});
  for (int64_t i = 0; i < target.size(); ++i)
    target.data()[i] = (i % 2 == 0) ? 1.0 : 0.0;
  auto wm = build_weight_mask(target, MwlConfig{});

  CHECK(grad_check([&] { return mwl_loss(sigmoid(logits), target, wm); },
                   logits, 10, rng) < 1e-3);
  CHECK(grad_check([&] { return dice_loss(sigmoid(logits), target); },
                   logits, 10, rng) < 1e-3);
  for (auto kind : {BaselineKind::kBce, BaselineKind::kWbce,
                    BaselineKind::kBbce, BaselineKind::kFocal}) {
    CAPTURE((int)kind);
    CHECK(grad_check(
              [&] { return baseline_loss(kind, sigmoid(logits), target); },
              logits, 10, rng) < 1e-3);
  }

  Tensor<double> e_m({2, 6}, 0.0, true), e_t({2, 6});
  fill_uniform(e_m, rng);
  fill_uniform(e_t, rng);
  CHECK(grad_check([&] { return serp_loss(e_m, e_t); }, e_m, 10, rng) < 1e-3);
}

TEST_CASE("saturated probabilities keep gradients finite") {
  Tensor<float> logits({1, 1, 2, 2}, 0.0f, true);
  logits.data()[0] = 1000.0f;
  logits.data()[1] = -1000.0f;
  Tensor<float> target({1, 1, 2, 2});
  target.data()[1] = 1.0f;  // confidently wrong on both saturated pixels
  auto wm = build_weight_mask(target, MwlConfig{});
  Tape<float> tape;
  auto probs = sigmoid(logits);
  auto loss = add(mwl_loss(probs, target, wm), dice_loss(probs, target));
  CHECK(std::isfinite(loss.item()));
  backward(loss);
  for (int i = 0; i < 4; ++i) CHECK(std::isfinite(logits.grad()[i]));
}

TEST_CASE("baseline collapses: wbce(beta=1)==bce, focal(gamma=0,alpha=1)==bce") {
  std::mt19937_64 rng(10);
  Tensor<double> p({5, 5});
  fill_uniform(p, rng, 0.05, 0.95);
  Tensor<double> y({5, 5});
  for (int64_t i = 0; i < y.size(); ++i) y.data()[i] = (i % 2 == 0) ? 1 : 0;

  const double bce = baseline_loss(BaselineKind::kBce, p, y).item();

  LossConfig c1;
  c1.wbce_beta = 1.0;
  CHECK(baseline_loss(BaselineKind::kWbce, p, y, c1).item() == bce);

  LossConfig c2;
  c2.focal_gamma = 0.0;
  c2.focal_alpha = 1.0;
  CHECK(std::abs(baseline_loss(BaselineKind::kFocal, p, y, c2).item() - bce) <
        1e-9);

  CHECK_THROWS_AS(baseline_kind_from_string("dice"), std::invalid_argument);
}
