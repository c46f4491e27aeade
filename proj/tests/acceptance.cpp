// Acceptance suite: one pass/fail line per criterion. Exits non-zero if
// any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "litenext/config.hpp"
#include "litenext/data_io.hpp"
#include "litenext/losses.hpp"
#include "litenext/metrics.hpp"
#include "litenext/model.hpp"
#include "litenext/trainer.hpp"
#include "test_util.hpp"

using namespace litenext;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;
using testutil::fill_uniform;
using testutil::grad_check;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok,
            const std::string& detail = "") {
  std::printf("[%2d] %-34s %s%s%s\n", idx, name.c_str(),
              ok ? "PASS" : "FAIL", detail.empty() ? "" : "  -- ",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(clk::time_point t0) {
  return std::chrono::duration<double>(clk::now() - t0).count();
}

void brute_morph(const std::vector<double>& s, int H, int W, int k,
                 std::vector<double>& se, std::vector<double>& sd) {
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
      se[i * W + j] = all ? 1 : 0;
      sd[i * W + j] = any ? 1 : 0;
    }
}

struct MaskCorpus {
  std::vector<std::vector<double>> masks;
  std::vector<std::pair<int, int>> sizes;
};

MaskCorpus make_corpus() {
  MaskCorpus c;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size_pick(16, 64);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const int H = size_pick(rng), W = size_pick(rng);
    std::vector<double> m((size_t)H * W);
    const double density = 0.1 + 0.8 * uni(rng);
    for (auto& v : m) v = uni(rng) < density ? 1.0 : 0.0;
    c.masks.push_back(std::move(m));
    c.sizes.emplace_back(H, W);
  }
  return c;
}

// --- criteria ------------------------------------------------------------

void criterion_1_morphology(const MaskCorpus& corpus) {
  const auto t0 = clk::now();
  bool ok = true;
  for (size_t i = 0; i < corpus.masks.size() && ok; ++i) {
    const auto [H, W] = corpus.sizes[i];
    for (int k : {3, 5, 9}) {
      std::vector<double> se(corpus.masks[i].size()),
          sd(corpus.masks[i].size());
      detail::morph_erode_dilate(corpus.masks[i].data(), H, W, k, se.data(),
                                 sd.data());
      std::vector<double> se_ref, sd_ref;
      brute_morph(corpus.masks[i], H, W, k, se_ref, sd_ref);
      if (se != se_ref || sd != sd_ref) {
        ok = false;
        break;
      }
    }
  }
  const double secs = seconds_since(t0);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1fs", secs);
  report(1, "morphology oracle equivalence", ok && secs < 60.0, buf);
}

void criterion_2_partition(const MaskCorpus& corpus) {
  MwlConfig cfg;  // (0.1, 0.3, 0.6), k = 9
  bool ok = true;
  for (size_t i = 0; i < corpus.masks.size() && ok; ++i) {
    const auto [H, W] = corpus.sizes[i];
    Tensor<double> mask({H, W});
    std::copy(corpus.masks[i].begin(), corpus.masks[i].end(), mask.data());
    auto wm = build_weight_mask(mask, cfg);
    std::vector<double> se(mask.size()), sd(mask.size());
    detail::morph_erode_dilate(mask.data(), H, W, cfg.k, se.data(),
                               sd.data());
    for (int64_t p = 0; p < wm.size(); ++p) {
      const double v = wm.data()[p];
      const bool in_set = v == 0.1 || v == 0.3 || v == 0.6;
      const double indicators =
          (sd[p] - se[p]) + se[p] + (1.0 - sd[p]);  // must partition
      const bool order = se[p] <= mask.data()[p] && mask.data()[p] <= sd[p];
      if (!in_set || indicators != 1.0 || !order) {
        ok = false;
        break;
      }
    }
  }
  report(2, "weight-mask partition", ok);
}

void criterion_3_gradients() {
  const auto t0 = clk::now();
  double worst = 0.0;
  std::string worst_op;
  auto check = [&](const std::string& op, double err) {
    if (err > worst) {
      worst = err;
      worst_op = op;
    }
  };

  for (uint64_t seed : {101ULL, 202ULL, 303ULL}) {
    std::mt19937_64 rng(seed);

    {  // conv2d: input, weight, bias
      Tensor<double> x({2, 3, 8, 8}, 0.0, true), w({4, 3, 3, 3}, 0.0, true),
          b({4}, 0.0, true);
      fill_uniform(x, rng);
      fill_uniform(w, rng);
      fill_uniform(b, rng);
      auto f = [&] { return sum(gelu(conv2d(x, w, b, 1, 1))); };
      check("conv2d/x", grad_check(f, x, 10, rng));
      check("conv2d/w", grad_check(f, w, 10, rng));
      check("conv2d/b", grad_check(f, b, 4, rng));
    }
    {  // depthwise conv
      Tensor<double> x({2, 4, 8, 8}, 0.0, true), w({4, 1, 3, 3}, 0.0, true),
          b({4}, 0.0, true);
      fill_uniform(x, rng);
      fill_uniform(w, rng);
      fill_uniform(b, rng);
      auto f = [&] { return sum(gelu(depthwise_conv2d(x, w, b, 1))); };
      check("dwconv/x", grad_check(f, x, 10, rng));
      check("dwconv/w", grad_check(f, w, 10, rng));
    }
    {  // maxpool (step kept small vs. the argmax kink)
      Tensor<double> x({1, 2, 8, 8}, 0.0, true);
      fill_uniform(x, rng);
      auto f = [&] { return sum(gelu(maxpool2x2(x))); };
      check("maxpool", grad_check(f, x, 10, rng, 1e-5));
    }
    {  // bilinear resize, both directions
      Tensor<double> x({1, 2, 6, 6}, 0.0, true);
      fill_uniform(x, rng);
      auto up = [&] { return sum(gelu(upsample_bilinear(x, 13, 11))); };
      auto down = [&] { return sum(gelu(resize_bilinear(x, 3, 4))); };
      check("resize/up", grad_check(up, x, 10, rng));
      check("resize/down", grad_check(down, x, 10, rng));
    }
    {  // layer norm: input, gamma, beta
      Tensor<double> x({2, 5, 4, 4}, 0.0, true), g({5}, 1.0, true),
          b({5}, 0.0, true);
      fill_uniform(x, rng);
      fill_uniform(g, rng, 0.5, 1.5);
      fill_uniform(b, rng);
      auto f = [&] { return sum(gelu(layer_norm_channels(x, g, b))); };
      check("layernorm/x", grad_check(f, x, 10, rng));
      check("layernorm/gamma", grad_check(f, g, 5, rng));
      check("layernorm/beta", grad_check(f, b, 5, rng));
    }
    {  // pointwise ops and linear
      Tensor<double> x({3, 7}, 0.0, true), w({4, 7}, 0.0, true),
          b({4}, 0.0, true);
      fill_uniform(x, rng);
      fill_uniform(w, rng);
      fill_uniform(b, rng);
      check("gelu", grad_check([&] { return sum(gelu(x)); }, x, 10, rng));
      check("sigmoid",
            grad_check([&] { return sum(sigmoid(x)); }, x, 10, rng, 1e-5));
      check("linear/x",
            grad_check([&] { return sum(gelu(linear(x, w, b))); }, x, 10,
                       rng));
      check("linear/w",
            grad_check([&] { return sum(gelu(linear(x, w, b))); }, w, 10,
                       rng));
      check("softmax",
            grad_check([&] { return sum(gelu(softmax_vec(x))); }, x, 10,
                       rng));
      check("scale", grad_check([&] { return sum(scale(x, 2.5)); }, x, 10,
                                rng));
    }
    {  // pools over 4-d input
      Tensor<double> x({2, 3, 6, 6}, 0.0, true);
      fill_uniform(x, rng);
      check("gap", grad_check([&] { return sum(gelu(global_avg_pool(x))); },
                              x, 10, rng));
      check("gmp", grad_check([&] { return sum(gelu(global_max_pool(x))); },
                              x, 10, rng, 1e-5));
    }
    {  // add, concat, rowwise_dot, stage_mix
      Tensor<double> a({2, 3, 4, 4}, 0.0, true), b({2, 3, 4, 4}, 0.0, true);
      fill_uniform(a, rng);
      fill_uniform(b, rng);
      check("add", grad_check([&] { return sum(gelu(add(a, b))); }, a, 10,
                              rng));
      check("concat",
            grad_check([&] { return sum(gelu(concat_channels(a, b))); }, b,
                       10, rng));

      Tensor<double> q({2, 5}, 0.0, true), k({2, 5}, 0.0, true);
      fill_uniform(q, rng);
      fill_uniform(k, rng);
      check("rowwise_dot",
            grad_check([&] { return sum(gelu(rowwise_dot(q, k))); }, q, 8,
                       rng));

      Tensor<double> alpha({2, 2}, 0.0, true);
      fill_uniform(alpha, rng, 0.1, 0.9);
      auto mix = [&] {
        return sum(gelu(stage_mix(alpha, std::vector<Tensor<double>>{a, b})));
      };
      check("stage_mix/alpha", grad_check(mix, alpha, 4, rng));
      check("stage_mix/value", grad_check(mix, a, 10, rng));
    }
    {  // full model total loss on 3x32x32 input
      ModelConfig cfg;
      cfg.base_channels = 2;
      cfg.image_size = 32;
      auto params = init_model<double>(cfg, seed);
      Tensor<double> strong({1, 3, 32, 32}), weak({1, 3, 32, 32});
      fill_uniform(strong, rng, 0.0, 1.0);
      fill_uniform(weak, rng, 0.0, 1.0);
      Tensor<double> target({1, 1, 32, 32});
      for (int64_t i = 0; i < target.size(); ++i)
        target.data()[i] = ((i / 32 + i % 32) % 5 < 2) ? 1.0 : 0.0;
      auto wm = build_weight_mask(target, MwlConfig{});
      auto f = [&] {
        auto fwd = model_forward_train(strong, weak, params, cfg);
        return total_loss(fwd.e_m, fwd.e_t, fwd.logits, target, wm).total;
      };
      for (const auto& name :
           {"theta.stage0.local.w", "theta.stage1.dw.w",
            "theta.stage3.mix.w", "xi.bottleneck.conv1.w", "xi.head.clg.w",
            "xi.head.out.w", "xi.gcf.stage2.w", "xi.gcf.query.w",
            "tau.fc1.w", "tau.fc2.b", "theta.stage2.mix_ln.gamma"}) {
        // Small step: the full model stacks four max pools, so a larger
        // perturbation can cross an argmax boundary between the +/- probes.
        check(std::string("model/") + name,
              grad_check(f, params.at(name), 4, rng, 1e-5));
      }
    }
  }

  const double secs = seconds_since(t0);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst %.2e (%s), %.1fs", worst,
                worst_op.c_str(), secs);
  report(3, "finite-difference gradients", worst < 1e-3 && secs < 300.0,
         buf);
}

void criterion_4_serp() {
  bool ok = true;
  Tensor<double> e = Tensor<double>::from({3}, {0.3, -1.2, 2.0});
  ok &= std::abs(serp_loss(e, e).item()) < 1e-6;

  Tensor<double> a = Tensor<double>::from({2}, {1.0, 0.0});
  Tensor<double> b = Tensor<double>::from({2}, {0.0, -2.0});
  ok &= std::abs(serp_loss(a, b).item() - 1.0) < 1e-6;

  Tensor<double> ne = Tensor<double>::from({3}, {-0.3, 1.2, -2.0});
  ok &= std::abs(serp_loss(e, ne).item() - 2.0) < 1e-6;

  std::mt19937_64 rng(11);
  Tensor<double> u({16}), v({16});
  fill_uniform(u, rng);
  fill_uniform(v, rng);
  const double base = serp_loss(u, v).item();
  for (double c : {0.5, 3.0, 10.0}) {
    Tensor<double> cu(u.shape());
    for (int i = 0; i < 16; ++i) cu.data()[i] = c * u.data()[i];
    ok &= std::abs(serp_loss(cu, v).item() - base) < 1e-6;
    Tensor<double> cv(v.shape());
    for (int i = 0; i < 16; ++i) cv.data()[i] = c * v.data()[i];
    ok &= std::abs(serp_loss(u, cv).item() - base) < 1e-6;
  }

  for (int trial = 0; trial < 1000; ++trial) {
    Tensor<double> x({24}), y({24});
    fill_uniform(x, rng, -3.0, 3.0);
    fill_uniform(y, rng, -3.0, 3.0);
    const double l = serp_loss(x, y).item();
    ok &= l >= 0.0 && l <= 2.0;
  }
  report(4, "serp loss properties", ok);
}

void criterion_5_ema() {
  bool ok = true;
  for (double alpha : {0.0, 0.5, 0.99, 1.0}) {
    ModelParams<double> p;
    std::mt19937_64 rng(13);
    p.named["theta.w"] = Tensor<double>({32}, 0.0, true);
    p.named["phi.w"] = Tensor<double>({32});
    fill_uniform(p.at("theta.w"), rng);
    fill_uniform(p.at("phi.w"), rng);
    const auto phi_old = p.at("phi.w").vec();
    const auto theta = p.at("theta.w").vec();
    ema_update(p, alpha);
    for (int i = 0; i < 32; ++i)
      ok &= p.at("phi.w").data()[i] ==
            alpha * phi_old[i] + (1.0 - alpha) * theta[i];
  }

  // Geometric convergence with constant theta.
  ModelParams<double> p;
  p.named["theta.w"] = Tensor<double>({1}, -2.0, true);
  p.named["phi.w"] = Tensor<double>({1}, 5.0);
  const double alpha = 0.99, d0 = std::abs(5.0 - (-2.0));
  for (int n = 1; n <= 100; ++n) {
    ema_update(p, alpha);
    const double want = std::pow(alpha, n) * d0;
    ok &= std::abs(std::abs(p.at("phi.w").item() + 2.0) - want) < 1e-12;
  }
  report(5, "ema exactness + convergence", ok);
}

void criterion_6_shapes() {
  ModelConfig cfg;  // defaults: C=16, 256x256
  auto params = init_model<float>(cfg, 17);
  std::mt19937_64 rng(18);
  Tensor<float> img({1, 3, 256, 256});
  fill_uniform(img, rng, 0.0f, 1.0f);

  bool ok = true;
  auto ext = feature_extractor_forward(img, params, "theta", cfg);
  ok &= ext.f.shape() == std::vector<int>{1, 8 * cfg.base_channels, 16, 16};

  auto probs = model_forward_infer(img, params, cfg);
  ok &= probs.shape() == std::vector<int>{1, 1, 256, 256};
  for (int64_t i = 0; i < probs.size() && ok; ++i)
    ok &= probs.data()[i] >= 0.0f && probs.data()[i] <= 1.0f;

  Tape<float> tape;
  auto fwd = model_forward_train(img, img, params, cfg);
  ok &= fwd.e_m.shape() == std::vector<int>{1, 8 * cfg.base_channels};
  ok &= fwd.e_t.shape() == std::vector<int>{1, 8 * cfg.base_channels};
  report(6, "shape contract at 256x256", ok);
}

void criterion_7_params() {
  ModelConfig cfg;
  auto params = init_model<float>(cfg, 19);
  const int64_t infer = param_count(params, ParamScope::kInfer);
  const int64_t train = param_count(params, ParamScope::kTrain);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "infer %lld (target 0.71M), train %lld",
                (long long)infer, (long long)train);
  report(7, "parameter budget",
         infer >= 600000 && infer <= 800000 && train > infer, buf);
}

void criterion_8_dsc_iou() {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> pick(0, 100000);
  bool ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    ConfusionCounts c;
    c.tp = pick(rng);
    c.fp = pick(rng);
    c.fn = pick(rng);
    if (c.tp + c.fp + c.fn == 0) c.tp = 1;
    c.eps = 0.0;
    auto m = metrics_from_counts(c);
    ok &= std::abs(m.dsc - 2.0 * m.iou / (1.0 + m.iou)) < 1e-9;
  }
  report(8, "dsc-iou identity", ok);
}

void criterion_9_ttest() {
  auto r = paired_t_test({2, 4, 6}, {1, 2, 3});
  const bool t_ok = std::abs(r.t - 3.4641) < 1e-3;
  const bool p_ok = std::abs(r.p - 0.0742) < 1e-3;
  auto same = paired_t_test({0.1, 0.2, 0.3, 0.4}, {0.1, 0.2, 0.3, 0.4});
  char buf[64];
  std::snprintf(buf, sizeof(buf), "t=%.4f p=%.4f", r.t, r.p);
  report(9, "paired t-test oracle", t_ok && p_ok && same.p == 1.0, buf);
}

void criterion_10_checkpoint() {
  ModelConfig cfg;
  cfg.base_channels = 4;
  cfg.image_size = 32;
  auto params = init_model<float>(cfg, 23);
  const auto dir = fs::temp_directory_path() / "litenext_accept_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto path = dir / "m.ckpt";
  save_checkpoint(params, path.string());

  bool ok = true;
  auto loaded = load_checkpoint(path.string());
  ok &= loaded.named.size() == params.named.size();
  for (const auto& [name, t] : params.named)
    ok &= loaded.at(name).vec() == t.vec();

  std::ifstream in(path, std::ios::binary);
  std::string good((std::istreambuf_iterator<char>(in)), {});
  in.close();
  std::mt19937_64 rng(24);
  std::uniform_int_distribution<size_t> pos(0, good.size() - 1);
  std::uniform_int_distribution<int> bit(0, 7);
  int detected = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::string bad = good;
    bad[pos(rng)] ^= (char)(1 << bit(rng));
    std::ofstream out(path, std::ios::binary);
    out.write(bad.data(), (std::streamsize)bad.size());
    out.close();
    try {
      load_checkpoint(path.string());
    } catch (const CheckpointError&) {
      ++detected;
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "corruption detected %d/50", detected);
  report(10, "checkpoint round trip + crc", ok && detected == 50, buf);
}

// --- end-to-end training (criteria 11 and 12) -----------------------------

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(LITENEXT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct HistoryRow {
  int epoch;
  double lr, total, serp, mwl, dice, dsc, iou;
};

std::vector<HistoryRow> read_history(const fs::path& p) {
  std::ifstream in(p);
  std::vector<HistoryRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    HistoryRow r;
    std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.epoch,
                &r.lr, &r.total, &r.serp, &r.mwl, &r.dice, &r.dsc, &r.iou);
    rows.push_back(r);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

void criteria_11_12_end_to_end() {
  const auto base = fs::temp_directory_path() / "litenext_accept_e2e";
  fs::remove_all(base);
  fs::create_directories(base);

  const auto t0 = clk::now();
  bool ok = run_cli("synth --n 200 --size 64 --seed 42 --out " +
                    (base / "data").string()) == 0;

  std::ofstream cfg(base / "run.cfg");
  cfg << "image_size=64\nepochs=50\nbatch_size=16\nseed=42\n";
  cfg.close();

  const std::string train = "train --data " + (base / "data").string() +
                            " --config " + (base / "run.cfg").string();
  ok = ok && run_cli(train + " --out " + (base / "run").string()) == 0;

  double best_dsc = 0.0;
  bool finite = true, lr_monotone = true;
  std::vector<HistoryRow> rows;
  if (ok) {
    rows = read_history(base / "run" / "history.csv");
    ok = rows.size() == 50;
    for (size_t i = 0; i < rows.size(); ++i) {
      best_dsc = std::max(best_dsc, rows[i].dsc);
      finite = finite && std::isfinite(rows[i].total) &&
               std::isfinite(rows[i].serp) && std::isfinite(rows[i].mwl) &&
               std::isfinite(rows[i].dice);
      if (i > 0) lr_monotone = lr_monotone && rows[i].lr <= rows[i - 1].lr;
    }
  }

  const double secs = seconds_since(t0);  // budget: synth + the 50-epoch run

  // Bitwise reproducibility from resolved.cfg alone (checked in addition to
  // the timed run, per the runtime budget's wording).
  bool repro = false;
  if (ok) {
    repro = run_cli("train --data " + (base / "data").string() +
                    " --config " + (base / "run" / "resolved.cfg").string() +
                    " --out " + (base / "rerun").string()) == 0 &&
            slurp(base / "run" / "history.csv") ==
                slurp(base / "rerun" / "history.csv");
  }

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "best val_dsc %.4f, finite %d, lr monotone %d, repro %d, "
                "%.0fs",
                best_dsc, (int)finite, (int)lr_monotone, (int)repro, secs);
  report(11, "end-to-end desk-scale training",
         ok && best_dsc >= 0.90 && finite && lr_monotone && repro &&
             secs < 1200.0,
         buf);

  // Criterion 12: same seed/data without SeRP.
  bool ok12 = run_cli(train + " --no-serp --out " +
                      (base / "noserp").string()) == 0;
  double noserp_best = 0.0;
  bool serp_zero = true;
  if (ok12) {
    auto nrows = read_history(base / "noserp" / "history.csv");
    ok12 = nrows.size() == 50;
    for (const auto& r : nrows) {
      serp_zero = serp_zero && r.serp == 0.0;
      noserp_best = std::max(noserp_best, r.dsc);
    }
  }
  std::snprintf(buf, sizeof(buf),
                "w/o-serp best val_dsc %.4f (w-serp %.4f), serp column zero "
                "%d",
                noserp_best, best_dsc, (int)serp_zero);
  report(12, "serp ablation sanity", ok12 && serp_zero, buf);
}

}  // namespace

int main() {
  const auto corpus = make_corpus();
  criterion_1_morphology(corpus);
  criterion_2_partition(corpus);
  criterion_3_gradients();
  criterion_4_serp();
  criterion_5_ema();
  criterion_6_shapes();
  criterion_7_params();
  criterion_8_dsc_iou();
  criterion_9_ttest();
  criterion_10_checkpoint();
  if (!std::getenv("ACCEPT_SKIP_E2E")) criteria_11_12_end_to_end();

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
