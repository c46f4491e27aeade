#pragma once

// Dual-branch training loop: strong/weak augmented views, combined loss,
// NAdam on the main branch + projector, EMA target update, plateau lr
// schedule, and per-epoch validation with best-checkpoint tracking.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "litenext/augment.hpp"
#include "litenext/data_io.hpp"
#include "litenext/losses.hpp"
#include "litenext/metrics.hpp"
#include "litenext/model.hpp"
#include "litenext/optimizer.hpp"

namespace litenext {

enum class LossMode { kMwl, kBaseline };

struct TrainerConfig {
  int epochs = 300;
  double lr = 1e-4;
  double ema_alpha = 0.99;
  double weight_decay = 1e-5;
  int patience = 30;
  double factor = 0.75;
  int batch_size = 0;  // 0 -> 16 at image_size <= 64, else 8
  uint64_t seed = 0;
  double val_fraction = 0.2;
  bool serp_enabled = true;
  LossMode loss_mode = LossMode::kMwl;
  BaselineKind baseline = BaselineKind::kBce;
  MwlConfig mwl;
  LossConfig loss;

  int resolved_batch_size(int image_size) const {
    if (batch_size > 0) return batch_size;
    return image_size <= 64 ? 16 : 8;
  }
};

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double loss_total = 0, loss_serp = 0, loss_mwl = 0, loss_dice = 0;
  double val_dsc = 0, val_iou = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  double best_val_dsc = 0;
  int best_epoch = -1;
};

namespace detail {

inline uint64_t mix64(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Tensor<float> stack_images(const std::vector<std::vector<float>>& imgs,
                                  int channels, int size) {
  const int B = (int)imgs.size();
  Tensor<float> t({B, channels, size, size});
  for (int b = 0; b < B; ++b)
    std::copy(imgs[b].begin(), imgs[b].end(),
              t.data() + (int64_t)b * channels * size * size);
  return t;
}

}  // namespace detail

// Main-branch inference graph with gradients, used when SeRP is disabled.
template <typename T>
Tensor<T> model_forward_logits(const Tensor<T>& image,
                               const ModelParams<T>& p,
                               const ModelConfig& cfg) {
  auto main = feature_extractor_forward(image, p, "theta", cfg);
  auto fb = bottleneck_forward(main.f, p);
  auto gcf = gcf_forward(main.skips, fb, p, cfg);
  return head_prediction_forward(gcf.context, fb, p, image.dim(2),
                                 image.dim(3));
}

struct StepStats {
  double total = 0, serp = 0, mwl = 0, dice = 0;
};

// One optimization step over a prepared batch. `strong`/`weak` are
// [B,3,H,W]; `masks` is [B,1,H,W] binary, aligned with `strong`.
inline StepStats train_step(const Tensor<float>& strong,
                            const Tensor<float>& weak,
                            const Tensor<float>& masks,
                            ModelParams<float>& params,
                            NadamOptimizer<float>& opt,
                            const ModelConfig& mcfg,
                            const TrainerConfig& tcfg) {
  for (auto& [name, p] : params.named) p.zero_grad();
  Tape<float> tape;

  Tensor<float> total, serp_term, mwl_term, dice_term;
  Tensor<float> logits;
  if (tcfg.serp_enabled) {
    auto fwd = model_forward_train(strong, weak, params, mcfg);
    logits = fwd.logits;
    serp_term = serp_loss(fwd.e_m, fwd.e_t, (float)tcfg.loss.serp_eps);
  } else {
    logits = model_forward_logits(strong, params, mcfg);
    serp_term = Tensor<float>::scalar(0.0f);
  }
  auto probs = sigmoid(logits);
  if (tcfg.loss_mode == LossMode::kMwl) {
    auto wm = build_weight_mask(masks, tcfg.mwl);
    mwl_term = mwl_loss(probs, masks, wm);
  } else {
    mwl_term = baseline_loss(tcfg.baseline, probs, masks, tcfg.loss);
  }
  dice_term = dice_loss(probs, masks);
  total = add(add(serp_term, mwl_term), dice_term);
  backward(total);

  std::vector<std::pair<std::string, Tensor<float>>> opt_params;
  for (auto& [name, p] : params.named) {
    const bool trainable =
        name.rfind("theta.", 0) == 0 || name.rfind("xi.", 0) == 0 ||
        (tcfg.serp_enabled && name.rfind("tau.", 0) == 0);
    if (trainable) opt_params.emplace_back(name, p);
  }
  opt.step(opt_params);
  if (tcfg.serp_enabled) ema_update(params, tcfg.ema_alpha);

  StepStats s;
  s.total = total.item();
  s.serp = serp_term.item();
  s.mwl = mwl_term.item();
  s.dice = dice_term.item();
  return s;
}

struct ValStats {
  double dsc = 0, iou = 0;
  double loss = 0;  // mask loss + dice on un-augmented inputs
};

// Mean DSC/IoU and validation loss over a slice, via the inference graph.
inline ValStats validate(const std::vector<SampleRecord>& data,
                         const std::vector<int>& indices,
                         const ModelParams<float>& params,
                         const ModelConfig& mcfg, const TrainerConfig& tcfg) {
  ValStats out;
  for (int idx : indices) {
    const auto& rec = data[idx];
    Tensor<float> img({1, 3, rec.height, rec.width});
    std::copy(rec.image.begin(), rec.image.end(), img.data());
    auto probs = model_forward_infer(img, params, mcfg);
    std::vector<uint8_t> pv(rec.mask.size()), tv(rec.mask.size());
    for (size_t i = 0; i < pv.size(); ++i) {
      pv[i] = probs.data()[i] > 0.5f ? 1 : 0;
      tv[i] = rec.mask[i] > 0.5f ? 1 : 0;
    }
    const auto m = metrics_from_counts(confusion(pv, tv));
    out.dsc += m.dsc;
    out.iou += m.iou;

    Tensor<float> mask({1, 1, rec.height, rec.width});
    std::copy(rec.mask.begin(), rec.mask.end(), mask.data());
    Tensor<float> mask_term;
    if (tcfg.loss_mode == LossMode::kMwl) {
      auto wm = build_weight_mask(mask, tcfg.mwl);
      mask_term = mwl_loss(probs, mask, wm);
    } else {
      mask_term = baseline_loss(tcfg.baseline, probs, mask, tcfg.loss);
    }
    out.loss += mask_term.item() + dice_loss(probs, mask).item();
  }
  const double n = indices.empty() ? 1.0 : (double)indices.size();
  out.dsc /= n;
  out.iou /= n;
  out.loss /= n;
  return out;
}

// Full training loop. Writes history.csv, best.ckpt and final.ckpt under
// out_dir. The run is a pure function of (data, configs): shuffling and
// augmentation draw from counter-based per-(epoch, sample) streams.
inline TrainResult train_loop(const std::vector<SampleRecord>& data,
                              ModelParams<float>& params,
                              const ModelConfig& mcfg,
                              const TrainerConfig& tcfg,
                              const std::string& out_dir,
                              bool verbose = false) {
  namespace fs = std::filesystem;
  if (data.empty()) throw std::invalid_argument("train_loop: empty dataset");
  const int size = data[0].width;
  const int B = tcfg.resolved_batch_size(size);

  // Deterministic train/val split.
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  {
    std::mt19937_64 rng(detail::mix64(tcfg.seed, 0xda7a5e7));
    std::shuffle(order.begin(), order.end(), rng);
  }
  const int n_val =
      std::min((int)data.size() - 1,
               std::max(1, (int)std::lround(tcfg.val_fraction * data.size())));
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());

  fs::create_directories(out_dir);
  std::ofstream hist(fs::path(out_dir) / "history.csv");
  if (!hist)
    throw std::runtime_error("train_loop: cannot write history.csv in " +
                             out_dir);
  hist << "epoch,lr,loss_total,loss_serp,loss_mwl,loss_dice,val_dsc,val_iou\n";
  hist.precision(9);

  NadamOptimizer<float> opt(tcfg.lr, tcfg.weight_decay);
  PlateauScheduler sched(tcfg.lr, tcfg.patience, tcfg.factor);
  TrainResult result;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::vector<int> perm = train_idx;
    {
      std::mt19937_64 rng(detail::mix64(tcfg.seed, 1000003ULL + epoch));
      std::shuffle(perm.begin(), perm.end(), rng);
    }

    StepStats sum;
    int steps = 0;
    for (size_t start = 0; start < perm.size(); start += B) {
      const size_t stop = std::min(perm.size(), start + B);
      std::vector<std::vector<float>> strongs, weaks, msks;
      for (size_t j = start; j < stop; ++j) {
        const auto& rec = data[perm[j]];
        std::mt19937_64 rng(detail::mix64(
            tcfg.seed, 2000003ULL * (epoch + 1) + (uint64_t)perm[j]));
        auto pair = make_augmented_pair(rec, rng);
        strongs.push_back(std::move(pair.strong_image));
        weaks.push_back(std::move(pair.weak_image));
        msks.push_back(std::move(pair.mask));
      }
      auto s = detail::stack_images(strongs, 3, size);
      auto w = detail::stack_images(weaks, 3, size);
      auto m = detail::stack_images(msks, 1, size);
      const auto stats = train_step(s, w, m, params, opt, mcfg, tcfg);
      sum.total += stats.total;
      sum.serp += stats.serp;
      sum.mwl += stats.mwl;
      sum.dice += stats.dice;
      ++steps;
    }

    const ValStats val = validate(data, val_idx, params, mcfg, tcfg);

    EpochStats es;
    es.epoch = epoch;
    es.lr = opt.lr();
    es.loss_total = sum.total / std::max(1, steps);
    es.loss_serp = sum.serp / std::max(1, steps);
    es.loss_mwl = sum.mwl / std::max(1, steps);
    es.loss_dice = sum.dice / std::max(1, steps);
    es.val_dsc = val.dsc;
    es.val_iou = val.iou;
    result.history.push_back(es);
    hist << es.epoch << "," << es.lr << "," << es.loss_total << ","
         << es.loss_serp << "," << es.loss_mwl << "," << es.loss_dice << ","
         << es.val_dsc << "," << es.val_iou << "\n";
    hist.flush();
    if (verbose)
      std::printf("epoch %3d  lr %.3e  loss %.5f  val_dsc %.4f\n", epoch,
                  es.lr, es.loss_total, es.val_dsc);

    if (val.dsc > result.best_val_dsc || result.best_epoch < 0) {
      result.best_val_dsc = val.dsc;
      result.best_epoch = epoch;
      save_checkpoint(params, (fs::path(out_dir) / "best.ckpt").string());
    }
    opt.set_lr(sched.observe(val.loss));
  }

  save_checkpoint(params, (fs::path(out_dir) / "final.ckpt").string());
  return result;
}

}  // namespace litenext
