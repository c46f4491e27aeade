#pragma once

// Marginal Weight Loss (weight-mask construction + weighted BCE), soft
// Dice, the SeRP cosine loss, their sum, and the baseline losses used by
// the ablation toggles.

#include <cmath>
#include <sstream>
#include <string>

#include "litenext/ops.hpp"

namespace litenext {

struct MwlConfig {
  double w_b = 0.1;
  double w_o = 0.3;
  double w_m = 0.6;
  int k = 9;

  void validate() const {
    if (!(w_m > w_o && w_o > w_b))
      throw std::invalid_argument("MwlConfig: requires w_m > w_o > w_b");
    if (std::abs(w_m + w_o + w_b - 1.0) > 1e-9)
      throw std::invalid_argument("MwlConfig: weights must sum to 1");
    if (k < 1 || k % 2 == 0)
      throw std::invalid_argument("MwlConfig: k must be odd and >= 1");
  }
};

enum class BaselineKind { kBce, kWbce, kBbce, kFocal };

inline BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "bce") return BaselineKind::kBce;
  if (s == "wbce") return BaselineKind::kWbce;
  if (s == "bbce") return BaselineKind::kBbce;
  if (s == "focal") return BaselineKind::kFocal;
  throw std::invalid_argument("unknown baseline loss kind: " + s);
}

struct LossConfig {
  double serp_eps = 1e-8;
  BaselineKind baseline = BaselineKind::kBce;
  double wbce_beta = 2.0;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
};

namespace detail {

constexpr double kProbClamp = 1e-7;

template <typename T>
T clamp_prob(T p) {
  if (p < T(kProbClamp)) return T(kProbClamp);
  if (p > T(1) - T(kProbClamp)) return T(1) - T(kProbClamp);
  return p;
}

template <typename T>
bool prob_clamped(T p) {
  return p < T(kProbClamp) || p > T(1) - T(kProbClamp);
}

// Erosion/dilation realized as all-ones convolutions with zero padding
// followed by Floor(+1e-2) / Clip(0,1), as the weight-mask construction
// prescribes. Outputs are exactly binary.
template <typename T>
void morph_erode_dilate(const T* s, int H, int W, int k, T* s_e, T* s_d) {
  const int pad = (k - 1) / 2;
  const T ke = T(1) / T(k * k);
  const T kd = T(k * k);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      T acc_e = T(0), acc_d = T(0);
      for (int di = -pad; di <= pad; ++di) {
        const int ii = i + di;
        if (ii < 0 || ii >= H) continue;
        for (int dj = -pad; dj <= pad; ++dj) {
          const int jj = j + dj;
          if (jj < 0 || jj >= W) continue;
          const T v = s[ii * W + jj];
          acc_e += ke * v;
          acc_d += kd * v;
        }
      }
      s_e[i * W + j] = std::floor(acc_e + T(1e-2));
      s_d[i * W + j] = acc_d < T(0) ? T(0) : (acc_d > T(1) ? T(1) : acc_d);
    }
  }
}

}  // namespace detail

// Weight mask per Algorithm-1 style construction:
// w_m*(S_d - S_e) + w_o*S_e + w_b*(1 - S_d).
template <typename T>
Tensor<T> build_weight_mask(const Tensor<T>& mask, const MwlConfig& cfg) {
  cfg.validate();
  std::ostringstream bad;
  int bad_count = 0;
  for (int64_t i = 0; i < mask.size(); ++i) {
    const T v = mask.data()[i];
    if (v != T(0) && v != T(1)) {
      if (bad_count < 5) bad << (bad_count ? "," : "") << i;
      ++bad_count;
    }
  }
  if (bad_count > 0)
    throw std::invalid_argument(
        "build_weight_mask: mask not binary at flat indices [" + bad.str() +
        "] (" + std::to_string(bad_count) + " total)");

  const auto& sh = mask.shape();
  const int W = sh.back(), H = sh[sh.size() - 2];
  const int64_t planes = mask.size() / ((int64_t)H * W);
  Tensor<T> wm(mask.shape());
  std::vector<T> se((int64_t)H * W), sd((int64_t)H * W);
  for (int64_t p = 0; p < planes; ++p) {
    const T* s = mask.data() + p * H * W;
    detail::morph_erode_dilate(s, H, W, cfg.k, se.data(), sd.data());
    T* out = wm.data() + p * H * W;
    for (int64_t i = 0; i < (int64_t)H * W; ++i)
      out[i] = T(cfg.w_m) * (sd[i] - se[i]) + T(cfg.w_o) * se[i] +
               T(cfg.w_b) * (T(1) - sd[i]);
  }
  return wm;
}

// Weighted BCE, normalized by element count. Gradient flows into probs.
template <typename T>
Tensor<T> mwl_loss(const Tensor<T>& probs, const Tensor<T>& target,
                   const Tensor<T>& weight_mask) {
  if (probs.shape() != target.shape() || probs.shape() != weight_mask.shape())
    throw ShapeError("mwl_loss: shape mismatch");
  const int64_t n = probs.size();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) {
    const T p = detail::clamp_prob(probs.data()[i]);
    const T y = target.data()[i];
    acc -= weight_mask.data()[i] *
           (y * std::log(p) + (T(1) - y) * std::log(T(1) - p));
  }
  Tensor<T> loss = Tensor<T>::scalar(acc / T(n));
  if (grad_enabled<T>() && probs.requires_grad()) {
    loss.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!loss.has_grad()) return;
      probs.ensure_grad();
      const T g = loss.grad()[0] / T(n);
      for (int64_t i = 0; i < n; ++i) {
        const T raw = probs.data()[i];
        if (detail::prob_clamped(raw)) continue;
        const T y = target.data()[i];
        probs.grad()[i] += g * weight_mask.data()[i] *
                           ((T(1) - y) / (T(1) - raw) - y / raw);
      }
    });
  }
  return loss;
}

// Soft Dice with smoothing s=1, per-sample for rank-4 input (mean over the
// batch), whole-tensor otherwise.
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& probs, const Tensor<T>& target) {
  if (probs.shape() != target.shape())
    throw ShapeError("dice_loss: shape mismatch");
  const T smooth = T(1);
  const int B = probs.rank() == 4 ? probs.dim(0) : 1;
  const int64_t n = probs.size() / B;

  std::vector<T> inter(B), psum(B), tsum(B);
  T total = T(0);
  for (int b = 0; b < B; ++b) {
    T a = T(0), ps = T(0), ts = T(0);
    const T* p = probs.data() + (int64_t)b * n;
    const T* t = target.data() + (int64_t)b * n;
    for (int64_t i = 0; i < n; ++i) {
      a += p[i] * t[i];
      ps += p[i];
      ts += t[i];
    }
    inter[b] = a;
    psum[b] = ps;
    tsum[b] = ts;
    total += T(1) - (T(2) * a + smooth) / (ps + ts + smooth);
  }
  Tensor<T> loss = Tensor<T>::scalar(total / T(B));

  if (grad_enabled<T>() && probs.requires_grad()) {
    loss.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!loss.has_grad()) return;
      probs.ensure_grad();
      const T g = loss.grad()[0] / T(B);
      for (int b = 0; b < B; ++b) {
        const T denom = psum[b] + tsum[b] + smooth;
        const T num = T(2) * inter[b] + smooth;
        const T* t = target.data() + (int64_t)b * n;
        T* gp = probs.grad() + (int64_t)b * n;
        for (int64_t i = 0; i < n; ++i)
          gp[i] += g * (num / (denom * denom) - T(2) * t[i] / denom);
      }
    });
  }
  return loss;
}

// 1 - cosine(e_m, e_t), mean over the batch for [B,N] inputs. The target
// embedding is treated as a constant; gradient flows only into e_m.
template <typename T>
Tensor<T> serp_loss(const Tensor<T>& e_m, const Tensor<T>& e_t,
                    T eps = T(1e-8)) {
  if (e_m.shape() != e_t.shape())
    throw ShapeError("serp_loss: embedding length mismatch: " +
                     detail::shape_str(e_m.shape()) + " vs " +
                     detail::shape_str(e_t.shape()));
  const int B = e_m.rank() == 2 ? e_m.dim(0) : 1;
  const int64_t n = e_m.size() / B;

  auto norms = std::make_shared<std::vector<T>>(3 * B);
  T total = T(0);
  for (int b = 0; b < B; ++b) {
    const T* m = e_m.data() + (int64_t)b * n;
    const T* t = e_t.data() + (int64_t)b * n;
    T dot = T(0), nm = T(0), nt = T(0);
    for (int64_t i = 0; i < n; ++i) {
      dot += m[i] * t[i];
      nm += m[i] * m[i];
      nt += t[i] * t[i];
    }
    nm = std::sqrt(nm);
    nt = std::sqrt(nt);
    (*norms)[3 * b] = dot;
    (*norms)[3 * b + 1] = nm;
    (*norms)[3 * b + 2] = nt;
    total += T(1) - dot / std::max(nm * nt, eps);
  }
  Tensor<T> loss = Tensor<T>::scalar(total / T(B));

  if (grad_enabled<T>() && e_m.requires_grad()) {
    loss.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!loss.has_grad()) return;
      e_m.ensure_grad();
      const T g = loss.grad()[0] / T(B);
      for (int b = 0; b < B; ++b) {
        const T dot = (*norms)[3 * b], nm = (*norms)[3 * b + 1],
                nt = (*norms)[3 * b + 2];
        const T* m = e_m.data() + (int64_t)b * n;
        const T* t = e_t.data() + (int64_t)b * n;
        T* gm = e_m.grad() + (int64_t)b * n;
        const T denom = nm * nt;
        if (denom > eps) {
          for (int64_t i = 0; i < n; ++i)
            gm[i] += g * (-(t[i] / denom) + dot * m[i] / (nm * nm * denom));
        } else {
          for (int64_t i = 0; i < n; ++i) gm[i] += g * (-t[i] / eps);
        }
      }
    });
  }
  return loss;
}

template <typename T>
struct TotalLoss {
  Tensor<T> total;
  Tensor<T> serp;
  Tensor<T> mwl;
  Tensor<T> dice;
};

// L_total = L_serp + L_mwl + L_dice (unweighted sum), probs = sigmoid(logits).
template <typename T>
TotalLoss<T> total_loss(const Tensor<T>& e_m, const Tensor<T>& e_t,
                        const Tensor<T>& logits, const Tensor<T>& target,
                        const Tensor<T>& weight_mask,
                        const LossConfig& cfg = {}) {
  TotalLoss<T> out;
  auto probs = sigmoid(logits);
  out.serp = serp_loss(e_m, e_t, T(cfg.serp_eps));
  out.mwl = mwl_loss(probs, target, weight_mask);
  out.dice = dice_loss(probs, target);
  out.total = add(add(out.serp, out.mwl), out.dice);
  return out;
}

// Baseline losses for the ablation toggles (mean-normalized like mwl_loss).
template <typename T>
Tensor<T> baseline_loss(BaselineKind kind, const Tensor<T>& probs,
                        const Tensor<T>& target, const LossConfig& cfg = {}) {
  if (probs.shape() != target.shape())
    throw ShapeError("baseline_loss: shape mismatch");
  const int64_t n = probs.size();

  // Per-pixel positive/negative coefficients.
  T beta_pos = T(1), beta_neg = T(1);
  if (kind == BaselineKind::kWbce) {
    beta_pos = T(cfg.wbce_beta);
  } else if (kind == BaselineKind::kBbce) {
    int64_t pos = 0;
    for (int64_t i = 0; i < n; ++i)
      if (target.data()[i] > T(0.5)) ++pos;
    beta_pos = T(1) - T(pos) / T(n);
    beta_neg = T(1) - beta_pos;
  }
  const T gamma = T(cfg.focal_gamma), alpha = T(cfg.focal_alpha);
  const bool focal = kind == BaselineKind::kFocal;

  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) {
    const T p = detail::clamp_prob(probs.data()[i]);
    const T y = target.data()[i];
    if (focal) {
      const T pt = y > T(0.5) ? p : T(1) - p;
      acc -= alpha * std::pow(T(1) - pt, gamma) * std::log(pt);
    } else {
      acc -= beta_pos * y * std::log(p) +
             beta_neg * (T(1) - y) * std::log(T(1) - p);
    }
  }
  Tensor<T> loss = Tensor<T>::scalar(acc / T(n));

  if (grad_enabled<T>() && probs.requires_grad()) {
    loss.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!loss.has_grad()) return;
      probs.ensure_grad();
      const T g = loss.grad()[0] / T(n);
      for (int64_t i = 0; i < n; ++i) {
        const T raw = probs.data()[i];
        if (detail::prob_clamped(raw)) continue;
        const T y = target.data()[i];
        if (focal) {
          const T pt = y > T(0.5) ? raw : T(1) - raw;
          const T sign = y > T(0.5) ? T(1) : T(-1);
          T d;
          if (gamma == T(0)) {
            d = -alpha / pt;
          } else {
            d = alpha * (gamma * std::pow(T(1) - pt, gamma - T(1)) *
                             std::log(pt) -
                         std::pow(T(1) - pt, gamma) / pt);
          }
          probs.grad()[i] += g * sign * d;
        } else {
          probs.grad()[i] +=
              g * (beta_neg * (T(1) - y) / (T(1) - raw) - beta_pos * y / raw);
        }
      }
    });
  }
  return loss;
}

}  // namespace litenext
