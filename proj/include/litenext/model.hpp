#pragma once

// The LiteNeXt network: LGEMixer feature extractors (main theta, target
// phi), residual bottleneck, GCF stage attention, head prediction, and the
// two projector heads. Training graph uses both branches; the inference
// graph uses only theta + xi.

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "litenext/ops.hpp"

namespace litenext {

struct ModelConfig {
  int base_channels = 16;  // calibrated so the inference graph lands near
                           // the 0.71M parameter target
  int input_channels = 3;
  int dw_kernel = 7;
  int local_kernel = 3;
  int gcf_dim = 0;  // 0 -> 8 * base_channels
  int image_size = 256;

  int stages() const { return 4; }
  int stage_in(int i) const {
    return i == 0 ? input_channels : base_channels << (i - 1);
  }
  int stage_out(int i) const { return base_channels << i; }
  int feat_channels() const { return base_channels * 8; }
  int context_dim() const { return gcf_dim > 0 ? gcf_dim : feat_channels(); }

  void validate() const {
    if (image_size % 16 != 0)
      throw ShapeError("ModelConfig: image_size must be a multiple of 16");
    if (base_channels < 1) throw ShapeError("ModelConfig: base_channels < 1");
    if (dw_kernel % 2 == 0) throw ShapeError("ModelConfig: dw_kernel even");
  }
};

template <typename T>
struct ModelParams {
  std::map<std::string, Tensor<T>> named;

  Tensor<T>& at(const std::string& name) {
    auto it = named.find(name);
    if (it == named.end())
      throw std::runtime_error("ModelParams: unknown parameter " + name);
    return it->second;
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = named.find(name);
    if (it == named.end())
      throw std::runtime_error("ModelParams: unknown parameter " + name);
    return it->second;
  }
};

enum class ParamScope { kTrain, kInfer };

namespace detail {

inline bool in_infer_scope(const std::string& name) {
  return name.rfind("phi.", 0) != 0 && name.rfind("tau.", 0) != 0;
}

template <typename T>
Tensor<T> he_init(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape), T(0), true);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = T(dist(rng));
  return t;
}

template <typename T>
void add_conv(ModelParams<T>& p, const std::string& name, int cout, int cin,
              int k, std::mt19937_64& rng) {
  p.named[name + ".w"] = he_init<T>({cout, cin, k, k}, cin * k * k, rng);
  p.named[name + ".b"] = Tensor<T>({cout}, T(0), true);
}

template <typename T>
void add_ln(ModelParams<T>& p, const std::string& name, int c) {
  p.named[name + ".gamma"] = Tensor<T>({c}, T(1), true);
  p.named[name + ".beta"] = Tensor<T>({c}, T(0), true);
}

}  // namespace detail

template <typename T>
ModelParams<T> init_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ModelParams<T> p;
  std::mt19937_64 rng(seed);
  const int D = cfg.context_dim(), F = cfg.feat_channels();

  // theta: four LGEMixer stages.
  for (int i = 0; i < cfg.stages(); ++i) {
    const int cin = cfg.stage_in(i), cout = cfg.stage_out(i);
    const std::string s = "theta.stage" + std::to_string(i);
    detail::add_conv(p, s + ".local", cin, cin, cfg.local_kernel, rng);
    detail::add_ln(p, s + ".local_ln", cin);
    p.named[s + ".dw.w"] =
        detail::he_init<T>({cin, 1, cfg.dw_kernel, cfg.dw_kernel},
                           cfg.dw_kernel * cfg.dw_kernel, rng);
    p.named[s + ".dw.b"] = Tensor<T>({cin}, T(0), true);
    detail::add_ln(p, s + ".dw_ln", cin);
    detail::add_conv(p, s + ".mix", cout, cin, 1, rng);
    detail::add_ln(p, s + ".mix_ln", cout);
  }

  // xi: bottleneck RB, GCF projections, head prediction.
  detail::add_conv(p, "xi.bottleneck.conv1", F, F, 3, rng);
  detail::add_ln(p, "xi.bottleneck.ln1", F);
  detail::add_conv(p, "xi.bottleneck.conv2", F, F, 3, rng);
  detail::add_ln(p, "xi.bottleneck.ln2", F);
  for (int i = 0; i < cfg.stages(); ++i)
    detail::add_conv(p, "xi.gcf.stage" + std::to_string(i), D,
                     cfg.stage_out(i), 1, rng);
  detail::add_conv(p, "xi.gcf.query", D, F, 1, rng);
  detail::add_conv(p, "xi.head.clg", F, F + D, 3, rng);
  detail::add_ln(p, "xi.head.clg_ln", F);
  detail::add_conv(p, "xi.head.out", 1, F, 1, rng);

  // tau: projector-S squeeze-and-excitation MLP, reduction ratio 4.
  const int R = std::max(1, F / 4);
  p.named["tau.fc1.w"] = detail::he_init<T>({R, F}, F, rng);
  p.named["tau.fc1.b"] = Tensor<T>({R}, T(0), true);
  p.named["tau.fc2.w"] = detail::he_init<T>({F, R}, R, rng);
  p.named["tau.fc2.b"] = Tensor<T>({F}, T(0), true);

  // phi <- theta (EMA target starts as an exact copy; never optimized).
  std::vector<std::pair<std::string, Tensor<T>>> phi;
  for (const auto& [name, t] : p.named) {
    if (name.rfind("theta.", 0) != 0) continue;
    Tensor<T> c(t.shape());
    std::copy(t.data(), t.data() + t.size(), c.data());
    phi.emplace_back("phi." + name.substr(6), c);
  }
  for (auto& [n, t] : phi) p.named[n] = t;
  return p;
}

template <typename T>
int64_t param_count(const ModelParams<T>& params, ParamScope scope) {
  int64_t n = 0;
  for (const auto& [name, t] : params.named)
    if (scope == ParamScope::kTrain || detail::in_infer_scope(name))
      n += t.size();
  return n;
}

// x1 = GELU(LN(Conv3x3(x))); x2 = GELU(LN(DWConv(x1))) + x1;
// x3 = GELU(LN(Conv1x1(x2 + x))); y = MaxPool2x2(x3).
template <typename T>
Tensor<T> lgemixer_forward(const Tensor<T>& x, const ModelParams<T>& p,
                           const std::string& prefix,
                           const ModelConfig& cfg) {
  const auto& P = p;
  auto x1 = gelu(layer_norm_channels(
      conv2d(x, P.at(prefix + ".local.w"), P.at(prefix + ".local.b"), 1,
             (cfg.local_kernel - 1) / 2),
      P.at(prefix + ".local_ln.gamma"), P.at(prefix + ".local_ln.beta")));
  auto x2 = add(gelu(layer_norm_channels(
                    depthwise_conv2d(x1, P.at(prefix + ".dw.w"),
                                     P.at(prefix + ".dw.b"),
                                     (cfg.dw_kernel - 1) / 2),
                    P.at(prefix + ".dw_ln.gamma"),
                    P.at(prefix + ".dw_ln.beta"))),
                x1);
  auto x3 = gelu(layer_norm_channels(
      conv2d(add(x2, x), P.at(prefix + ".mix.w"), P.at(prefix + ".mix.b")),
      P.at(prefix + ".mix_ln.gamma"), P.at(prefix + ".mix_ln.beta")));
  return maxpool2x2(x3);
}

template <typename T>
struct ExtractorOutput {
  Tensor<T> f;                     // final 8C x H/16 x W/16 map
  std::array<Tensor<T>, 4> skips;  // per-stage outputs
};

template <typename T>
ExtractorOutput<T> feature_extractor_forward(const Tensor<T>& image,
                                             const ModelParams<T>& p,
                                             const std::string& branch,
                                             const ModelConfig& cfg) {
  if (image.dim(2) % 16 != 0 || image.dim(3) % 16 != 0)
    throw ShapeError("feature_extractor: spatial dims must be multiples of 16");
  ExtractorOutput<T> out;
  Tensor<T> x = image;
  for (int i = 0; i < cfg.stages(); ++i) {
    x = lgemixer_forward(x, p, branch + ".stage" + std::to_string(i), cfg);
    out.skips[i] = x;
  }
  out.f = x;
  return out;
}

// Residual block: Conv3x3 -> LN -> GELU -> Conv3x3 -> LN, skip, GELU.
template <typename T>
Tensor<T> bottleneck_forward(const Tensor<T>& f, const ModelParams<T>& p) {
  auto h = gelu(layer_norm_channels(
      conv2d(f, p.at("xi.bottleneck.conv1.w"), p.at("xi.bottleneck.conv1.b"),
             1, 1),
      p.at("xi.bottleneck.ln1.gamma"), p.at("xi.bottleneck.ln1.beta")));
  auto t = layer_norm_channels(
      conv2d(h, p.at("xi.bottleneck.conv2.w"), p.at("xi.bottleneck.conv2.b"),
             1, 1),
      p.at("xi.bottleneck.ln2.gamma"), p.at("xi.bottleneck.ln2.beta"));
  return gelu(add(t, f));
}

namespace detail {

// Concatenate S column vectors [B,1] into [B,S].
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& cols) {
  const int B = cols[0].dim(0), S = (int)cols.size();
  Tensor<T> y({B, S});
  for (int b = 0; b < B; ++b)
    for (int s = 0; s < S; ++s) y.data()[(int64_t)b * S + s] = cols[s].data()[b];
  bool any = false;
  for (const auto& c : cols) any = any || c.requires_grad();
  if (grad_enabled<T>() && any) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      for (int s = 0; s < S; ++s) {
        if (!cols[s].requires_grad()) continue;
        cols[s].ensure_grad();
        for (int b = 0; b < B; ++b)
          cols[s].grad()[b] += y.grad()[(int64_t)b * S + s];
      }
    });
  }
  return y;
}

}  // namespace detail

template <typename T>
struct GcfOutput {
  Tensor<T> context;  // [B, D, h, w]
  Tensor<T> alpha;    // [B, 4] stage attention weights
};

// Lightweight 4-way stage attention: values are 1x1 projections resized to
// the bottleneck resolution, keys their global averages, query the global
// average of the projected bottleneck; softmax over scaled dot products.
template <typename T>
GcfOutput<T> gcf_forward(const std::array<Tensor<T>, 4>& skips,
                         const Tensor<T>& f_bottleneck,
                         const ModelParams<T>& p, const ModelConfig& cfg) {
  const int h = f_bottleneck.dim(2), w = f_bottleneck.dim(3);
  const int D = cfg.context_dim();
  std::vector<Tensor<T>> values, keys;
  for (int i = 0; i < cfg.stages(); ++i) {
    const std::string s = "xi.gcf.stage" + std::to_string(i);
    auto proj = conv2d(skips[i], p.at(s + ".w"), p.at(s + ".b"));
    keys.push_back(global_avg_pool(proj));
    values.push_back(resize_bilinear(proj, h, w));
  }
  auto q = global_avg_pool(
      conv2d(f_bottleneck, p.at("xi.gcf.query.w"), p.at("xi.gcf.query.b")));
  std::vector<Tensor<T>> scores;
  const T inv_sqrt_d = T(1) / std::sqrt(T(D));
  for (int i = 0; i < cfg.stages(); ++i)
    scores.push_back(scale(rowwise_dot(q, keys[i]), inv_sqrt_d));
  GcfOutput<T> out;
  out.alpha = softmax_vec(detail::concat_cols(scores));
  out.context = stage_mix(out.alpha, values);
  return out;
}

// Concat(context, bottleneck) -> CLG (Conv3x3+LN+GELU) -> 1x1 conv ->
// bilinear upsample to (out_h, out_w). Returns logits.
template <typename T>
Tensor<T> head_prediction_forward(const Tensor<T>& context,
                                  const Tensor<T>& f_bottleneck,
                                  const ModelParams<T>& p, int out_h,
                                  int out_w) {
  auto cat = concat_channels(context, f_bottleneck);
  auto h = gelu(layer_norm_channels(
      conv2d(cat, p.at("xi.head.clg.w"), p.at("xi.head.clg.b"), 1, 1),
      p.at("xi.head.clg_ln.gamma"), p.at("xi.head.clg_ln.beta")));
  auto logits = conv2d(h, p.at("xi.head.out.w"), p.at("xi.head.out.b"));
  return upsample_bilinear(logits, out_h, out_w);
}

// e_t = GAP(f_t) + GMP(f_t); parameter-free.
template <typename T>
Tensor<T> projector_t(const Tensor<T>& f_t) {
  return add(global_avg_pool(f_t), global_max_pool(f_t));
}

// v = GAP(f_m) + GMP(f_m); e_m = FC(GELU(FC(v))).
template <typename T>
Tensor<T> projector_s(const Tensor<T>& f_m, const ModelParams<T>& p) {
  auto v = add(global_avg_pool(f_m), global_max_pool(f_m));
  return linear(gelu(linear(v, p.at("tau.fc1.w"), p.at("tau.fc1.b"))),
                p.at("tau.fc2.w"), p.at("tau.fc2.b"));
}

template <typename T>
struct TrainForward {
  Tensor<T> logits;  // [B,1,H,W]
  Tensor<T> e_m;     // [B,8C]
  Tensor<T> e_t;     // [B,8C], no gradient participation
};

template <typename T>
TrainForward<T> model_forward_train(const Tensor<T>& strong_view,
                                    const Tensor<T>& weak_view,
                                    const ModelParams<T>& p,
                                    const ModelConfig& cfg) {
  if (strong_view.shape() != weak_view.shape())
    throw ShapeError("model_forward_train: view shapes differ");
  TrainForward<T> out;
  auto main = feature_extractor_forward(strong_view, p, "theta", cfg);
  out.e_m = projector_s(main.f, p);
  {
    // Target branch provides constants only; no gradients through phi.
    NoGrad ng;
    auto target = feature_extractor_forward(weak_view, p, "phi", cfg);
    out.e_t = projector_t(target.f);
  }
  auto fb = bottleneck_forward(main.f, p);
  auto gcf = gcf_forward(main.skips, fb, p, cfg);
  out.logits = head_prediction_forward(gcf.context, fb, p, strong_view.dim(2),
                                       strong_view.dim(3));
  return out;
}

template <typename T>
Tensor<T> model_forward_infer(const Tensor<T>& image, const ModelParams<T>& p,
                              const ModelConfig& cfg) {
  NoGrad ng;
  auto main = feature_extractor_forward(image, p, "theta", cfg);
  auto fb = bottleneck_forward(main.f, p);
  auto gcf = gcf_forward(main.skips, fb, p, cfg);
  auto logits = head_prediction_forward(gcf.context, fb, p, image.dim(2),
                                        image.dim(3));
  return sigmoid(logits);
}

}  // namespace litenext
