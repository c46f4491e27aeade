// litenext command-line tool: synthetic data generation, training,
// evaluation, and weight-mask inspection.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/validation error.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "litenext/config.hpp"
#include "litenext/data_io.hpp"
#include "litenext/image.hpp"
#include "litenext/losses.hpp"
#include "litenext/metrics.hpp"
#include "litenext/model.hpp"
#include "litenext/trainer.hpp"

namespace fs = std::filesystem;
using namespace litenext;

namespace {

int cmd_synth(int n, int size, double overlap, uint64_t seed,
              const std::string& out) {
  if (n <= 0 || size < 16 || size % 16 != 0 || overlap < 0 || overlap > 1) {
    std::fprintf(stderr,
                 "synth: need n > 0, size a positive multiple of 16, "
                 "overlap in [0,1]\n");
    return 2;
  }
  synth_generate(n, size, overlap, seed, out);
  std::printf("generated %d pairs at %dx%d\n", n, size, size);
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_dir, bool have_seed, uint64_t seed,
              bool no_serp, const std::string& loss) {
  RunConfig cfg;
  if (!config_path.empty()) cfg.load_file(config_path);
  // CLI flags override file values.
  if (have_seed) cfg.trainer.seed = seed;
  if (no_serp) cfg.trainer.serp_enabled = false;
  if (!loss.empty()) cfg.apply("loss", loss);
  cfg.model.validate();
  cfg.trainer.mwl.validate();

  fs::create_directories(out_dir);
  const std::vector<std::string> outputs = {"resolved.cfg", "history.csv",
                                            "best.ckpt", "final.ckpt"};
  try {
    cfg.write_file((fs::path(out_dir) / "resolved.cfg").string());
    auto data = load_dataset(data_dir, cfg.model.image_size);
    auto params = init_model<float>(cfg.model, cfg.trainer.seed);
    auto result =
        train_loop(data, params, cfg.model, cfg.trainer, out_dir, true);
    std::printf("best val_dsc %.4f at epoch %d\n", result.best_val_dsc,
                result.best_epoch);
    return 0;
  } catch (...) {
    for (const auto& f : outputs) {
      std::error_code ec;
      fs::remove(fs::path(out_dir) / f, ec);
    }
    throw;
  }
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& report_path, const std::string& baseline_path,
             int size) {
  auto params = load_checkpoint(ckpt_path);
  ModelConfig mcfg;
  // Recover the channel width from the stage-0 pointwise mix weights.
  mcfg.base_channels = params.at("theta.stage0.mix.w").dim(0);
  mcfg.image_size = size;
  mcfg.validate();

  auto data = load_dataset(data_dir, size);
  MetricReport report;
  for (const auto& rec : data) {
    Tensor<float> img({1, 3, rec.height, rec.width});
    std::copy(rec.image.begin(), rec.image.end(), img.data());
    auto probs = model_forward_infer(img, params, mcfg);
    std::vector<uint8_t> pv(rec.mask.size()), tv(rec.mask.size());
    for (size_t i = 0; i < pv.size(); ++i) {
      pv[i] = probs.data()[i] > 0.5f ? 1 : 0;
      tv[i] = rec.mask[i] > 0.5f ? 1 : 0;
    }
    const auto m = metrics_from_counts(confusion(pv, tv));
    report.ids.push_back(rec.id);
    report.dsc.push_back(m.dsc);
    report.iou.push_back(m.iou);
    report.precision.push_back(m.precision);
    report.recall.push_back(m.recall);
  }
  report.finalize();

  if (!baseline_path.empty()) {
    const MetricReport base = read_report_json(baseline_path);
    if (base.ids != report.ids)
      throw std::runtime_error(
          "eval: baseline report sample set does not match this dataset");
    report.p_values["dsc"] = paired_t_test(report.dsc, base.dsc);
    report.p_values["iou"] = paired_t_test(report.iou, base.iou);
    report.p_values["precision"] =
        paired_t_test(report.precision, base.precision);
    report.p_values["recall"] = paired_t_test(report.recall, base.recall);
  }

  fs::path json_path(report_path);
  fs::path csv_path = json_path;
  csv_path.replace_extension(".csv");
  if (json_path.extension() != ".json") json_path += ".json";
  write_report_json(report, json_path.string());
  write_report_csv(report, csv_path.string());
  std::printf("evaluated %zu samples: mean dsc %.4f iou %.4f\n",
              report.ids.size(), report.mean_dsc, report.mean_iou);
  return 0;
}

int cmd_weightmask(const std::string& mask_path, int k, double wm, double wo,
                   double wb, const std::string& out_path) {
  if (!(wm > wo && wo > wb) || std::abs(wm + wo + wb - 1.0) > 1e-6 ||
      k < 1 || k % 2 == 0) {
    std::fprintf(stderr,
                 "weightmask: need wm > wo > wb, wm+wo+wb == 1, odd k >= 1\n");
    return 2;
  }
  const Image img = read_png(mask_path);
  Tensor<float> mask({img.height, img.width});
  for (int64_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = img.pixels[i * img.channels] > 127.5f / 255.0f ? 1 : 0;

  MwlConfig cfg;
  cfg.w_m = wm;
  cfg.w_o = wo;
  cfg.w_b = wb;
  cfg.k = k;
  auto weight_mask = build_weight_mask(mask, cfg);
  export_weight_mask_image(weight_mask, out_path);

  int64_t n_margin = 0, n_object = 0, n_background = 0;
  for (int64_t i = 0; i < weight_mask.size(); ++i) {
    const float v = weight_mask.data()[i];
    if (v == (float)cfg.w_m)
      ++n_margin;
    else if (v == (float)cfg.w_o)
      ++n_object;
    else
      ++n_background;
  }
  std::printf("margin %lld object %lld background %lld\n",
              (long long)n_margin, (long long)n_object, (long long)n_background);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiteNeXt segmentation toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  int s_n = 0, s_size = 256;
  double s_overlap = 0.3;
  uint64_t s_seed = 0;
  std::string s_out;
  synth->add_option("--n", s_n, "number of image/mask pairs")->required();
  synth->add_option("--size", s_size, "image side (multiple of 16)");
  synth->add_option("--overlap", s_overlap, "fraction with touching blobs");
  synth->add_option("--seed", s_seed, "rng seed");
  synth->add_option("--out", s_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string t_data, t_config, t_out, t_loss;
  uint64_t t_seed = 0;
  bool t_no_serp = false;
  train->add_option("--data", t_data, "dataset directory")->required();
  train->add_option("--config", t_config, "key=value config file");
  train->add_option("--out", t_out, "output directory")->required();
  auto* seed_opt = train->add_option("--seed", t_seed, "rng seed");
  train->add_flag("--no-serp", t_no_serp, "disable the dual-branch loss");
  train->add_option("--loss", t_loss, "mask loss: mwl|bce|wbce|bbce|focal")
      ->check(CLI::IsMember({"mwl", "bce", "wbce", "bbce", "focal"}));

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_ckpt, e_data, e_report, e_baseline;
  int e_size = 256;
  eval->add_option("--checkpoint", e_ckpt, "model checkpoint")->required();
  eval->add_option("--data", e_data, "dataset directory")->required();
  eval->add_option("--report", e_report, "output report path (.json)")
      ->required();
  eval->add_option("--baseline-report", e_baseline,
                   "baseline report for paired t-tests");
  eval->add_option("--size", e_size, "evaluation image side");

  // weightmask
  auto* wmask = app.add_subcommand("weightmask", "export a weight mask");
  std::string w_mask, w_out;
  int w_k = 9;
  double w_wm = 0.6, w_wo = 0.3, w_wb = 0.1;
  wmask->add_option("--mask", w_mask, "binary mask PNG")->required();
  wmask->add_option("--k", w_k, "morphology kernel size (odd)");
  wmask->add_option("--wm", w_wm, "margin weight");
  wmask->add_option("--wo", w_wo, "object weight");
  wmask->add_option("--wb", w_wb, "background weight");
  wmask->add_option("--out", w_out, "output PNG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) ? 2 : 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return cmd_synth(s_n, s_size, s_overlap, s_seed, s_out);
    if (*train)
      return cmd_train(t_data, t_config, t_out, seed_opt->count() > 0, t_seed,
                       t_no_serp, t_loss);
    if (*eval) return cmd_eval(e_ckpt, e_data, e_report, e_baseline, e_size);
    if (*wmask) return cmd_weightmask(w_mask, w_k, w_wm, w_wo, w_wb, w_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
