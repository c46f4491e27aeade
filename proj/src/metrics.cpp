#include "litenext/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "litenext/image.hpp"

namespace litenext {

namespace fs = std::filesystem;

ConfusionCounts confusion(const std::vector<uint8_t>& pred,
                          const std::vector<uint8_t>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("confusion: size mismatch: " +
                                std::to_string(pred.size()) + " vs " +
                                std::to_string(truth.size()));
  ConfusionCounts c;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] > 1 || truth[i] > 1)
      throw std::invalid_argument("confusion: non-binary input at index " +
                                  std::to_string(i));
    if (pred[i] && truth[i])
      ++c.tp;
    else if (pred[i] && !truth[i])
      ++c.fp;
    else if (!pred[i] && truth[i])
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

SampleMetrics metrics_from_counts(const ConfusionCounts& c) {
  SampleMetrics m;
  const double tp = (double)c.tp, fp = (double)c.fp, fn = (double)c.fn;
  m.dsc = 2 * tp / (2 * tp + fp + fn + c.eps);
  m.iou = tp / (tp + fp + fn + c.eps);
  m.precision = tp / (tp + fp + c.eps);
  m.recall = tp / (tp + fn + c.eps);
  return m;
}

double f_score(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2 * precision * recall / (precision + recall);
}

namespace {

// Continued-fraction evaluation of the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lbeta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(lbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_two_tailed_p(double t, int df) {
  return betai(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(const std::vector<double>& scores_a,
                          const std::vector<double>& scores_b) {
  if (scores_a.size() != scores_b.size())
    throw std::invalid_argument("paired_t_test: length mismatch");
  const int n = (int)scores_a.size();
  if (n < 2) throw std::invalid_argument("paired_t_test: need n >= 2");

  double mean = 0;
  for (int i = 0; i < n; ++i) mean += scores_a[i] - scores_b[i];
  mean /= n;
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    const double d = scores_a[i] - scores_b[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (n - 1));

  TTestResult r;
  r.df = n - 1;
  if (sd == 0.0) {
    // All differences equal; identical arrays give p = 1 by convention.
    if (mean == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = mean > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
      r.p = std::numeric_limits<double>::min();
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt((double)n));
  r.p = student_t_two_tailed_p(r.t, r.df);
  return r;
}

void MetricReport::finalize() {
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
  };
  mean_dsc = mean(dsc);
  mean_iou = mean(iou);
  mean_precision = mean(precision);
  mean_recall = mean(recall);
  f_score = litenext::f_score(mean_precision, mean_recall);
}

MetricReport evaluate_folder(const std::string& pred_dir,
                             const std::string& truth_dir, double threshold) {
  std::map<std::string, fs::path> preds, truths;
  for (const auto& e : fs::directory_iterator(pred_dir))
    if (e.path().extension() == ".png") preds[e.path().stem()] = e.path();
  for (const auto& e : fs::directory_iterator(truth_dir))
    if (e.path().extension() == ".png") truths[e.path().stem()] = e.path();

  std::string unmatched;
  for (const auto& [stem, p] : preds)
    if (!truths.count(stem)) unmatched += " pred:" + stem;
  for (const auto& [stem, p] : truths)
    if (!preds.count(stem)) unmatched += " truth:" + stem;
  if (!unmatched.empty())
    throw std::runtime_error("evaluate_folder: unmatched files:" + unmatched);

  MetricReport report;
  for (const auto& [stem, ppath] : preds) {
    const Image pimg = read_png(ppath.string());
    const Image timg = read_png(truths.at(stem).string());
    if (pimg.width != timg.width || pimg.height != timg.height)
      throw std::runtime_error("evaluate_folder: size mismatch for " + stem);
    std::vector<uint8_t> pv((size_t)pimg.width * pimg.height),
        tv(pv.size());
    for (size_t i = 0; i < pv.size(); ++i) {
      pv[i] = pimg.pixels[i * pimg.channels] > threshold ? 1 : 0;
      tv[i] = timg.pixels[i * timg.channels] > 0.5f ? 1 : 0;
    }
    const auto m = metrics_from_counts(confusion(pv, tv));
    report.ids.push_back(stem);
    report.dsc.push_back(m.dsc);
    report.iou.push_back(m.iou);
    report.precision.push_back(m.precision);
    report.recall.push_back(m.recall);
  }
  report.finalize();
  return report;
}

void write_report_json(const MetricReport& r, const std::string& path) {
  nlohmann::json j;
  j["samples"] = nlohmann::json::array();
  for (size_t i = 0; i < r.ids.size(); ++i)
    j["samples"].push_back({{"id", r.ids[i]},
                            {"dsc", r.dsc[i]},
                            {"iou", r.iou[i]},
                            {"precision", r.precision[i]},
                            {"recall", r.recall[i]}});
  j["aggregate"] = {{"mean_dsc", r.mean_dsc},
                    {"mean_iou", r.mean_iou},
                    {"mean_precision", r.mean_precision},
                    {"mean_recall", r.mean_recall},
                    {"f_score", r.f_score}};
  if (!r.p_values.empty()) {
    for (const auto& [name, t] : r.p_values)
      j["p_values"][name] = {{"t", t.t}, {"df", t.df}, {"p", t.p}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_report_csv(const MetricReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "id,dsc,iou,precision,recall\n";
  out.precision(9);
  for (size_t i = 0; i < r.ids.size(); ++i)
    out << r.ids[i] << "," << r.dsc[i] << "," << r.iou[i] << ","
        << r.precision[i] << "," << r.recall[i] << "\n";
  out << "mean," << r.mean_dsc << "," << r.mean_iou << ","
      << r.mean_precision << "," << r.mean_recall << "\n";
}

MetricReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  MetricReport r;
  for (const auto& s : j.at("samples")) {
    r.ids.push_back(s.at("id").get<std::string>());
    r.dsc.push_back(s.at("dsc").get<double>());
    r.iou.push_back(s.at("iou").get<double>());
    r.precision.push_back(s.at("precision").get<double>());
    r.recall.push_back(s.at("recall").get<double>());
  }
  r.finalize();
  return r;
}

}  // namespace litenext
