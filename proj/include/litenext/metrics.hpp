#pragma once

// Per-sample segmentation metrics (DSC, IoU, precision, recall, F-score)
// and paired t-tests over per-sample score arrays.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace litenext {

struct ConfusionCounts {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double eps = 1e-7;
};

struct SampleMetrics {
  double dsc = 0, iou = 0, precision = 0, recall = 0;
};

struct TTestResult {
  double t = 0;
  int df = 0;
  double p = 1.0;  // two-tailed
};

struct MetricReport {
  std::vector<std::string> ids;
  std::vector<double> dsc, iou, precision, recall;
  double mean_dsc = 0, mean_iou = 0, mean_precision = 0, mean_recall = 0;
  // Harmonic mean of the mean precision and mean recall.
  double f_score = 0;
  // Optional paired-t p-values vs. a baseline report, keyed by metric name.
  std::map<std::string, TTestResult> p_values;

  void finalize();
};

ConfusionCounts confusion(const std::vector<uint8_t>& pred,
                          const std::vector<uint8_t>& truth);
SampleMetrics metrics_from_counts(const ConfusionCounts& c);
double f_score(double precision, double recall);
TTestResult paired_t_test(const std::vector<double>& scores_a,
                          const std::vector<double>& scores_b);

// Student-t two-tailed p-value via the regularized incomplete beta
// function (continued-fraction evaluation).
double student_t_two_tailed_p(double t, int df);

// Compare matching-stem grayscale PNGs in two directories.
MetricReport evaluate_folder(const std::string& pred_dir,
                             const std::string& truth_dir,
                             double threshold = 0.5);

void write_report_json(const MetricReport& r, const std::string& path);
void write_report_csv(const MetricReport& r, const std::string& path);
MetricReport read_report_json(const std::string& path);

}  // namespace litenext
