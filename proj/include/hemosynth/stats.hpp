#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace hemosynth::stats {

// Scores are real-valued; labels and predictions are 0/1 integers.

/// Operating point: positive iff score >= threshold.
struct RocPoint {
  double threshold;
  double sensitivity;
  double specificity;
};

/// From the all-negative point (threshold +inf) to the all-positive point.
struct RocCurve {
  std::vector<RocPoint> points;
};

struct PrPoint {
  double threshold;
  double recall;
  double precision;
};

struct PrCurve {
  std::vector<PrPoint> points;
};

struct RocResult {
  RocCurve curve;
  double auroc = 0.0;
};

struct PrResult {
  PrCurve curve;
  double aupr = 0.0;
};

enum class CiMethod { BootstrapPercentile, Wilson };

struct MetricWithCI {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  CiMethod method = CiMethod::BootstrapPercentile;
  std::size_t redraws = 0;  ///< bootstrap resamples discarded as undefined
};

enum class TestMethod { DeLong, BootstrapAupr, McNemar, Wilcoxon };

std::string_view to_string(TestMethod m);

struct ComparisonResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::DeLong;
  std::size_t n = 0;
};

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct YoudenPoint {
  double threshold = 0.0;
  double j = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

double normal_cdf(double x);
/// Inverse standard normal CDF, p in (0, 1).
double normal_quantile(double p);

/// Trapezoidal AUROC over thresholds at each distinct score (ties get half credit).
RocResult roc_auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum over distinct thresholds of (recall step) x (precision there).
PrResult pr_aupr(std::span<const double> scores, std::span<const int> labels);

/// Best sensitivity among operating points with specificity >= target (no interpolation).
double sensitivity_at_specificity(const RocCurve& curve, double target = 0.8);
/// Best specificity among operating points with sensitivity >= target (no interpolation).
double specificity_at_sensitivity(const RocCurve& curve, double target = 0.8);

/// Metric evaluated on a resample, given as indices into the data units.
/// Returning nullopt marks the resample undefined; it is redrawn.
using ResampleMetric = std::function<std::optional<double>(std::span<const std::size_t>)>;

/// Percentile bootstrap. Each resample draws its own stream from (seed, resample, attempt).
/// Throws ErrorKind::UnstableMetric when more than half of all draws are undefined.
MetricWithCI bootstrap_ci(const ResampleMetric& metric, std::size_t units, std::size_t resamples = 1000,
                          double level = 0.95, std::uint64_t seed = 0);

MetricWithCI wilson_interval(std::size_t successes, std::size_t trials, double level = 0.95);

/// AUC computed from DeLong placement values.
double delong_auc(std::span<const double> scores, std::span<const int> labels);

ComparisonResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const int> labels);

/// Paired bootstrap of the AUPR difference; statistic is AUPR(a) - AUPR(b).
ComparisonResult bootstrap_compare_aupr(std::span<const double> scores_a, std::span<const double> scores_b,
                                        std::span<const int> labels, std::size_t resamples = 1000,
                                        std::uint64_t seed = 0);

/// Exact below 25 discordant pairs, continuity-corrected chi-square otherwise.
ComparisonResult mcnemar_test(std::span<const int> preds_a, std::span<const int> preds_b, std::span<const int> labels);
double mcnemar_exact_p(std::size_t b, std::size_t c);
double mcnemar_chi2_p(std::size_t b, std::size_t c);

/// Zeros are dropped; exact distribution up to 20 nonzero pairs, normal approximation above.
/// Statistic is W+, the rank sum of the positive differences.
ComparisonResult wilcoxon_signed_rank(std::span<const double> diffs);
double wilcoxon_exact_p(std::span<const double> nonzero_diffs);
double wilcoxon_normal_p(std::span<const double> nonzero_diffs);

/// Candidates: just below the minimum, midpoints of consecutive distinct scores, and the
/// maximum (nothing exceeds it). Prediction is score > threshold. Ties go to the smallest.
YoudenPoint youden_threshold(std::span<const double> scores, std::span<const int> labels);

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels);

/// 1 where score > threshold.
std::vector<int> predict(std::span<const double> scores, double threshold);

/// Survival function of the chi-square distribution for odd degrees of freedom.
double chi_square_sf(double x, int dof);

}  // namespace hemosynth::stats
