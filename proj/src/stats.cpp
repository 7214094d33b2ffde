#include "hemosynth/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hemosynth/errors.hpp"
#include "hemosynth/image_ops.hpp"
#include "hemosynth/rng.hpp"

namespace hemosynth::stats {

std::string_view to_string(TestMethod m) {
  switch (m) {
    case TestMethod::DeLong: return "delong";
    case TestMethod::BootstrapAupr: return "bootstrap-aupr";
    case TestMethod::McNemar: return "mcnemar";
    case TestMethod::Wilcoxon: return "wilcoxon";
  }
  return "?";
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::Parameter, "normal quantile needs p in (0, 1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double chi_square_sf(double x, int dof) {
  if (dof < 1 || dof % 2 == 0) throw Error(ErrorKind::Parameter, "chi-square survival implemented for odd dof only");
  if (x <= 0.0) return 1.0;
  // Q(k/2, x/2) for odd k: erfc term plus the finite series.
  const double s = std::sqrt(x);
  double sum = std::erfc(s / std::sqrt(2.0));
  double term = std::sqrt(2.0 / M_PI) * s * std::exp(-x / 2.0);
  for (int k = 3; k <= dof; k += 2) {
    sum += term;
    term *= x / double(k);
  }
  return std::min(1.0, sum);
}

namespace {

struct ClassCounts {
  std::size_t pos = 0, neg = 0;
};

ClassCounts check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::Input, "scores and labels differ in length");
  ClassCounts n;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) ++n.pos;
    else if (labels[i] == 0) ++n.neg;
    else throw Error(ErrorKind::Input, "labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw Error(ErrorKind::Input, "scores must be finite");
  }
  if (n.pos == 0 || n.neg == 0) throw Error(ErrorKind::DegenerateInput, "need at least one positive and one negative");
  return n;
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });
  return idx;
}

// Cumulative (tp, fp) at each distinct score, highest score first.
struct Step {
  double threshold;
  std::size_t tp, fp;
};

std::vector<Step> threshold_steps(std::span<const double> scores, std::span<const int> labels) {
  const auto idx = order_descending(scores);
  std::vector<Step> steps;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    (labels[idx[k]] == 1 ? tp : fp)++;
    if (k + 1 == idx.size() || scores[idx[k + 1]] != scores[idx[k]]) steps.push_back({scores[idx[k]], tp, fp});
  }
  return steps;
}

template <typename Scores>
std::optional<double> resample_aupr(const Scores& scores, std::span<const int> labels,
                                    std::span<const std::size_t> idx) {
  std::vector<double> s(idx.size());
  std::vector<int> l(idx.size());
  bool pos = false, neg = false;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    s[k] = scores[idx[k]];
    l[k] = labels[idx[k]];
    (l[k] ? pos : neg) = true;
  }
  if (!pos || !neg) return std::nullopt;
  return pr_aupr(s, l).aupr;
}

std::vector<std::size_t> draw_indices(std::uint64_t seed, std::size_t units) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, units - 1);
  std::vector<std::size_t> idx(units);
  for (auto& i : idx) i = pick(rng.engine());
  return idx;
}

// Midranks of |d| (1-based).
std::vector<double> abs_midranks(std::span<const double> d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<double> ranks(n);
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    while (e + 1 < n && std::abs(d[idx[e + 1]]) == std::abs(d[idx[k]])) ++e;
    const double r = 0.5 * double(k + 1 + e + 1);
    for (std::size_t m = k; m <= e; ++m) ranks[idx[m]] = r;
    k = e + 1;
  }
  return ranks;
}

double positive_rank_sum(std::span<const double> d, const std::vector<double>& ranks) {
  double w = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0) w += ranks[i];
  return w;
}

void require_nonzero(std::span<const double> d) {
  if (d.empty()) throw Error(ErrorKind::Input, "no nonzero differences");
  for (double v : d)
    if (v == 0.0 || !std::isfinite(v)) throw Error(ErrorKind::Input, "differences must be finite and nonzero");
}

}  // namespace

RocResult roc_auroc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts n = check_binary(scores, labels);
  RocResult out;
  auto& pts = out.curve.points;
  pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  double area = 0.0;
  std::size_t prev_tp = 0, prev_fp = 0;
  for (const Step& s : threshold_steps(scores, labels)) {
    pts.push_back({s.threshold, double(s.tp) / double(n.pos), double(n.neg - s.fp) / double(n.neg)});
    // Integrate in counts and normalize once.
    area += double(s.fp - prev_fp) * double(s.tp + prev_tp) / 2.0;
    prev_tp = s.tp;
    prev_fp = s.fp;
  }
  out.auroc = area / (double(n.pos) * double(n.neg));
  return out;
}

PrResult pr_aupr(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts n = check_binary(scores, labels);
  PrResult out;
  auto& pts = out.curve.points;
  pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  double ap = 0.0, prev_recall = 0.0;
  for (const Step& s : threshold_steps(scores, labels)) {
    const double recall = double(s.tp) / double(n.pos);
    const double precision = double(s.tp) / double(s.tp + s.fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    pts.push_back({s.threshold, recall, precision});
  }
  out.aupr = ap;
  return out;
}

double sensitivity_at_specificity(const RocCurve& curve, double target) {
  double best = -1.0;
  for (const RocPoint& p : curve.points)
    if (p.specificity >= target) best = std::max(best, p.sensitivity);
  if (best < 0.0) throw Error(ErrorKind::Input, "no operating point meets the specificity target");
  return best;
}

double specificity_at_sensitivity(const RocCurve& curve, double target) {
  double best = -1.0;
  for (const RocPoint& p : curve.points)
    if (p.sensitivity >= target) best = std::max(best, p.specificity);
  if (best < 0.0) throw Error(ErrorKind::Input, "no operating point meets the sensitivity target");
  return best;
}

MetricWithCI bootstrap_ci(const ResampleMetric& metric, std::size_t units, std::size_t resamples, double level,
                          std::uint64_t seed) {
  if (units < 2) throw Error(ErrorKind::Input, "bootstrap needs at least two data units");
  if (resamples == 0) throw Error(ErrorKind::Parameter, "bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Parameter, "confidence level outside (0, 1)");

  std::vector<std::size_t> all(units);
  std::iota(all.begin(), all.end(), 0);
  const auto full = metric(all);
  if (!full) throw Error(ErrorKind::DegenerateInput, "metric undefined on the full sample");

  MetricWithCI out;
  out.estimate = *full;
  out.level = level;
  out.method = CiMethod::BootstrapPercentile;

  std::vector<double> stats;
  stats.reserve(resamples);
  for (std::size_t i = 0; i < resamples; ++i) {
    for (std::uint64_t j = 0;; ++j) {
      if (out.redraws > resamples)
        throw Error(ErrorKind::UnstableMetric, "metric undefined on more than half of the bootstrap resamples");
      if (const auto v = metric(draw_indices(derive_seed(seed, {i, j}), units))) {
        stats.push_back(*v);
        break;
      }
      ++out.redraws;
    }
  }
  const double tail = 50.0 * (1.0 - level);
  out.lo = percentile(stats, tail);
  out.hi = percentile(std::move(stats), 100.0 - tail);
  // A skewed resample distribution can leave the estimate outside; widen to keep lo <= estimate <= hi.
  out.lo = std::min(out.lo, out.estimate);
  out.hi = std::max(out.hi, out.estimate);
  return out;
}

MetricWithCI wilson_interval(std::size_t successes, std::size_t trials, double level) {
  if (trials == 0 || successes > trials) throw Error(ErrorKind::Parameter, "need 0 <= k <= n and n >= 1");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Parameter, "confidence level outside (0, 1)");
  const double n = double(trials), p = double(successes) / n;
  const double z = normal_quantile(1.0 - (1.0 - level) / 2.0), z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  MetricWithCI out;
  out.estimate = p;
  out.level = level;
  out.method = CiMethod::Wilson;
  out.lo = successes == 0 ? 0.0 : std::clamp(center - half, 0.0, p);
  out.hi = successes == trials ? 1.0 : std::clamp(center + half, p, 1.0);
  return out;
}

namespace {

double psi(double pos, double neg) { return pos > neg ? 1.0 : pos == neg ? 0.5 : 0.0; }

struct Placements {
  Eigen::MatrixXd v10;  // positives x models
  Eigen::MatrixXd v01;  // negatives x models
};

Placements placements(const std::vector<std::span<const double>>& models, std::span<const int> labels) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  const Eigen::Index m = Eigen::Index(pos.size()), n = Eigen::Index(neg.size()), k = Eigen::Index(models.size());
  Placements p{Eigen::MatrixXd::Zero(m, k), Eigen::MatrixXd::Zero(n, k)};
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto& s = models[std::size_t(r)];
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = psi(s[pos[std::size_t(i)]], s[neg[std::size_t(j)]]);
        p.v10(i, r) += v;
        p.v01(j, r) += v;
      }
  }
  p.v10 /= double(n);
  p.v01 /= double(m);
  return p;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / double(x.rows() - 1);
}

}  // namespace

double delong_auc(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  return placements({scores}, labels).v10.col(0).mean();
}

ComparisonResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const int> labels) {
  const ClassCounts n = check_binary(scores_a, labels);
  check_binary(scores_b, labels);
  ComparisonResult out;
  out.method = TestMethod::DeLong;
  out.n = labels.size();

  const double auc_a = roc_auroc(scores_a, labels).auroc, auc_b = roc_auroc(scores_b, labels).auroc;
  const Placements p = placements({scores_a, scores_b}, labels);
  Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
  if (n.pos > 1) s += covariance(p.v10) / double(n.pos);
  if (n.neg > 1) s += covariance(p.v01) / double(n.neg);
  const double var = s(0, 0) + s(1, 1) - 2.0 * s(0, 1);
  const double diff = auc_a - auc_b;
  if (!(var > 1e-300)) {
    if (diff == 0.0) return out;
    throw Error(ErrorKind::DegenerateInput, "zero variance of the AUC difference with unequal AUCs");
  }
  out.statistic = diff / std::sqrt(var);
  out.p_value = std::clamp(std::erfc(std::abs(out.statistic) / std::sqrt(2.0)), 0.0, 1.0);
  return out;
}

ComparisonResult bootstrap_compare_aupr(std::span<const double> scores_a, std::span<const double> scores_b,
                                        std::span<const int> labels, std::size_t resamples, std::uint64_t seed) {
  check_binary(scores_a, labels);
  check_binary(scores_b, labels);
  if (resamples == 0) throw Error(ErrorKind::Parameter, "bootstrap needs at least one resample");
  ComparisonResult out;
  out.method = TestMethod::BootstrapAupr;
  out.n = labels.size();
  out.statistic = pr_aupr(scores_a, labels).aupr - pr_aupr(scores_b, labels).aupr;

  std::size_t le = 0, ge = 0, undefined = 0;
  for (std::size_t i = 0; i < resamples; ++i) {
    for (std::uint64_t j = 0;; ++j) {
      if (undefined > resamples)
        throw Error(ErrorKind::UnstableMetric, "AUPR undefined on more than half of the bootstrap resamples");
      const auto idx = draw_indices(derive_seed(seed, {i, j}), labels.size());
      const auto a = resample_aupr(scores_a, labels, idx);
      if (!a) {
        ++undefined;
        continue;
      }
      const double d = *a - *resample_aupr(scores_b, labels, idx);
      le += d <= 0.0;
      ge += d >= 0.0;
      break;
    }
  }
  const double nr = double(resamples);
  out.p_value = std::clamp(2.0 * double(std::min(le, ge)) / nr, 1.0 / nr, 1.0);
  return out;
}

double mcnemar_exact_p(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  if (n == 0) return 1.0;
  const std::size_t k = std::min(b, c);
  double tail = 0.0;
  if (n <= 50) {
    // Binomial coefficients stay exact integers in a double up to here.
    double coeff = 1.0, sum = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
      sum += coeff;
      coeff = coeff * double(n - i) / double(i + 1);
    }
    tail = std::ldexp(sum, -int(n));
  } else {
    for (std::size_t i = 0; i <= k; ++i)
      tail += std::exp(std::lgamma(double(n) + 1) - std::lgamma(double(i) + 1) - std::lgamma(double(n - i) + 1) -
                       double(n) * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

double mcnemar_chi2_p(std::size_t b, std::size_t c) {
  if (b + c == 0) return 1.0;
  const double diff = std::max(0.0, std::abs(double(b) - double(c)) - 1.0);
  return chi_square_sf(diff * diff / double(b + c), 1);
}

ComparisonResult mcnemar_test(std::span<const int> preds_a, std::span<const int> preds_b, std::span<const int> labels) {
  if (preds_a.size() != labels.size() || preds_b.size() != labels.size())
    throw Error(ErrorKind::Input, "predictions and labels differ in length");
  std::size_t b = 0, c = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool ca = preds_a[i] == labels[i], cb = preds_b[i] == labels[i];
    b += ca && !cb;
    c += !ca && cb;
  }
  ComparisonResult out;
  out.method = TestMethod::McNemar;
  out.n = labels.size();
  if (b + c == 0) return out;
  const double diff = std::max(0.0, std::abs(double(b) - double(c)) - 1.0);
  out.statistic = diff * diff / double(b + c);
  out.p_value = b + c < 25 ? mcnemar_exact_p(b, c) : mcnemar_chi2_p(b, c);
  return out;
}

double wilcoxon_exact_p(std::span<const double> d) {
  require_nonzero(d);
  if (d.size() > 30) throw Error(ErrorKind::Parameter, "exact Wilcoxon enumeration limited to 30 pairs");
  // Midranks are multiples of 1/2, so doubled ranks are integers.
  const auto ranks = abs_midranks(d);
  std::vector<int> r2(ranks.size());
  int total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) total += r2[i] = int(std::lround(2.0 * ranks[i]));
  std::vector<double> count(std::size_t(total) + 1, 0.0);
  count[0] = 1.0;
  for (int r : r2)
    for (int s = total; s >= r; --s) count[std::size_t(s)] += count[std::size_t(s - r)];
  const int w2 = int(std::lround(2.0 * positive_rank_sum(d, ranks)));
  double lower = 0.0, upper = 0.0;
  for (int s = 0; s <= total; ++s) {
    if (s <= w2) lower += count[std::size_t(s)];
    if (s >= w2) upper += count[std::size_t(s)];
  }
  const double all = std::ldexp(1.0, int(d.size()));
  return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

double wilcoxon_normal_p(std::span<const double> d) {
  require_nonzero(d);
  const auto ranks = abs_midranks(d);
  const double n = double(d.size());
  const double mean = n * (n + 1.0) / 4.0;
  double ties = 0.0;
  {
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size();) {
      std::size_t e = k;
      while (e < sorted.size() && sorted[e] == sorted[k]) ++e;
      const double t = double(e - k);
      ties += t * t * t - t;
      k = e;
    }
  }
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(positive_rank_sum(d, ranks) - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

ComparisonResult wilcoxon_signed_rank(std::span<const double> diffs) {
  std::vector<double> nz;
  for (double v : diffs) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Input, "differences must be finite");
    if (v != 0.0) nz.push_back(v);
  }
  ComparisonResult out;
  out.method = TestMethod::Wilcoxon;
  out.n = nz.size();
  if (nz.empty()) return out;
  out.statistic = positive_rank_sum(nz, abs_midranks(nz));
  out.p_value = nz.size() <= 20 ? wilcoxon_exact_p(nz) : wilcoxon_normal_p(nz);
  return out;
}

YoudenPoint youden_threshold(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts n = check_binary(scores, labels);
  std::vector<double> u(scores.begin(), scores.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());

  std::vector<double> candidates;
  candidates.push_back(std::nextafter(u.front(), -std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i + 1 < u.size(); ++i) candidates.push_back(u[i] + (u[i + 1] - u[i]) / 2.0);
  candidates.push_back(u.back());

  // Sweep ascending: count positives predicted at each candidate by walking the sorted scores.
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
  std::size_t k = 0, fn = 0, tn = 0;
  YoudenPoint best;
  bool have = false;
  for (double t : candidates) {
    while (k < idx.size() && scores[idx[k]] <= t) (labels[idx[k++]] ? fn : tn)++;
    const double sens = double(n.pos - fn) / double(n.pos), spec = double(tn) / double(n.neg);
    const double j = sens + spec - 1.0;
    if (!have || j > best.j + 1e-12) {
      best = {t, j, sens, spec};
      have = true;
    }
  }
  return best;
}

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw Error(ErrorKind::Input, "predictions and labels differ in length");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] != 0, l = labels[i] != 0;
    if (p && l) ++m.tp;
    else if (p) ++m.fp;
    else if (l) ++m.fn;
    else ++m.tn;
  }
  return m;
}

std::vector<int> predict(std::span<const double> scores, double threshold) {
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold;
  return out;
}

}  // namespace hemosynth::stats
