#include "hemosynth/scoring.hpp"

#include <cmath>

#include "hemosynth/image_ops.hpp"
#include "hemosynth/log.hpp"
#include "hemosynth/nifti.hpp"
#include "hemosynth/volume_ops.hpp"

namespace hemosynth {

void ReferenceScorerParams::validate() const {
  if (!(reference_percentile >= 0.0 && reference_percentile <= 100.0))
    throw Error(ErrorKind::Parameter, "reference percentile outside [0, 100]");
  if (!(lo_ratio >= 0.0 && lo_ratio < hi_ratio)) throw Error(ErrorKind::Parameter, "need 0 <= lo_ratio < hi_ratio");
  if (roi_dilation_radius < 0) throw Error(ErrorKind::Parameter, "ROI dilation radius must be >= 0");
}

Mask2 scoring_roi(const LabelGrid2& labels, int radius) {
  const Mask2 seed = class_mask(labels, TissueClass::Ventricles) || class_mask(labels, TissueClass::DeepGrayMatter);
  const auto disk = disk_element(radius);
  return (dilate(seed, disk) && brain_mask(labels)) || class_mask(labels, TissueClass::WhiteMatter);
}

namespace {

void collect_roi(const Image2& grid, const Mask2& roi, std::vector<double>& out) {
  for (Eigen::Index r = 0; r < grid.rows(); ++r)
    for (Eigen::Index c = 0; c < grid.cols(); ++c)
      if (roi(r, c)) out.push_back(grid(r, c));
}

}  // namespace

double case_reference_level(const Volume& volume, const LabelMap& labels, const ReferenceScorerParams& params) {
  params.validate();
  std::vector<double> values;
  for (const Slice2D& s : extract_roi_slices(volume, labels, Plane::Axial))
    collect_roi(s.grid, scoring_roi(*s.labels, params.roi_dilation_radius), values);
  if (values.empty()) return 0.0;
  return percentile(std::move(values), params.reference_percentile);
}

Heatmap reference_heatmap(const Slice2D& slice, const ReferenceScorerParams& params) {
  params.validate();
  if (!slice.labels) throw Error(ErrorKind::Input, "reference scorer needs the slice's label grid");
  if (slice.labels->rows() != slice.grid.rows() || slice.labels->cols() != slice.grid.cols())
    throw Error(ErrorKind::Alignment, "label grid shape differs from the slice");

  Heatmap h;
  h.case_id = slice.source_case;
  h.plane = slice.plane;
  h.index = slice.index;
  h.values = Image2::Zero(slice.grid.rows(), slice.grid.cols());

  const Mask2 roi = scoring_roi(*slice.labels, params.roi_dilation_radius);
  double reference = 0.0;
  if (params.reference_level) {
    reference = *params.reference_level;
  } else {
    std::vector<double> values;
    collect_roi(slice.grid, roi, values);
    if (values.empty()) return h;
    reference = percentile(std::move(values), params.reference_percentile);
  }
  const double hi = params.hi_ratio * reference, lo = params.lo_ratio * reference;
  if (hi == lo) return h;
  const Grid2<double> ramp = ((hi - slice.grid.cast<double>()) / (hi - lo)).min(1.0).max(0.0);
  h.values = roi.select(ramp.cast<float>(), 0.0f);
  return h;
}

Volume reference_heat_volume(const Volume& volume, const LabelMap& labels, const ReferenceScorerParams& params) {
  require_aligned(volume, labels);
  ReferenceScorerParams p = params;
  if (!p.reference_level) p.reference_level = case_reference_level(volume, labels, p);
  Volume heat = volume.like<float>();
  for (const Slice2D& s : extract_roi_slices(volume, labels, Plane::Axial))
    insert_slice(heat, Plane::Axial, s.index, reference_heatmap(s, p).values);
  return heat;
}

ExternalHeatmap load_external_heatmap(const std::filesystem::path& path, const Eigen::Array3i& expected_dims) {
  ExternalHeatmap out{load_nifti<float>(path)};
  if ((out.heat.dims != expected_dims).any())
    throw Error(ErrorKind::Alignment, "heatmap " + path.string() + " does not match the case dims");
  for (float& v : out.heat.voxels) {
    if (v >= 0.0f && v <= 1.0f) continue;
    v = v > 1.0f ? 1.0f : 0.0f;  // NaN lands on 0
    ++out.clamped;
  }
  if (out.clamped)
    log(LogLevel::Warn, path.string() + ": clamped " + std::to_string(out.clamped) + " heatmap values into [0, 1]");
  return out;
}

AnomalyScore slice_anomaly_score(const Heatmap& heatmap) {
  if (heatmap.values.size() == 0) throw Error(ErrorKind::Input, "empty heatmap");
  return {double(heatmap.values.maxCoeff()), ScoreLevel::Slice, heatmap.case_id, heatmap.plane, heatmap.index};
}

AnomalyScore case_anomaly_score(std::span<const Heatmap> heatmaps) {
  if (heatmaps.empty()) throw Error(ErrorKind::Input, "case score needs at least one slice heatmap");
  AnomalyScore s{0.0, ScoreLevel::Case, heatmaps.front().case_id, std::nullopt, std::nullopt};
  for (const Heatmap& h : heatmaps) s.value = std::max(s.value, slice_anomaly_score(h).value);
  return s;
}

Diagnosis classify(const AnomalyScore& score, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorKind::Parameter, "threshold outside [0, 1]");
  return score.value > threshold ? Diagnosis::GmhIvh : Diagnosis::NotGmhIvh;
}

PointPrompt extract_point_prompt(const Heatmap& heatmap) {
  if (heatmap.values.size() == 0) throw Error(ErrorKind::Input, "empty heatmap");
  // Row-major storage makes the first maximum in memory order the smallest linear index.
  const float* data = heatmap.values.data();
  const Eigen::Index n = heatmap.values.size();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (data[i] > data[best]) best = i;
  const int cols = int(heatmap.values.cols());
  return {heatmap.case_id, heatmap.plane, heatmap.index, int(best / cols), int(best % cols), double(data[best])};
}

Heatmap heatmap_slice(const Volume& heat, Plane plane, int index, const std::string& case_id, const std::string& source) {
  return {extract_slice(heat, plane, index), source, case_id, plane, index};
}

CaseScores score_case(const std::string& case_id, const Volume& heat, const LabelMap& labels) {
  if (!heat.same_shape(labels)) throw Error(ErrorKind::Alignment, "heatmap and label map dims differ");
  std::vector<Heatmap> slices;
  for (Plane plane : kAllPlanes)
    for (int index : roi_slice_indices(labels, plane)) slices.push_back(heatmap_slice(heat, plane, index, case_id));
  CaseScores out;
  if (slices.empty()) {
    out.case_score = {0.0, ScoreLevel::Case, case_id, std::nullopt, std::nullopt};
    return out;
  }
  out.case_score = case_anomaly_score(slices);
  out.case_score.case_id = case_id;
  for (const Heatmap& h : slices) out.slice_scores.push_back(slice_anomaly_score(h));
  return out;
}

}  // namespace hemosynth
