#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hemosynth/grid.hpp"

namespace hemosynth {

inline const std::string kReferenceSource = "reference-scorer";

/// Per-pixel hemorrhage probability for one slice.
struct Heatmap {
  Image2 values;
  std::string source = kReferenceSource;
  std::string case_id;
  Plane plane = Plane::Axial;
  int index = 0;
};

enum class ScoreLevel { Case, Slice };

struct AnomalyScore {
  double value = 0.0;
  ScoreLevel level = ScoreLevel::Slice;
  std::string case_id;
  std::optional<Plane> plane;
  std::optional<int> index;
};

struct PointPrompt {
  std::string case_id;
  Plane plane = Plane::Axial;
  int index = 0;
  int row = 0;
  int col = 0;
  double heat = 0.0;
};

/// Built-in stand-in heatmap producer: a darkness ramp inside the periventricular ROI.
///
/// The reference level is a percentile of the ROI intensities (the slice's own ROI unless
/// `reference_level` is supplied, e.g. from the whole case). Heat is 0 at
/// hi_ratio * reference and above, 1 at lo_ratio * reference and below, linear between.
struct ReferenceScorerParams {
  double reference_percentile = 50.0;
  double hi_ratio = 0.60;
  double lo_ratio = 0.40;
  int roi_dilation_radius = 3;
  std::optional<double> reference_level;

  void validate() const;
};

/// dilate(Ventricles ∪ DGM) clipped to the brain, united with white matter.
Mask2 scoring_roi(const LabelGrid2& labels, int radius);

/// Reference percentile over ROI intensities of every axial ROI slice of a case.
double case_reference_level(const Volume& volume, const LabelMap& labels, const ReferenceScorerParams& params = {});

Heatmap reference_heatmap(const Slice2D& slice, const ReferenceScorerParams& params = {});

/// Axial reference heatmaps of the ROI slices stacked into a volume (zero elsewhere).
Volume reference_heat_volume(const Volume& volume, const LabelMap& labels, const ReferenceScorerParams& params = {});

struct ExternalHeatmap {
  Volume heat;
  std::size_t clamped = 0;
};

/// Loads a case-aligned float heatmap, clamping out-of-range values into [0, 1].
ExternalHeatmap load_external_heatmap(const std::filesystem::path& path, const Eigen::Array3i& expected_dims);

AnomalyScore slice_anomaly_score(const Heatmap& heatmap);
AnomalyScore case_anomaly_score(std::span<const Heatmap> heatmaps);

/// Strictly greater than the threshold is GMH-IVH.
Diagnosis classify(const AnomalyScore& score, double threshold);

/// Arg-max pixel; ties go to the smallest row-major index.
PointPrompt extract_point_prompt(const Heatmap& heatmap);

Heatmap heatmap_slice(const Volume& heat, Plane plane, int index, const std::string& case_id,
                      const std::string& source = kReferenceSource);

struct CaseScores {
  AnomalyScore case_score;
  std::vector<AnomalyScore> slice_scores;  ///< all ROI slices, planes in axial/coronal/sagittal order
};

/// Case- and slice-level scores of a heat volume over the ROI slices of all three planes.
CaseScores score_case(const std::string& case_id, const Volume& heat, const LabelMap& labels);

}  // namespace hemosynth
