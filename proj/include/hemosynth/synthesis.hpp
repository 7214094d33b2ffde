#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hemosynth/grid.hpp"
#include "hemosynth/manifest.hpp"
#include "hemosynth/rng.hpp"

namespace hemosynth {

/// Candidate hemorrhage regions, numbered as they are sampled.
enum class HemorrhageScenario {
  DilatedVentDGM = 1,  ///< dilated ventricles + deep gray matter
  VentriclesOnly = 2,  ///< scenario 1 minus deep gray matter
  DGMOnly = 3,         ///< scenario 1 minus ventricles
  HemisphericWM = 4,   ///< white matter of one hemisphere
};

std::string_view to_string(HemorrhageScenario s);

struct SynthesisConfig {
  std::array<double, 4> scenario_probs{0.30, 0.30, 0.30, 0.10};
  double attenuation_lo = 0.3;
  double attenuation_hi = 0.5;
  int noise_blur_kernel = 15;
  double threshold_lo = 170.0;
  double threshold_hi = 230.0;
  double stretch_lo = 1.0;
  double stretch_hi = 2.0;
  double boundary_blur_sigma = 1.5;
  int roi_dilation_radius = 3;
  int max_retries = 10;
  double lesion_fraction = 1.0;
  std::uint64_t seed = 0;

  /// Throws ErrorKind::Parameter on any violated invariant.
  void validate() const;
};

/// JSON with the field names above; ranges are two-element arrays
/// (attenuation_range, shape_threshold_range, stretch_range). Missing keys keep defaults.
SynthesisConfig parse_synthesis_config(std::string_view json_text, SynthesisConfig base = {});
SynthesisConfig load_synthesis_config(const std::filesystem::path& path, SynthesisConfig base = {});
std::string to_json(const SynthesisConfig& config);

// ---------------------------------------------------------------------------
// Random shapes

struct ShapeParams {
  int blur_kernel = 15;
  double stretch_lo = 1.0;
  double stretch_hi = 2.0;
};

/// Every intermediate of the shape pipeline, for inspection.
struct ShapeStages {
  Grid2<double> noise;      ///< uniform [0, 255]
  Grid2<double> blurred;    ///< Gaussian, kernel `blur_kernel` on both axes
  Grid2<double> scaled;     ///< min-max rescaled to [0, 255]
  Grid2<double> stretched;  ///< scaled field stretched along one random axis
  int stretch_axis = 0;
  double stretch_factor = 1.0;
  Mask2 thresholded;  ///< stretched > t
  Mask2 refined;      ///< opening then closing, 3x3 square
  Mask2 mask;         ///< refined AND brain mask
};

ShapeStages random_shape_stages(int height, int width, double threshold, const Mask2& brain_mask, Rng& rng,
                                const ShapeParams& params = {});

Mask2 generate_random_shape(int height, int width, double threshold, const Mask2& brain_mask, Rng& rng,
                            const ShapeParams& params = {});

/// The same pipeline on a 3D field (blur and morphology along all three axes).
Mask3 generate_random_shape_3d(const Eigen::Array3i& dims, double threshold, Rng& rng, const ShapeParams& params = {});

/// Stretches `field` about its center by `factor` along `axis` with linear interpolation.
Grid2<double> stretch_field(const Grid2<double>& field, int axis, double factor);

// ---------------------------------------------------------------------------
// Scenarios and regions

/// Inverse-CDF draw in enumeration order.
HemorrhageScenario sample_scenario(const std::array<double, 4>& probs, Rng& rng);

/// Column index splitting left from right hemisphere: mean column of the brain mask.
double hemisphere_split_column(const Mask2& brain);

/// Scenario region on a slice; dilation uses a Euclidean disk and is clipped to the brain.
Mask2 select_hemorrhage_region(const LabelGrid2& labels, HemorrhageScenario scenario, int radius, Rng& rng);

/// 3D counterpart with a Euclidean ball; hemispheres split at the brain's mean x.
Mask3 select_hemorrhage_region_3d(const LabelMap& labels, HemorrhageScenario scenario, int radius, Rng& rng);

// ---------------------------------------------------------------------------
// Pseudo-lesion slices

struct PseudoLesionSample {
  Slice2D image;  ///< lesioned slice, labels carried over
  Mask2 lesion_mask;
  Mask2 region;   ///< scenario region the mask was confined to
  Image2 alpha;   ///< compositing weight; 1 in the lesion core, 0 outside the mask
  HemorrhageScenario scenario = HemorrhageScenario::DilatedVentDGM;
  double attenuation = 1.0;
  double threshold = 0.0;
  int attempts = 1;
};

/// Soft weight: Gaussian-blurred mask clamped to [0, 1] and kept inside the mask.
Grid2<double> lesion_alpha(const Mask2& mask, double sigma);

/// I' = I * (1 - alpha * (1 - f)).
Image2 composite_lesion(const Image2& image, const Grid2<double>& alpha, double attenuation);

/// Throws ErrorKind::SynthesisFailed when no nonempty mask appears within the retry budget.
PseudoLesionSample synthesize_pseudo_lesion(const Slice2D& slice, const SynthesisConfig& config, Rng& rng);

/// Seed of the random stream for one slice of one case.
std::uint64_t slice_stream_seed(std::uint64_t seed, std::string_view case_id, Plane plane, int index);

struct ExportSummary {
  std::filesystem::path manifest;
  std::size_t samples = 0;
  std::size_t failures = 0;
  std::map<int, std::size_t> scenario_histogram;  ///< scenario number (0 = unmodified) -> count
};

/// Writes image/mask NIfTI pairs plus manifest.jsonl under `out_dir`.
ExportSummary export_training_set(const std::vector<CaseRecord>& cases, const SynthesisConfig& config,
                                  const std::filesystem::path& out_dir, unsigned threads = 1);

}  // namespace hemosynth
