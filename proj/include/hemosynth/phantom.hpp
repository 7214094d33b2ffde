#pragma once

#include <cstdint>

#include "hemosynth/grid.hpp"
#include "hemosynth/synthesis.hpp"

namespace hemosynth {

/// Axis-aligned ellipsoid in voxel coordinates.
struct Ellipsoid {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d semi_axes = Eigen::Vector3d::Ones();

  bool contains(const Eigen::Vector3d& p) const {
    return ((p - center).array() / semi_axes.array()).square().sum() <= 1.0;
  }
  double volume() const;
};

/// Geometry is given as fractions of the grid size so the same anatomy scales to any dims.
/// Offsets are relative to the grid center; ventricle and DGM offsets describe the right-hand
/// member of each pair and are mirrored across the mid-sagittal plane for the left one.
struct PhantomParams {
  Eigen::Array3i dims = Eigen::Array3i::Constant(128);
  Eigen::Array3d spacing = Eigen::Array3d::Constant(0.8);

  Eigen::Vector3d brain_axes{0.40, 0.46, 0.37};
  Eigen::Vector3d cortex_axes{0.36, 0.42, 0.33};  ///< outer surface of the gray matter
  Eigen::Vector3d white_matter_axes{0.29, 0.35, 0.26};
  Eigen::Vector3d ventricle_offset{0.075, 0.0, 0.03};
  Eigen::Vector3d ventricle_axes{0.04, 0.14, 0.06};
  Eigen::Vector3d dgm_offset{0.14, 0.04, -0.09};
  Eigen::Vector3d dgm_axes{0.05, 0.07, 0.05};

  float csf_intensity = 0.90f;
  float gray_matter_intensity = 0.50f;
  float white_matter_intensity = 0.65f;
  float ventricle_intensity = 0.90f;
  float dgm_intensity = 0.45f;

  double noise_sd = 0.02;
  std::uint64_t seed = 0;

  /// Throws ErrorKind::Parameter on a violated invariant.
  void validate() const;

  Ellipsoid brain() const;
  Ellipsoid cortex() const;
  Ellipsoid white_matter() const;
  Ellipsoid ventricle(bool left) const;
  Ellipsoid dgm(bool left) const;
};

struct Phantom {
  Volume volume;
  LabelMap labels;
};

/// Pure function of the parameters.
Phantom generate_phantom(const PhantomParams& params);

struct InjectedLesion {
  Volume volume;
  Mask3 mask;
  HemorrhageScenario scenario = HemorrhageScenario::DilatedVentDGM;
  double attenuation = 1.0;
  double threshold = 0.0;
  Grid3<float> alpha;
};

/// Extra knobs of the volumetric injector.
struct Lesion3DParams {
  /// Candidates smaller than this are redrawn like empty ones.
  int min_voxels = 1;
};

/// Injects one contiguous hypointense lesion confined to axial slices that contain ventricles
/// or deep gray matter. Throws ErrorKind::InjectionFailed when the
/// retry budget (config.max_retries) is exhausted.
InjectedLesion inject_lesion_3d(const Volume& volume, const LabelMap& labels, const SynthesisConfig& config,
                                std::uint64_t seed, const Lesion3DParams& params = {});

/// Grade assigned to a phantom lesion of the given scenario.
PapileGrade grade_for_scenario(HemorrhageScenario s);

}  // namespace hemosynth
