#include "hemosynth/phantom.hpp"

#include <cmath>
#include <numbers>

#include "hemosynth/image_ops.hpp"
#include "hemosynth/volume_ops.hpp"

namespace hemosynth {

double Ellipsoid::volume() const { return 4.0 / 3.0 * std::numbers::pi * semi_axes.prod(); }

namespace {

Eigen::Vector3d grid_center(const Eigen::Array3i& dims) { return (dims.cast<double>() - 1.0).matrix() * 0.5; }

Eigen::Vector3d scale(const Eigen::Vector3d& fraction, const Eigen::Array3i& dims) {
  return (fraction.array() * dims.cast<double>()).matrix();
}

// Samples the inner surface on a latitude/longitude grid; good enough for axis-aligned ellipsoids.
bool strictly_inside(const Ellipsoid& inner, const Ellipsoid& outer) {
  constexpr int kSteps = 24;
  for (int i = 0; i <= kSteps; ++i) {
    const double theta = std::numbers::pi * i / kSteps;
    for (int j = 0; j < 2 * kSteps; ++j) {
      const double phi = std::numbers::pi * j / kSteps;
      const Eigen::Vector3d dir(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      const Eigen::Vector3d p = inner.center + (dir.array() * inner.semi_axes.array()).matrix();
      if (((p - outer.center).array() / outer.semi_axes.array()).square().sum() >= 1.0) return false;
    }
  }
  return true;
}

}  // namespace

Ellipsoid PhantomParams::brain() const { return {grid_center(dims), scale(brain_axes, dims)}; }
Ellipsoid PhantomParams::cortex() const { return {grid_center(dims), scale(cortex_axes, dims)}; }
Ellipsoid PhantomParams::white_matter() const { return {grid_center(dims), scale(white_matter_axes, dims)}; }

Ellipsoid PhantomParams::ventricle(bool left) const {
  Eigen::Vector3d off = scale(ventricle_offset, dims);
  if (left) off.x() = -off.x();
  return {grid_center(dims) + off, scale(ventricle_axes, dims)};
}

Ellipsoid PhantomParams::dgm(bool left) const {
  Eigen::Vector3d off = scale(dgm_offset, dims);
  if (left) off.x() = -off.x();
  return {grid_center(dims) + off, scale(dgm_axes, dims)};
}

void PhantomParams::validate() const {
  if ((dims <= 0).any()) throw Error(ErrorKind::Parameter, "phantom dims must be positive");
  if (!(spacing > 0.0).all()) throw Error(ErrorKind::Parameter, "phantom spacing must be positive");
  if (!(noise_sd >= 0.0)) throw Error(ErrorKind::Parameter, "noise_sd must be >= 0");
  for (float v : {csf_intensity, gray_matter_intensity, white_matter_intensity, ventricle_intensity, dgm_intensity})
    if (!(v > 0.0f && v < 1.0f)) throw Error(ErrorKind::Parameter, "tissue intensities must lie in (0, 1)");
  const Ellipsoid frame{grid_center(dims), (dims.cast<double>() * 0.5).matrix()};
  if (!strictly_inside(brain(), frame)) throw Error(ErrorKind::Parameter, "brain does not fit in the grid");
  if (!strictly_inside(cortex(), brain())) throw Error(ErrorKind::Parameter, "cortex not inside brain");
  if (!strictly_inside(white_matter(), cortex())) throw Error(ErrorKind::Parameter, "white matter not inside cortex");
  for (bool left : {false, true}) {
    if (!strictly_inside(ventricle(left), white_matter())) throw Error(ErrorKind::Parameter, "ventricle not inside white matter");
    if (!strictly_inside(dgm(left), white_matter())) throw Error(ErrorKind::Parameter, "deep gray matter not inside white matter");
  }
  if (ventricle(false).center.x() - ventricle(false).semi_axes.x() <= grid_center(dims).x())
    throw Error(ErrorKind::Parameter, "ventricles overlap the mid-sagittal plane");
}

Phantom generate_phantom(const PhantomParams& p) {
  p.validate();
  Phantom out{Volume(p.dims, p.spacing), LabelMap(p.dims, p.spacing)};
  const Ellipsoid brain = p.brain(), cortex = p.cortex(), wm = p.white_matter();
  const Ellipsoid vl = p.ventricle(true), vr = p.ventricle(false), dl = p.dgm(true), dr = p.dgm(false);
  Rng rng(p.seed);
  for (int z = 0; z < p.dims[2]; ++z)
    for (int y = 0; y < p.dims[1]; ++y)
      for (int x = 0; x < p.dims[0]; ++x) {
        const Eigen::Vector3d q(x, y, z);
        TissueClass c = TissueClass::Background;
        float v = 0.0f;
        if (vl.contains(q) || vr.contains(q)) {
          c = TissueClass::Ventricles;
          v = p.ventricle_intensity;
        } else if (dl.contains(q) || dr.contains(q)) {
          c = TissueClass::DeepGrayMatter;
          v = p.dgm_intensity;
        } else if (wm.contains(q)) {
          c = TissueClass::WhiteMatter;
          v = p.white_matter_intensity;
        } else if (cortex.contains(q)) {
          c = TissueClass::GrayMatter;
          v = p.gray_matter_intensity;
        } else if (brain.contains(q)) {
          c = TissueClass::ExternalCSF;
          v = p.csf_intensity;
        }
        if (c != TissueClass::Background && p.noise_sd > 0.0)
          v = float(std::clamp(double(v) + rng.normal(0.0, p.noise_sd), 0.0, 1.0));
        out.labels(x, y, z) = code(c);
        out.volume(x, y, z) = v;
      }
  return out;
}

PapileGrade grade_for_scenario(HemorrhageScenario s) {
  switch (s) {
    case HemorrhageScenario::DGMOnly: return PapileGrade::I;
    case HemorrhageScenario::VentriclesOnly: return PapileGrade::II;
    case HemorrhageScenario::DilatedVentDGM: return PapileGrade::III;
    case HemorrhageScenario::HemisphericWM: return PapileGrade::IV;
  }
  return PapileGrade::III;
}

namespace {

struct Box {
  Eigen::Array3i lo, hi;  // inclusive
  Eigen::Array3i dims() const { return hi - lo + 1; }
};

template <typename Scalar>
Grid3<Scalar> crop(const Grid3<Scalar>& g, const Box& b) {
  Grid3<Scalar> out(b.dims(), g.spacing);
  for (int z = 0; z < out.dims[2]; ++z)
    for (int y = 0; y < out.dims[1]; ++y)
      for (int x = 0; x < out.dims[0]; ++x) out(x, y, z) = g(x + b.lo[0], y + b.lo[1], z + b.lo[2]);
  return out;
}

std::optional<Box> bounding_box(const Mask3& m, int margin) {
  Eigen::Array3i lo = m.dims, hi = Eigen::Array3i::Constant(-1);
  for (int z = 0; z < m.dims[2]; ++z)
    for (int y = 0; y < m.dims[1]; ++y)
      for (int x = 0; x < m.dims[0]; ++x)
        if (m(x, y, z)) {
          const Eigen::Array3i p(x, y, z);
          lo = lo.min(p);
          hi = hi.max(p);
        }
  if ((hi < 0).any()) return std::nullopt;
  return Box{(lo - margin).max(0), (hi + margin).min(m.dims - 1)};
}

}  // namespace

InjectedLesion inject_lesion_3d(const Volume& volume, const LabelMap& labels, const SynthesisConfig& config,
                                std::uint64_t seed, const Lesion3DParams& params) {
  config.validate();
  require_aligned(volume, labels);
  Rng rng(seed);
  // Lesions stay on the axial slices the scorer analyses.
  Mask3 brain = brain_mask(labels);
  {
    const auto roi = roi_slice_indices(labels, Plane::Axial);
    std::vector<char> keep(std::size_t(labels.dims[2]), 0);
    for (int z : roi) keep[std::size_t(z)] = 1;
    for (int z = 0; z < brain.dims[2]; ++z)
      if (!keep[std::size_t(z)])
        for (int y = 0; y < brain.dims[1]; ++y)
          for (int x = 0; x < brain.dims[0]; ++x) brain(x, y, z) = 0;
  }
  const ShapeParams shape{config.noise_blur_kernel, config.stretch_lo, config.stretch_hi};
  const int margin = config.noise_blur_kernel / 2 + 1;

  InjectedLesion out;
  std::optional<Box> box;
  Mask3 local;
  bool found = false;
  for (int attempt = 0; attempt <= config.max_retries && !found; ++attempt) {
    out.scenario = sample_scenario(config.scenario_probs, rng);
    const Mask3 region = select_hemorrhage_region_3d(labels, out.scenario, config.roi_dilation_radius, rng);
    box = bounding_box(region, margin);
    if (!box) continue;
    out.threshold = rng.uniform(config.threshold_lo, config.threshold_hi);
    Mask3 candidate = generate_random_shape_3d(box->dims(), out.threshold, rng, shape);
    const Mask3 region_local = crop(region, *box), brain_local = crop(brain, *box);
    candidate.voxels = candidate.voxels * region_local.voxels * brain_local.voxels;
    local = largest_component(candidate);
    found = (local.voxels != 0).count() >= std::max(1, params.min_voxels);
  }
  if (!found)
    throw Error(ErrorKind::InjectionFailed, "no lesion candidate after " + std::to_string(config.max_retries) + " retries");

  out.attenuation = rng.uniform(config.attenuation_lo, config.attenuation_hi);
  Grid3<double> inside = local.like<double>();
  inside.voxels = local.voxels.cast<double>();
  Grid3<double> alpha = gaussian_blur(inside, gaussian_kernel_for_sigma(config.boundary_blur_sigma));
  alpha.voxels = alpha.voxels.min(1.0).max(0.0) * inside.voxels;

  out.volume = volume;
  out.mask = labels.like<std::uint8_t>();
  out.alpha = volume.like<float>();
  for (int z = 0; z < local.dims[2]; ++z)
    for (int y = 0; y < local.dims[1]; ++y)
      for (int x = 0; x < local.dims[0]; ++x) {
        const double a = alpha(x, y, z);
        const int gx = x + box->lo[0], gy = y + box->lo[1], gz = z + box->lo[2];
        out.mask(gx, gy, gz) = local(x, y, z);
        out.alpha(gx, gy, gz) = float(a);
        if (a > 0.0) out.volume(gx, gy, gz) = float(double(volume(gx, gy, gz)) * (1.0 - a * (1.0 - out.attenuation)));
      }
  return out;
}

}  // namespace hemosynth
