#include "hemosynth/synthesis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hemosynth/image_ops.hpp"
#include "hemosynth/log.hpp"
#include "hemosynth/nifti.hpp"
#include "hemosynth/parallel.hpp"
#include "hemosynth/volume_ops.hpp"

namespace hemosynth {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(HemorrhageScenario s) {
  switch (s) {
    case HemorrhageScenario::DilatedVentDGM: return "dilated_vent_dgm";
    case HemorrhageScenario::VentriclesOnly: return "ventricles_only";
    case HemorrhageScenario::DGMOnly: return "dgm_only";
    case HemorrhageScenario::HemisphericWM: return "hemispheric_wm";
  }
  return "unknown";
}

void SynthesisConfig::validate() const {
  double sum = 0.0;
  for (double p : scenario_probs) {
    if (!(p >= 0.0)) throw Error(ErrorKind::Parameter, "scenario probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::Parameter, "scenario probabilities must sum to 1");
  if (!(attenuation_lo > 0.0 && attenuation_lo <= attenuation_hi && attenuation_hi < 1.0))
    throw Error(ErrorKind::Parameter, "attenuation range must satisfy 0 < lo <= hi < 1");
  if (noise_blur_kernel < 3 || noise_blur_kernel % 2 == 0)
    throw Error(ErrorKind::Parameter, "noise blur kernel must be odd and >= 3");
  if (!(threshold_lo <= threshold_hi)) throw Error(ErrorKind::Parameter, "shape threshold range is inverted");
  if (!(stretch_lo >= 1.0 && stretch_lo <= stretch_hi)) throw Error(ErrorKind::Parameter, "stretch range must satisfy 1 <= lo <= hi");
  if (!(boundary_blur_sigma > 0.0)) throw Error(ErrorKind::Parameter, "boundary blur sigma must be > 0");
  if (roi_dilation_radius < 0) throw Error(ErrorKind::Parameter, "ROI dilation radius must be >= 0");
  if (max_retries < 0) throw Error(ErrorKind::Parameter, "max_retries must be >= 0");
  if (!(lesion_fraction >= 0.0 && lesion_fraction <= 1.0)) throw Error(ErrorKind::Parameter, "lesion_fraction outside [0, 1]");
}

namespace {

void read_range(const json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  const json& r = j[key];
  if (!r.is_array() || r.size() != 2) throw Error(ErrorKind::Parameter, std::string(key) + " must be a two-element array");
  lo = r[0].get<double>();
  hi = r[1].get<double>();
}

}  // namespace

SynthesisConfig parse_synthesis_config(std::string_view text, SynthesisConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parameter, "config is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (j.contains("scenario_probs")) {
      const json& p = j["scenario_probs"];
      if (!p.is_array() || p.size() != 4) throw Error(ErrorKind::Parameter, "scenario_probs needs four entries");
      for (std::size_t i = 0; i < 4; ++i) c.scenario_probs[i] = p[i].get<double>();
    }
    read_range(j, "attenuation_range", c.attenuation_lo, c.attenuation_hi);
    read_range(j, "shape_threshold_range", c.threshold_lo, c.threshold_hi);
    read_range(j, "stretch_range", c.stretch_lo, c.stretch_hi);
    if (j.contains("noise_blur_kernel")) c.noise_blur_kernel = j["noise_blur_kernel"].get<int>();
    if (j.contains("boundary_blur_sigma")) c.boundary_blur_sigma = j["boundary_blur_sigma"].get<double>();
    if (j.contains("roi_dilation_radius")) c.roi_dilation_radius = j["roi_dilation_radius"].get<int>();
    if (j.contains("max_retries")) c.max_retries = j["max_retries"].get<int>();
    if (j.contains("lesion_fraction")) c.lesion_fraction = j["lesion_fraction"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::type_error& e) {
    throw Error(ErrorKind::Parameter, "config field has the wrong type: " + std::string(e.what()));
  }
  c.validate();
  return c;
}

SynthesisConfig load_synthesis_config(const fs::path& path, SynthesisConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synthesis_config(ss.str(), base);
}

std::string to_json(const SynthesisConfig& c) {
  json j;
  j["scenario_probs"] = c.scenario_probs;
  j["attenuation_range"] = {c.attenuation_lo, c.attenuation_hi};
  j["noise_blur_kernel"] = c.noise_blur_kernel;
  j["shape_threshold_range"] = {c.threshold_lo, c.threshold_hi};
  j["stretch_range"] = {c.stretch_lo, c.stretch_hi};
  j["boundary_blur_sigma"] = c.boundary_blur_sigma;
  j["roi_dilation_radius"] = c.roi_dilation_radius;
  j["max_retries"] = c.max_retries;
  j["lesion_fraction"] = c.lesion_fraction;
  j["seed"] = c.seed;
  return j.dump(2);
}

// ---------------------------------------------------------------------------

namespace {

Grid2<double> rescale_255(const Grid2<double>& b) {
  const double lo = b.minCoeff(), hi = b.maxCoeff();
  if (hi == lo) return Grid2<double>::Zero(b.rows(), b.cols());
  return (b - lo) * (255.0 / (hi - lo));
}

}  // namespace

Grid2<double> stretch_field(const Grid2<double>& field, int axis, double factor) {
  const Eigen::Index n = axis == 0 ? field.rows() : field.cols();
  const double center = 0.5 * double(n - 1);
  Grid2<double> out(field.rows(), field.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = std::clamp(center + (double(i) - center) / factor, 0.0, double(n - 1));
    const auto i0 = Eigen::Index(std::floor(u));
    const Eigen::Index i1 = std::min(i0 + 1, n - 1);
    const double w = u - double(i0);
    if (axis == 0)
      out.row(i) = (1.0 - w) * field.row(i0) + w * field.row(i1);
    else
      out.col(i) = (1.0 - w) * field.col(i0) + w * field.col(i1);
  }
  return out;
}

ShapeStages random_shape_stages(int height, int width, double threshold, const Mask2& brain, Rng& rng,
                                const ShapeParams& params) {
  if (brain.rows() != height || brain.cols() != width) throw Error(ErrorKind::Alignment, "brain mask shape mismatch");
  if (threshold < 0.0 || threshold > 256.0) throw Error(ErrorKind::Parameter, "shape threshold outside [0, 256]");
  ShapeStages s;
  s.noise.resize(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) s.noise(r, c) = rng.uniform(0.0, 255.0);
  const auto kernel = gaussian_kernel_for_size(params.blur_kernel);
  s.blurred = gaussian_blur(s.noise, kernel);
  s.scaled = rescale_255(s.blurred);
  s.stretch_axis = rng.uniform_int(0, 1);
  s.stretch_factor = rng.uniform(params.stretch_lo, params.stretch_hi);
  s.stretched = stretch_field(s.scaled, s.stretch_axis, s.stretch_factor);
  s.thresholded = s.stretched > threshold;
  const auto square = square_element(1);
  s.refined = close(open(s.thresholded, square), square);
  s.mask = s.refined && brain;
  return s;
}

Mask2 generate_random_shape(int height, int width, double threshold, const Mask2& brain, Rng& rng,
                            const ShapeParams& params) {
  return random_shape_stages(height, width, threshold, brain, rng, params).mask;
}

Mask3 generate_random_shape_3d(const Eigen::Array3i& dims, double threshold, Rng& rng, const ShapeParams& params) {
  Grid3<double> noise(dims);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.voxels[i] = rng.uniform(0.0, 255.0);
  Grid3<double> field = gaussian_blur(noise, gaussian_kernel_for_size(params.blur_kernel));
  const double lo = field.voxels.minCoeff(), hi = field.voxels.maxCoeff();
  field.voxels = hi == lo ? Grid3<double>::Storage::Zero(field.size()) : Grid3<double>::Storage((field.voxels - lo) * (255.0 / (hi - lo)));

  const int axis = rng.uniform_int(0, 2);
  const double factor = rng.uniform(params.stretch_lo, params.stretch_hi);
  const int n = dims[axis];
  const double center = 0.5 * double(n - 1);
  Mask3 thresholded(dims);
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x) {
        std::array<int, 3> p{x, y, z};
        const double u = std::clamp(center + (double(p[axis]) - center) / factor, 0.0, double(n - 1));
        const int i0 = int(std::floor(u));
        const int i1 = std::min(i0 + 1, n - 1);
        const double w = u - i0;
        p[axis] = i0;
        const double a = field(p[0], p[1], p[2]);
        p[axis] = i1;
        const double b = field(p[0], p[1], p[2]);
        thresholded(x, y, z) = ((1.0 - w) * a + w * b) > threshold ? 1 : 0;
      }
  const auto cube = cube_element(1);
  return close(open(thresholded, cube), cube);
}

HemorrhageScenario sample_scenario(const std::array<double, 4>& probs, Rng& rng) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw Error(ErrorKind::Parameter, "scenario probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::Parameter, "scenario probabilities must sum to 1");
  const double u = rng.uniform();
  double cdf = 0.0;
  for (int i = 0; i < 4; ++i) {
    cdf += probs[std::size_t(i)];
    if (u < cdf) return HemorrhageScenario(i + 1);
  }
  // u landed in the rounding slack above the last cumulative sum
  for (int i = 3; i >= 0; --i)
    if (probs[std::size_t(i)] > 0.0) return HemorrhageScenario(i + 1);
  return HemorrhageScenario::HemisphericWM;
}

double hemisphere_split_column(const Mask2& brain) {
  double sum = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index r = 0; r < brain.rows(); ++r)
    for (Eigen::Index c = 0; c < brain.cols(); ++c)
      if (brain(r, c)) {
        sum += double(c);
        ++n;
      }
  return n ? sum / double(n) : 0.5 * double(brain.cols() - 1);
}

Mask2 select_hemorrhage_region(const LabelGrid2& labels, HemorrhageScenario scenario, int radius, Rng& rng) {
  const Mask2 brain = brain_mask(labels);
  const Mask2 vent = class_mask(labels, TissueClass::Ventricles);
  const Mask2 dgm = class_mask(labels, TissueClass::DeepGrayMatter);
  if (scenario == HemorrhageScenario::HemisphericWM) {
    const bool left = rng.bernoulli(0.5);
    const double split = hemisphere_split_column(brain);
    Mask2 out = class_mask(labels, TissueClass::WhiteMatter);
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      if ((double(c) < split) != left) out.col(c).setConstant(false);
    return out;
  }
  const auto disk = disk_element(radius);
  const Mask2 dilated = dilate(Mask2(vent || dgm), disk) && brain;
  switch (scenario) {
    case HemorrhageScenario::DilatedVentDGM: return dilated;
    case HemorrhageScenario::VentriclesOnly: return dilated && !dgm;
    case HemorrhageScenario::DGMOnly: return dilated && !vent;
    default: return dilated;
  }
}

Mask3 select_hemorrhage_region_3d(const LabelMap& labels, HemorrhageScenario scenario, int radius, Rng& rng) {
  const Mask3 brain = brain_mask(labels);
  Mask3 out = labels.like<std::uint8_t>();
  if (scenario == HemorrhageScenario::HemisphericWM) {
    const bool left = rng.bernoulli(0.5);
    double sum = 0.0;
    Eigen::Index n = 0;
    for (int z = 0; z < labels.dims[2]; ++z)
      for (int y = 0; y < labels.dims[1]; ++y)
        for (int x = 0; x < labels.dims[0]; ++x)
          if (brain(x, y, z)) {
            sum += x;
            ++n;
          }
    const double split = n ? sum / double(n) : 0.5 * (labels.dims[0] - 1);
    for (int z = 0; z < labels.dims[2]; ++z)
      for (int y = 0; y < labels.dims[1]; ++y)
        for (int x = 0; x < labels.dims[0]; ++x)
          out(x, y, z) = labels(x, y, z) == code(TissueClass::WhiteMatter) && ((double(x) < split) == left);
    return out;
  }
  Mask3 seed = labels.like<std::uint8_t>();
  seed.voxels = (labels.voxels == code(TissueClass::Ventricles) || labels.voxels == code(TissueClass::DeepGrayMatter))
                    .cast<std::uint8_t>();
  const Mask3 dilated = dilate(seed, ball_element(radius));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!dilated.voxels[i] || !brain.voxels[i]) continue;
    const auto v = labels.voxels[i];
    if (scenario == HemorrhageScenario::VentriclesOnly && v == code(TissueClass::DeepGrayMatter)) continue;
    if (scenario == HemorrhageScenario::DGMOnly && v == code(TissueClass::Ventricles)) continue;
    out.voxels[i] = 1;
  }
  return out;
}

Grid2<double> lesion_alpha(const Mask2& mask, double sigma) {
  const auto kernel = gaussian_kernel_for_sigma(sigma);
  const int radius = int(kernel.size() / 2);
  Grid2<double> alpha = Grid2<double>::Zero(mask.rows(), mask.cols());
  // Alpha vanishes off the mask, so blurring the mask's box grown by the kernel radius is exact:
  // the grown box either contains every tap or meets the image edge where reflection agrees.
  Eigen::Index r0 = mask.rows(), r1 = -1, c0 = mask.cols(), c1 = -1;
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      if (mask(r, c)) {
        r0 = std::min(r0, r), r1 = std::max(r1, r);
        c0 = std::min(c0, c), c1 = std::max(c1, c);
      }
  if (r1 < 0) return alpha;
  r0 = std::max<Eigen::Index>(0, r0 - radius), c0 = std::max<Eigen::Index>(0, c0 - radius);
  r1 = std::min<Eigen::Index>(mask.rows() - 1, r1 + radius), c1 = std::min<Eigen::Index>(mask.cols() - 1, c1 + radius);
  const auto box = mask.block(r0, c0, r1 - r0 + 1, c1 - c0 + 1);
  const Grid2<double> blurred = gaussian_blur(Grid2<double>(box.cast<double>()), kernel);
  alpha.block(r0, c0, box.rows(), box.cols()) = blurred.min(1.0).max(0.0) * box.cast<double>();
  return alpha;
}

Image2 composite_lesion(const Image2& image, const Grid2<double>& alpha, double f) {
  return (image.cast<double>() * (1.0 - alpha * (1.0 - f))).cast<float>();
}

PseudoLesionSample synthesize_pseudo_lesion(const Slice2D& slice, const SynthesisConfig& config, Rng& rng) {
  config.validate();
  if (!slice.labels) throw Error(ErrorKind::Input, "slice has no label grid");
  const LabelGrid2& labels = *slice.labels;
  if (labels.rows() != slice.grid.rows() || labels.cols() != slice.grid.cols())
    throw Error(ErrorKind::Alignment, "label grid shape differs from the slice");
  if (slice.grid.size() == 0) throw Error(ErrorKind::Input, "empty slice");
  if (slice.grid.minCoeff() < 0.0f || slice.grid.maxCoeff() > 1.0f)
    throw Error(ErrorKind::Input, "slice intensities must lie in [0, 1]");

  const int h = int(slice.grid.rows()), w = int(slice.grid.cols());
  const Mask2 brain = brain_mask(labels);
  PseudoLesionSample s;
  s.scenario = sample_scenario(config.scenario_probs, rng);
  s.region = select_hemorrhage_region(labels, s.scenario, config.roi_dilation_radius, rng);
  const Mask2& region = s.region;
  const ShapeParams shape{config.noise_blur_kernel, config.stretch_lo, config.stretch_hi};

  bool found = false;
  for (int attempt = 0; attempt <= config.max_retries && !found; ++attempt) {
    s.attempts = attempt + 1;
    s.threshold = rng.uniform(config.threshold_lo, config.threshold_hi);
    s.lesion_mask = generate_random_shape(h, w, s.threshold, brain, rng, shape) && region;
    found = s.lesion_mask.any();
  }
  if (!found)
    throw Error(ErrorKind::SynthesisFailed, "empty lesion mask after " + std::to_string(config.max_retries) + " retries (" +
                                                slice.source_case + " " + std::string(to_string(slice.plane)) + " " +
                                                std::to_string(slice.index) + ")");

  s.attenuation = rng.uniform(config.attenuation_lo, config.attenuation_hi);
  const Grid2<double> alpha = lesion_alpha(s.lesion_mask, config.boundary_blur_sigma);
  s.alpha = alpha.cast<float>();
  s.image = slice;
  s.image.grid = composite_lesion(slice.grid, alpha, s.attenuation);
  return s;
}

std::uint64_t slice_stream_seed(std::uint64_t seed, std::string_view case_id, Plane plane, int index) {
  return derive_seed(seed, {hash_string(case_id), std::uint64_t(plane), std::uint64_t(index)});
}

// ---------------------------------------------------------------------------

namespace {

template <typename Scalar>
Grid3<Scalar> as_single_slice(const Grid2<Scalar>& s, const Eigen::Array3d& spacing, Plane plane) {
  Grid3<Scalar> g(Eigen::Array3i(int(s.cols()), int(s.rows()), 1),
                  Eigen::Array3d(spacing[col_axis(plane)], spacing[row_axis(plane)], spacing[normal_axis(plane)]));
  for (Eigen::Index r = 0; r < s.rows(); ++r)
    for (Eigen::Index c = 0; c < s.cols(); ++c) g(int(c), int(r), 0) = s(r, c);
  return g;
}

struct CaseExport {
  std::vector<json> records;
  std::size_t failures = 0;
};

}  // namespace

ExportSummary export_training_set(const std::vector<CaseRecord>& cases, const SynthesisConfig& config,
                                  const fs::path& out_dir, unsigned threads) {
  config.validate();
  for (const CaseRecord& c : cases)
    if (!c.is_normal() || c.lesion_mask_path)
      throw Error(ErrorKind::Input, "case " + c.id + " is not normal; only normal cases can seed synthesis");

  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");

  std::vector<CaseExport> per_case(cases.size());
  parallel_for(cases.size(), threads, [&](std::size_t ci) {
    const CaseRecord& rec = cases[ci];
    const Volume volume = normalize_minmax(load_nifti<float>(rec.volume_path));
    const LabelMap labels = load_nifti<std::uint8_t>(rec.labelmap_path);
    require_aligned(volume, labels);
    CaseExport& out = per_case[ci];
    for (Plane plane : kAllPlanes) {
      for (const Slice2D& src : extract_roi_slices(volume, labels, plane, rec.id)) {
        Rng rng(slice_stream_seed(config.seed, rec.id, plane, src.index));
        json line;
        Image2 image = src.grid;
        Mask2 mask = Mask2::Constant(src.grid.rows(), src.grid.cols(), false);
        line["scenario"] = nullptr;
        line["f"] = nullptr;
        line["t"] = nullptr;
        if (rng.bernoulli(config.lesion_fraction)) {
          try {
            PseudoLesionSample s = synthesize_pseudo_lesion(src, config, rng);
            image = s.image.grid;
            mask = s.lesion_mask;
            line["scenario"] = int(s.scenario);
            line["f"] = s.attenuation;
            line["t"] = s.threshold;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::SynthesisFailed) throw;
            log(LogLevel::Warn, e.what());
            ++out.failures;
            continue;
          }
        }
        char stem[256];
        std::snprintf(stem, sizeof(stem), "%s_%s_%03d.nii", rec.id.c_str(), std::string(to_string(plane)).c_str(), src.index);
        const fs::path image_rel = fs::path("images") / stem;
        const fs::path mask_rel = fs::path("masks") / stem;
        save_nifti(as_single_slice(image, volume.spacing, plane), out_dir / image_rel);
        save_nifti(as_single_slice(Grid2<std::uint8_t>(mask.cast<std::uint8_t>()), volume.spacing, plane), out_dir / mask_rel);
        line["image"] = image_rel.generic_string();
        line["mask"] = mask_rel.generic_string();
        line["case"] = rec.id;
        line["plane"] = std::string(to_string(plane));
        line["index"] = src.index;
        out.records.push_back(std::move(line));
      }
    }
  });

  ExportSummary summary;
  summary.manifest = out_dir / "manifest.jsonl";
  std::ofstream manifest(summary.manifest, std::ios::trunc);
  if (!manifest) throw Error(ErrorKind::Write, "cannot write " + summary.manifest.string());
  for (const CaseExport& ce : per_case) {
    summary.failures += ce.failures;
    for (const json& line : ce.records) {
      manifest << line.dump() << '\n';
      ++summary.samples;
      ++summary.scenario_histogram[line["scenario"].is_null() ? 0 : line["scenario"].get<int>()];
    }
  }
  if (!manifest) throw Error(ErrorKind::Write, "short write to " + summary.manifest.string());
  return summary;
}

}  // namespace hemosynth
