#include "hemosynth/refine.hpp"

#include <queue>

#include "hemosynth/image_ops.hpp"
#include "hemosynth/volume_ops.hpp"

namespace hemosynth {

void RegionGrowParams::validate() const {
  if (!(delta >= 0.0)) throw Error(ErrorKind::Parameter, "delta must be >= 0");
  if (connectivity != 4 && connectivity != 8) throw Error(ErrorKind::Parameter, "connectivity must be 4 or 8");
  if (max_pixels <= 0) throw Error(ErrorKind::Parameter, "max_pixels must be > 0");
  if (roi_dilation_radius < 0) throw Error(ErrorKind::Parameter, "ROI dilation radius must be >= 0");
}

Mask2 threshold_segment(const Image2& heat, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorKind::Parameter, "threshold outside [0, 1]");
  return heat.cast<double>() > threshold;
}

Mask3 threshold_segment(const Volume& heat, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorKind::Parameter, "threshold outside [0, 1]");
  Mask3 m = heat.like<std::uint8_t>();
  m.voxels = (heat.voxels.cast<double>() > threshold).cast<std::uint8_t>();
  return m;
}

Mask2 region_grow(const Slice2D& slice, const PointPrompt& prompt, const RegionGrowParams& params) {
  params.validate();
  const Image2& img = slice.grid;
  const int rows = int(img.rows()), cols = int(img.cols());
  if (prompt.row < 0 || prompt.col < 0 || prompt.row >= rows || prompt.col >= cols)
    throw Error(ErrorKind::Input, "prompt outside the slice");

  Mask2 allowed = Mask2::Constant(rows, cols, true);
  if (params.confine_to_roi && slice.labels) allowed = scoring_roi(*slice.labels, params.roi_dilation_radius);
  const double limit = double(img(prompt.row, prompt.col)) + params.delta;

  Mask2 out = Mask2::Constant(rows, cols, false);
  const auto nbrs = neighbor_offsets(params.connectivity);
  std::queue<std::pair<int, int>> q;
  out(prompt.row, prompt.col) = true;
  q.push({prompt.row, prompt.col});
  int count = 1;
  while (!q.empty() && count < params.max_pixels) {
    const auto [r, c] = q.front();
    q.pop();
    for (const Offset2& o : nbrs) {
      const int rr = r + o.dr, cc = c + o.dc;
      if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
      if (out(rr, cc) || !allowed(rr, cc) || double(img(rr, cc)) > limit) continue;
      out(rr, cc) = true;
      q.push({rr, cc});
      if (++count == params.max_pixels) break;
    }
  }
  return out;
}

double dsc(const Mask2& a, const Mask2& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorKind::Alignment, "mask shapes differ");
  const auto na = a.count(), nb = b.count();
  if (na + nb == 0) return 1.0;
  return 2.0 * double((a && b).count()) / double(na + nb);
}

double dsc(const Mask3& a, const Mask3& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::Alignment, "mask shapes differ");
  const auto na = (a.voxels != 0).count(), nb = (b.voxels != 0).count();
  if (na + nb == 0) return 1.0;
  return 2.0 * double(((a.voxels != 0) && (b.voxels != 0)).count()) / double(na + nb);
}

double lesion_volume(const Mask3& mask, const Eigen::Array3d& spacing) {
  return double((mask.voxels != 0).count()) * spacing.prod();
}

double lesion_volume(const Mask3& mask) { return lesion_volume(mask, mask.spacing); }

Mask2 segment_slice(const Slice2D& slice, const Heatmap& heat, double threshold, bool refine,
                    const RegionGrowParams& params) {
  if (heat.values.rows() != slice.grid.rows() || heat.values.cols() != slice.grid.cols())
    throw Error(ErrorKind::Alignment, "heatmap shape differs from the slice");
  Mask2 mask = threshold_segment(heat.values, threshold);
  if (!refine || !mask.any()) return mask;
  const PointPrompt prompt = extract_point_prompt(heat);
  const Mask2 component = component_containing(mask, prompt.row, prompt.col, params.connectivity);
  return (mask && !component) || region_grow(slice, prompt, params);
}

std::vector<RowRuns> rle_encode(const Mask2& mask) {
  std::vector<RowRuns> rows(std::size_t(mask.rows()));
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols();) {
      if (!mask(r, c)) {
        ++c;
        continue;
      }
      const Eigen::Index start = c;
      while (c < mask.cols() && mask(r, c)) ++c;
      rows[std::size_t(r)].emplace_back(int(start), int(c - start));
    }
  }
  return rows;
}

Mask2 rle_decode(const std::vector<RowRuns>& rows, int cols) {
  Mask2 m = Mask2::Constant(Eigen::Index(rows.size()), cols, false);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& [start, len] : rows[r]) {
      if (start < 0 || len < 0 || start + len > cols) throw Error(ErrorKind::Format, "run outside the row");
      m.row(Eigen::Index(r)).segment(start, len) = true;
    }
  return m;
}

CaseSegmentation segment_case(const std::string& case_id, const Volume& volume, const LabelMap& labels,
                              const Volume& heat, double threshold, bool refine, const RegionGrowParams& params) {
  require_aligned(volume, labels);
  if (!heat.same_shape(volume)) throw Error(ErrorKind::Alignment, "heatmap and volume dims differ");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorKind::Parameter, "threshold outside [0, 1]");
  CaseSegmentation out;
  out.mask = labels.like<std::uint8_t>();
  for (int index : roi_slice_indices(labels, Plane::Axial)) {
    const Slice2D slice = make_slice(volume, labels, Plane::Axial, index, case_id);
    const Mask2 m = segment_slice(slice, heatmap_slice(heat, Plane::Axial, index, case_id), threshold, refine, params);
    insert_slice(out.mask, Plane::Axial, index, Grid2<std::uint8_t>(m.cast<std::uint8_t>()));
    out.axial_slices.emplace(index, m);
  }
  out.volume_mm3 = lesion_volume(out.mask);
  return out;
}

}  // namespace hemosynth
