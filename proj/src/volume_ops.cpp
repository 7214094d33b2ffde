#include "hemosynth/volume_ops.hpp"

namespace hemosynth {

Volume normalize_minmax(const Volume& volume) {
  if (volume.empty()) throw Error(ErrorKind::Input, "cannot normalize an empty volume");
  Volume out = volume;
  const double lo = volume.voxels.minCoeff();
  const double hi = volume.voxels.maxCoeff();
  if (hi == lo) {
    out.voxels.setZero();
    return out;
  }
  out.voxels = ((volume.voxels.cast<double>() - lo) / (hi - lo)).cast<float>();
  return out;
}

Mask3 class_mask(const LabelMap& labels, TissueClass c) {
  Mask3 m = labels.like<std::uint8_t>();
  m.voxels = (labels.voxels == code(c)).cast<std::uint8_t>();
  return m;
}

Mask3 brain_mask(const LabelMap& labels) {
  Mask3 m = labels.like<std::uint8_t>();
  m.voxels = (labels.voxels != code(TissueClass::Background)).cast<std::uint8_t>();
  return m;
}

std::vector<int> roi_slice_indices(const LabelMap& labels, Plane plane) {
  const int n = normal_axis(plane);
  std::vector<char> hit(std::size_t(labels.dims[n]), 0);
  for (int z = 0; z < labels.dims[2]; ++z)
    for (int y = 0; y < labels.dims[1]; ++y)
      for (int x = 0; x < labels.dims[0]; ++x) {
        const auto v = labels(x, y, z);
        if (v == code(TissueClass::Ventricles) || v == code(TissueClass::DeepGrayMatter)) {
          const int pos[3] = {x, y, z};
          hit[std::size_t(pos[n])] = 1;
        }
      }
  std::vector<int> out;
  for (int i = 0; i < int(hit.size()); ++i)
    if (hit[std::size_t(i)]) out.push_back(i);
  return out;
}

void require_aligned(const Volume& volume, const LabelMap& labels) {
  if (!volume.same_shape(labels)) throw Error(ErrorKind::Alignment, "volume and label map dims differ");
}

Slice2D make_slice(const Volume& volume, const LabelMap& labels, Plane plane, int index, const std::string& case_id) {
  require_aligned(volume, labels);
  Slice2D s;
  s.plane = plane;
  s.index = index;
  s.grid = extract_slice(volume, plane, index);
  s.labels = extract_slice(labels, plane, index);
  s.source_case = case_id;
  return s;
}

std::vector<Slice2D> extract_roi_slices(const Volume& volume, const LabelMap& labels, Plane plane,
                                        const std::string& case_id) {
  require_aligned(volume, labels);
  std::vector<Slice2D> out;
  for (int index : roi_slice_indices(labels, plane)) out.push_back(make_slice(volume, labels, plane, index, case_id));
  return out;
}

double tissue_volume(const LabelMap& labels, TissueClass cls) {
  return double((labels.voxels == code(cls)).count()) * labels.voxel_volume();
}

}  // namespace hemosynth
