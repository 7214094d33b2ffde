#pragma once

#include <string>
#include <vector>

#include "hemosynth/grid.hpp"

namespace hemosynth {

inline constexpr int kStandardCubeSize = 210;

/// (I - min) / (max - min); a constant volume maps to all zeros.
Volume normalize_minmax(const Volume& volume);

/// Zero-pads every axis to `target`, centering the content with the odd voxel on the high side.
template <typename Scalar>
Grid3<Scalar> pad_to_cube(const Grid3<Scalar>& g, int target = kStandardCubeSize) {
  if ((g.dims > target).any())
    throw Error(ErrorKind::Parameter, "volume exceeds the " + std::to_string(target) + " voxel target; cropping is not supported");
  Grid3<Scalar> out(Eigen::Array3i::Constant(target), g.spacing, Scalar(0));
  out.orientation = g.orientation;
  const Eigen::Array3i low = (Eigen::Array3i::Constant(target) - g.dims) / 2;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x) out(x + low[0], y + low[1], z + low[2]) = g(x, y, z);
  return out;
}

Mask3 class_mask(const LabelMap& labels, TissueClass c);
Mask3 brain_mask(const LabelMap& labels);

/// Slice indices along `plane` containing any ventricle or deep gray matter voxel, ascending.
std::vector<int> roi_slice_indices(const LabelMap& labels, Plane plane);

/// The ROI slices along `plane`, each carrying its label grid.
std::vector<Slice2D> extract_roi_slices(const Volume& volume, const LabelMap& labels, Plane plane,
                                        const std::string& case_id = {});

Slice2D make_slice(const Volume& volume, const LabelMap& labels, Plane plane, int index, const std::string& case_id = {});

/// Volume of one tissue class in mm^3.
double tissue_volume(const LabelMap& labels, TissueClass cls);

void require_aligned(const Volume& volume, const LabelMap& labels);

}  // namespace hemosynth
