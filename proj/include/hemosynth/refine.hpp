#pragma once

#include <map>
#include <utility>
#include <vector>

#include "hemosynth/grid.hpp"
#include "hemosynth/scoring.hpp"

namespace hemosynth {

/// Prompt-seeded region growing. This is a deliberately simple substitute for a
/// promptable segmentation network, not a reimplementation of one.
struct RegionGrowParams {
  double delta = 0.15;  ///< accept pixels with I <= I(seed) + delta
  int connectivity = 8;
  int max_pixels = 5000;
  bool confine_to_roi = true;
  int roi_dilation_radius = 3;

  void validate() const;
};

/// h > threshold, strict like classify().
Mask2 threshold_segment(const Image2& heat, double threshold);
Mask3 threshold_segment(const Volume& heat, double threshold);

/// Breadth-first flood fill from the prompt; neighbors are visited in row-major offset
/// order, so a capped result is the first `max_pixels` pixels of that traversal.
Mask2 region_grow(const Slice2D& slice, const PointPrompt& prompt, const RegionGrowParams& params = {});

/// 2|A∩B| / (|A| + |B|); two empty masks score 1.
double dsc(const Mask2& a, const Mask2& b);
double dsc(const Mask3& a, const Mask3& b);

double lesion_volume(const Mask3& mask);
double lesion_volume(const Mask3& mask, const Eigen::Array3d& spacing);

/// Thresholded slice mask; with `refine`, the component holding the heat maximum is
/// replaced by the region grown from that maximum.
Mask2 segment_slice(const Slice2D& slice, const Heatmap& heat, double threshold, bool refine,
                    const RegionGrowParams& params = {});

/// Runs of set pixels as (start column, length) pairs, one list per row.
using RowRuns = std::vector<std::pair<int, int>>;

std::vector<RowRuns> rle_encode(const Mask2& mask);
Mask2 rle_decode(const std::vector<RowRuns>& rows, int cols);

struct CaseSegmentation {
  Mask3 mask;
  double volume_mm3 = 0.0;
  std::map<int, Mask2> axial_slices;  ///< every axial ROI slice, keyed by index
};

/// Segments the axial ROI slices of a case from its heat volume.
CaseSegmentation segment_case(const std::string& case_id, const Volume& volume, const LabelMap& labels,
                              const Volume& heat, double threshold, bool refine, const RegionGrowParams& params = {});

}  // namespace hemosynth
