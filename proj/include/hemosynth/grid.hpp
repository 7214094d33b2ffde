#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "hemosynth/errors.hpp"
#include "hemosynth/types.hpp"

namespace hemosynth {

/// Dense 2D grid, row-major so that a slice row is contiguous.
template <typename Scalar>
using Grid2 = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image2 = Grid2<float>;
using Mask2 = Grid2<bool>;
using LabelGrid2 = Grid2<std::uint8_t>;

/// qform/sform block of a NIfTI header, carried verbatim through I/O.
struct Orientation {
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  Eigen::Vector3f quatern = Eigen::Vector3f::Zero();
  Eigen::Vector3f qoffset = Eigen::Vector3f::Zero();
  Eigen::Matrix<float, 3, 4> srow = Eigen::Matrix<float, 3, 4>::Zero();
  float qfac = 1.0f;

  bool operator==(const Orientation&) const = default;
};

/// Dense 3D grid with physical spacing. Voxels are stored x fastest, then y, then z.
template <typename Scalar>
struct Grid3 {
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Eigen::Array3i dims = Eigen::Array3i::Zero();
  Eigen::Array3d spacing = Eigen::Array3d::Ones();
  Storage voxels;
  Orientation orientation;

  Grid3() = default;

  Grid3(const Eigen::Array3i& d, const Eigen::Array3d& s = Eigen::Array3d::Ones(), Scalar fill = Scalar(0))
      : dims(d), spacing(s) {
    if ((d < 0).any()) throw Error(ErrorKind::Parameter, "negative grid dimension");
    if (!(s > 0.0).all()) throw Error(ErrorKind::Parameter, "spacing components must be > 0");
    voxels = Storage::Constant(Eigen::Index(d.cast<Eigen::Index>().prod()), fill);
  }

  Eigen::Index size() const { return voxels.size(); }
  bool empty() const { return voxels.size() == 0; }

  Eigen::Index index(int x, int y, int z) const {
    return Eigen::Index(x) + Eigen::Index(dims[0]) * (Eigen::Index(y) + Eigen::Index(dims[1]) * z);
  }

  Scalar& operator()(int x, int y, int z) { return voxels[index(x, y, z)]; }
  const Scalar& operator()(int x, int y, int z) const { return voxels[index(x, y, z)]; }

  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }

  double voxel_volume() const { return spacing.prod(); }

  template <typename Other>
  bool same_shape(const Grid3<Other>& o) const {
    return (dims == o.dims).all();
  }

  /// Same geometry, new scalar type and fill.
  template <typename Other>
  Grid3<Other> like(Other fill = Other(0)) const {
    Grid3<Other> g(dims, spacing, fill);
    g.orientation = orientation;
    return g;
  }
};

using Volume = Grid3<float>;
using LabelMap = Grid3<std::uint8_t>;
using Mask3 = Grid3<std::uint8_t>;

/// A 2D cut through a volume, optionally carrying the aligned tissue labels.
struct Slice2D {
  Plane plane = Plane::Axial;
  int index = 0;
  Image2 grid;
  std::string source_case;
  std::optional<LabelGrid2> labels;
};

template <typename Scalar>
int slice_count(const Grid3<Scalar>& g, Plane p) {
  return g.dims[normal_axis(p)];
}

template <typename Scalar>
Grid2<Scalar> extract_slice(const Grid3<Scalar>& g, Plane p, int index) {
  const int n = normal_axis(p), ra = row_axis(p), ca = col_axis(p);
  if (index < 0 || index >= g.dims[n]) throw Error(ErrorKind::NotFound, "slice index out of range");
  Grid2<Scalar> out(g.dims[ra], g.dims[ca]);
  Eigen::Array3i pos;
  pos[n] = index;
  for (int r = 0; r < g.dims[ra]; ++r) {
    pos[ra] = r;
    for (int c = 0; c < g.dims[ca]; ++c) {
      pos[ca] = c;
      out(r, c) = g(pos[0], pos[1], pos[2]);
    }
  }
  return out;
}

template <typename Scalar>
void insert_slice(Grid3<Scalar>& g, Plane p, int index, const Grid2<Scalar>& s) {
  const int n = normal_axis(p), ra = row_axis(p), ca = col_axis(p);
  if (index < 0 || index >= g.dims[n]) throw Error(ErrorKind::NotFound, "slice index out of range");
  if (s.rows() != g.dims[ra] || s.cols() != g.dims[ca]) throw Error(ErrorKind::Alignment, "slice shape mismatch");
  Eigen::Array3i pos;
  pos[n] = index;
  for (int r = 0; r < g.dims[ra]; ++r) {
    pos[ra] = r;
    for (int c = 0; c < g.dims[ca]; ++c) {
      pos[ca] = c;
      g(pos[0], pos[1], pos[2]) = s(r, c);
    }
  }
}

template <typename Derived>
Mask2 class_mask(const Eigen::ArrayBase<Derived>& labels, TissueClass c) {
  return labels == code(c);
}

/// Union of tissue classes 1..8.
template <typename Derived>
Mask2 brain_mask(const Eigen::ArrayBase<Derived>& labels) {
  return labels != code(TissueClass::Background);
}

}  // namespace hemosynth
