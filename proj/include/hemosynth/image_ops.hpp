#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "hemosynth/grid.hpp"

namespace hemosynth {

// ---------------------------------------------------------------------------
// Gaussian smoothing

/// Normalized, truncated discrete Gaussian of odd length.
std::vector<double> gaussian_kernel(int size, double sigma);

/// Kernel of the given odd size with sigma = size / 6.
std::vector<double> gaussian_kernel_for_size(int size);

/// Kernel truncated at 3 sigma (length 2*ceil(3*sigma) + 1).
std::vector<double> gaussian_kernel_for_sigma(double sigma);

/// Mirror index into [0, n) without repeating the edge sample (reflect-101).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace detail {

inline std::vector<double>& scratch_accumulator() {
  thread_local std::vector<double> acc;
  return acc;
}

/// Convolves `n` samples read at `stride` from `src` with reflect-101 borders, writing at
/// the same stride into `dst`. `line` is scratch space.
template <typename In, typename Out>
void blur_line(const In* src, Out* dst, int n, std::ptrdiff_t stride, std::span<const double> kernel,
               std::vector<double>& line) {
  const int radius = int(kernel.size() / 2);
  line.resize(std::size_t(n + 2 * radius));
  for (int i = -radius; i < n + radius; ++i)
    line[std::size_t(i + radius)] = double(src[std::ptrdiff_t(reflect_index(i, n)) * stride]);
  // Taps outer, samples inner: vectorizes while keeping each sample's summation order.
  std::vector<double>& acc = scratch_accumulator();
  acc.assign(std::size_t(n), 0.0);
  for (std::size_t k = 0; k < kernel.size(); ++k) {
    const double wk = kernel[k];
    const double* w = line.data() + k;
    for (int i = 0; i < n; ++i) acc[std::size_t(i)] += wk * w[i];
  }
  for (int i = 0; i < n; ++i) dst[std::ptrdiff_t(i) * stride] = Out(acc[std::size_t(i)]);
}

}  // namespace detail

/// Separable blur along rows and columns with reflect-101 borders.
template <typename Scalar>
Grid2<Scalar> gaussian_blur(const Grid2<Scalar>& in, std::span<const double> kernel) {
  using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const int rows = int(in.rows()), cols = int(in.cols());
  const int radius = int(kernel.size() / 2);
  // Each pass sums whole shifted planes of a reflect-padded copy.
  Plane padded(rows, cols + 2 * radius);
  for (int c = -radius; c < cols + radius; ++c)
    padded.col(c + radius) = in.col(reflect_index(c, cols)).template cast<double>();
  // Gaussian kernels are symmetric, so mirrored taps share one multiply.
  const auto k = [&](int j) { return kernel[std::size_t(radius + j)]; };
  Plane tmp = k(0) * padded.middleCols(radius, cols);
  for (int j = 1; j <= radius; ++j) tmp += k(j) * (padded.middleCols(radius - j, cols) + padded.middleCols(radius + j, cols));
  padded.resize(rows + 2 * radius, cols);
  for (int r = -radius; r < rows + radius; ++r) padded.row(r + radius) = tmp.row(reflect_index(r, rows));
  tmp = k(0) * padded.middleRows(radius, rows);
  for (int j = 1; j <= radius; ++j) tmp += k(j) * (padded.middleRows(radius - j, rows) + padded.middleRows(radius + j, rows));
  return tmp.template cast<Scalar>();
}

/// Separable blur along all three axes with reflect-101 borders.
template <typename Scalar>
Grid3<Scalar> gaussian_blur(const Grid3<Scalar>& in, std::span<const double> kernel) {
  Grid3<Scalar> cur = in, next = in;
  std::vector<double> line;
  const std::ptrdiff_t strides[3] = {1, in.dims[0], std::ptrdiff_t(in.dims[0]) * in.dims[1]};
  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int j = 0; j < in.dims[a2]; ++j)
      for (int i = 0; i < in.dims[a1]; ++i) {
        const std::ptrdiff_t base = std::ptrdiff_t(i) * strides[a1] + std::ptrdiff_t(j) * strides[a2];
        detail::blur_line(cur.voxels.data() + base, next.voxels.data() + base, in.dims[axis], strides[axis], kernel,
                          line);
      }
    std::swap(cur, next);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Binary morphology. Out-of-image neighbors are ignored by both dilation and erosion.

struct Offset2 {
  int dr, dc;
};

struct Offset3 {
  int dx, dy, dz;
};

/// (2r+1) x (2r+1) square.
std::vector<Offset2> square_element(int radius);

/// Euclidean disk dr^2 + dc^2 <= r^2; radius 3 has 29 members.
std::vector<Offset2> disk_element(int radius);

/// (2r+1)^3 cube.
std::vector<Offset3> cube_element(int radius);

/// Euclidean ball dx^2 + dy^2 + dz^2 <= r^2.
std::vector<Offset3> ball_element(int radius);

Mask2 dilate(const Mask2& m, std::span<const Offset2> se);
Mask2 erode(const Mask2& m, std::span<const Offset2> se);
Mask2 open(const Mask2& m, std::span<const Offset2> se);
Mask2 close(const Mask2& m, std::span<const Offset2> se);

Mask3 dilate(const Mask3& m, std::span<const Offset3> se);
Mask3 erode(const Mask3& m, std::span<const Offset3> se);
Mask3 open(const Mask3& m, std::span<const Offset3> se);
Mask3 close(const Mask3& m, std::span<const Offset3> se);

// ---------------------------------------------------------------------------
// Connectivity

/// Neighbor offsets in row-major order for 4- or 8-connectivity.
std::vector<Offset2> neighbor_offsets(int connectivity);

/// Connected component of `m` containing (row, col); empty when that pixel is off.
Mask2 component_containing(const Mask2& m, int row, int col, int connectivity);

/// True if every set pixel is reachable from every other one.
bool is_connected(const Mask2& m, int connectivity);

/// Largest 26-connected component; ties go to the component found first in voxel order.
Mask3 largest_component(const Mask3& m);

// ---------------------------------------------------------------------------
// Statistics helpers

/// Linear interpolation between order statistics (p in [0, 100]).
double percentile(std::vector<double> values, double p);

}  // namespace hemosynth
