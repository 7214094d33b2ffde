#include "hemosynth/image_ops.hpp"

#include <numeric>
#include <optional>
#include <queue>

namespace hemosynth {

std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw Error(ErrorKind::Parameter, "kernel size must be odd and positive");
  if (!(sigma > 0.0)) throw Error(ErrorKind::Parameter, "sigma must be > 0");
  const int radius = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size));
  for (int i = -radius; i <= radius; ++i) k[std::size_t(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  return k;
}

std::vector<double> gaussian_kernel_for_size(int size) { return gaussian_kernel(size, size / 6.0); }

std::vector<double> gaussian_kernel_for_sigma(double sigma) {
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  return gaussian_kernel(2 * radius + 1, sigma);
}

std::vector<Offset2> square_element(int radius) {
  std::vector<Offset2> se;
  for (int dr = -radius; dr <= radius; ++dr)
    for (int dc = -radius; dc <= radius; ++dc) se.push_back({dr, dc});
  return se;
}

std::vector<Offset2> disk_element(int radius) {
  std::vector<Offset2> se;
  for (int dr = -radius; dr <= radius; ++dr)
    for (int dc = -radius; dc <= radius; ++dc)
      if (dr * dr + dc * dc <= radius * radius) se.push_back({dr, dc});
  return se;
}

std::vector<Offset3> cube_element(int radius) {
  std::vector<Offset3> se;
  for (int dz = -radius; dz <= radius; ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) se.push_back({dx, dy, dz});
  return se;
}

std::vector<Offset3> ball_element(int radius) {
  std::vector<Offset3> se;
  for (int dz = -radius; dz <= radius; ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy + dz * dz <= radius * radius) se.push_back({dx, dy, dz});
  return se;
}

namespace {

// Structuring elements here are symmetric, so the reflected element equals the element.
// Each offset contributes one shifted block; pixels whose neighbor falls outside the image
// keep the identity value, which ignores that neighbor.
template <bool Dilate>
Mask2 morph(const Mask2& m, std::span<const Offset2> se) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  Mask2 out = Mask2::Constant(rows, cols, !Dilate);
  for (const Offset2& o : se) {
    const Eigen::Index h = rows - std::abs(o.dr), w = cols - std::abs(o.dc);
    if (h <= 0 || w <= 0) continue;
    const Eigen::Index r0 = std::max(0, -o.dr), c0 = std::max(0, -o.dc);
    auto dst = out.block(r0, c0, h, w);
    const auto src = m.block(r0 + o.dr, c0 + o.dc, h, w);
    if constexpr (Dilate) dst = dst || src;
    else dst = dst && src;
  }
  return out;
}

template <bool Dilate>
Mask3 morph(const Mask3& m, std::span<const Offset3> se) {
  Mask3 out = m.like<std::uint8_t>();
  out.voxels.setConstant(Dilate ? 0 : 1);
  const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
  for (const Offset3& o : se) {
    const int x0 = std::max(0, -o.dx), x1 = std::min(nx, nx - o.dx);
    if (x1 <= x0) continue;
    for (int z = std::max(0, -o.dz); z < std::min(nz, nz - o.dz); ++z)
      for (int y = std::max(0, -o.dy); y < std::min(ny, ny - o.dy); ++y) {
        std::uint8_t* dst = &out(x0, y, z);
        const std::uint8_t* src = &m(x0 + o.dx, y + o.dy, z + o.dz);
        for (int i = 0; i < x1 - x0; ++i) {
          const std::uint8_t v = src[i] != 0;
          if constexpr (Dilate) dst[i] |= v;
          else dst[i] &= v;
        }
      }
  }
  return out;
}

// A full square is a row segment followed by a column segment, which is exact for
// max/min over image-clipped rectangles and much cheaper.
std::optional<int> square_radius(std::span<const Offset2> se) {
  int radius = 0;
  for (const Offset2& o : se) radius = std::max({radius, std::abs(o.dr), std::abs(o.dc)});
  if (radius == 0 || se.size() != std::size_t((2 * radius + 1) * (2 * radius + 1))) return std::nullopt;
  std::vector<char> seen(se.size(), 0);
  for (const Offset2& o : se) {
    char& s = seen[std::size_t((o.dr + radius) * (2 * radius + 1) + o.dc + radius)];
    if (s) return std::nullopt;
    s = 1;
  }
  return radius;
}

template <bool Dilate>
Mask2 morph_separable(const Mask2& m, std::span<const Offset2> se) {
  if (const auto radius = square_radius(se)) {
    std::vector<Offset2> row, col;
    for (int d = -*radius; d <= *radius; ++d) {
      row.push_back({0, d});
      col.push_back({d, 0});
    }
    return morph<Dilate>(morph<Dilate>(m, row), col);
  }
  return morph<Dilate>(m, se);
}

}  // namespace

Mask2 dilate(const Mask2& m, std::span<const Offset2> se) { return morph_separable<true>(m, se); }
Mask2 erode(const Mask2& m, std::span<const Offset2> se) { return morph_separable<false>(m, se); }
Mask2 open(const Mask2& m, std::span<const Offset2> se) { return dilate(erode(m, se), se); }
Mask2 close(const Mask2& m, std::span<const Offset2> se) { return erode(dilate(m, se), se); }

Mask3 dilate(const Mask3& m, std::span<const Offset3> se) { return morph<true>(m, se); }
Mask3 erode(const Mask3& m, std::span<const Offset3> se) { return morph<false>(m, se); }
Mask3 open(const Mask3& m, std::span<const Offset3> se) { return dilate(erode(m, se), se); }
Mask3 close(const Mask3& m, std::span<const Offset3> se) { return erode(dilate(m, se), se); }

std::vector<Offset2> neighbor_offsets(int connectivity) {
  if (connectivity == 4) return {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
  if (connectivity == 8) return {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};
  throw Error(ErrorKind::Parameter, "connectivity must be 4 or 8");
}

Mask2 component_containing(const Mask2& m, int row, int col, int connectivity) {
  Mask2 out = Mask2::Constant(m.rows(), m.cols(), false);
  if (row < 0 || col < 0 || row >= m.rows() || col >= m.cols() || !m(row, col)) return out;
  const auto nbrs = neighbor_offsets(connectivity);
  std::queue<std::pair<int, int>> q;
  q.push({row, col});
  out(row, col) = true;
  while (!q.empty()) {
    const auto [r, c] = q.front();
    q.pop();
    for (const Offset2& o : nbrs) {
      const int rr = r + o.dr, cc = c + o.dc;
      if (rr < 0 || cc < 0 || rr >= m.rows() || cc >= m.cols()) continue;
      if (m(rr, cc) && !out(rr, cc)) {
        out(rr, cc) = true;
        q.push({rr, cc});
      }
    }
  }
  return out;
}

bool is_connected(const Mask2& m, int connectivity) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (m(r, c)) return component_containing(m, int(r), int(c), connectivity).count() == m.count();
  return true;
}

Mask3 largest_component(const Mask3& m) {
  Grid3<std::int32_t> label = m.like<std::int32_t>(0);
  std::vector<Eigen::Index> sizes{0};
  std::vector<Eigen::Index> stack;
  for (int z = 0; z < m.dims[2]; ++z)
    for (int y = 0; y < m.dims[1]; ++y)
      for (int x = 0; x < m.dims[0]; ++x) {
        if (!m(x, y, z) || label(x, y, z)) continue;
        const auto id = std::int32_t(sizes.size());
        Eigen::Index count = 0;
        stack.assign(1, m.index(x, y, z));
        label(x, y, z) = id;
        while (!stack.empty()) {
          const Eigen::Index i = stack.back();
          stack.pop_back();
          ++count;
          const int px = int(i % m.dims[0]);
          const int py = int((i / m.dims[0]) % m.dims[1]);
          const int pz = int(i / (Eigen::Index(m.dims[0]) * m.dims[1]));
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int qx = px + dx, qy = py + dy, qz = pz + dz;
                if (!m.in_bounds(qx, qy, qz) || !m(qx, qy, qz) || label(qx, qy, qz)) continue;
                label(qx, qy, qz) = id;
                stack.push_back(m.index(qx, qy, qz));
              }
        }
        sizes.push_back(count);
      }
  Mask3 out = m.like<std::uint8_t>();
  if (sizes.size() == 1) return out;
  const auto best = std::int32_t(std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin());
  out.voxels = (label.voxels == best).cast<std::uint8_t>();
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::Input, "percentile of an empty set");
  if (p < 0.0 || p > 100.0) throw Error(ErrorKind::Parameter, "percentile outside [0, 100]");
  const double pos = p / 100.0 * double(values.size() - 1);
  const auto lo = std::size_t(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + std::ptrdiff_t(lo), values.end());
  const double vlo = values[lo];
  if (hi == lo) return vlo;
  const double vhi = *std::min_element(values.begin() + std::ptrdiff_t(lo) + 1, values.end());
  return vlo + (pos - double(lo)) * (vhi - vlo);
}

}  // namespace hemosynth
