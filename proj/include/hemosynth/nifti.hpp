#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "hemosynth/grid.hpp"

namespace hemosynth {

enum class NiftiDatatype : std::int16_t { UInt8 = 2, Int16 = 4, Float32 = 16 };

/// Parsed subset of a NIfTI-1 header.
struct NiftiHeader {
  int ndim = 3;
  Eigen::Array3i dims = Eigen::Array3i::Zero();
  Eigen::Array3d spacing = Eigen::Array3d::Ones();
  NiftiDatatype datatype = NiftiDatatype::Float32;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::size_t vox_offset = 352;
  Orientation orientation;
  bool byte_swapped = false;
  bool gzipped = false;
};

/// Decoded file: header plus intensities with the scale already applied.
struct NiftiFile {
  NiftiHeader header;
  Eigen::ArrayXd values;
};

NiftiFile read_nifti(const std::filesystem::path& path);
NiftiFile decode_nifti(std::span<const std::uint8_t> bytes);

/// Raw container bytes for a header and payload; gzip-wrapped on request.
std::vector<std::uint8_t> encode_nifti(const NiftiHeader& header, std::span<const std::uint8_t> payload, bool gzip);

/// Paths ending in ".gz" are written gzip-compressed.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
bool wants_gzip(const std::filesystem::path& path);

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes);

template <typename Scalar>
struct NiftiTraits;
template <>
struct NiftiTraits<std::uint8_t> {
  static constexpr NiftiDatatype datatype = NiftiDatatype::UInt8;
};
template <>
struct NiftiTraits<std::int16_t> {
  static constexpr NiftiDatatype datatype = NiftiDatatype::Int16;
};
template <>
struct NiftiTraits<float> {
  static constexpr NiftiDatatype datatype = NiftiDatatype::Float32;
};

/// Loads a NIfTI-1 file into a grid of the requested scalar type.
/// Integer targets require scaled values that are integral and in range.
template <typename Scalar>
Grid3<Scalar> load_nifti(const std::filesystem::path& path, NiftiHeader* header_out = nullptr) {
  NiftiFile file = read_nifti(path);
  Grid3<Scalar> g(file.header.dims, file.header.spacing);
  g.orientation = file.header.orientation;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double v = file.values[i];
    if constexpr (std::is_integral_v<Scalar>) {
      if (v != std::floor(v) || v < double(std::numeric_limits<Scalar>::min()) ||
          v > double(std::numeric_limits<Scalar>::max()))
        throw Error(ErrorKind::Unsupported, "value " + std::to_string(v) + " not representable in target type");
    }
    g.voxels[i] = static_cast<Scalar>(v);
  }
  if (header_out) *header_out = file.header;
  return g;
}

/// float32 for float grids, uint8 for label maps and masks, int16 for int16 grids.
template <typename Scalar>
void save_nifti(const Grid3<Scalar>& g, const std::filesystem::path& path) {
  if (g.empty() || (g.dims <= 0).any()) throw Error(ErrorKind::Input, "refusing to write an empty volume");
  NiftiHeader h;
  h.ndim = g.dims[2] == 1 ? 2 : 3;
  h.dims = g.dims;
  h.spacing = g.spacing;
  h.datatype = NiftiTraits<Scalar>::datatype;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.orientation = g.orientation;
  std::span<const std::uint8_t> payload(reinterpret_cast<const std::uint8_t*>(g.voxels.data()),
                                        std::size_t(g.size()) * sizeof(Scalar));
  write_file_bytes(path, encode_nifti(h, payload, wants_gzip(path)));
}

}  // namespace hemosynth
