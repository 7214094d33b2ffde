#include "support.hpp"

#include <cstring>

#include "hemosynth/nifti.hpp"
#include "hemosynth/volume_ops.hpp"

using namespace hemosynth;
using testing::error_kind;
namespace fs = std::filesystem;

namespace {

template <typename Scalar>
Grid3<Scalar> random_grid(const Eigen::Array3i& dims, std::uint64_t seed, double lo, double hi) {
  Grid3<Scalar> g(dims, Eigen::Array3d(0.8, 0.9, 1.1));
  Rng rng(seed);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if constexpr (std::is_integral_v<Scalar>) g.voxels[i] = Scalar(rng.uniform_int(int(lo), int(hi)));
    else g.voxels[i] = Scalar(rng.uniform(lo, hi));
  }
  return g;
}

std::vector<std::uint8_t> header_bytes(const NiftiHeader& h, std::span<const std::uint8_t> payload) {
  return encode_nifti(h, payload, false);
}

}  // namespace

TEST_SUITE("volume_io") {
  TEST_CASE("float volume round trips voxel-identically, plain and gzip") {
    testing::TempDir dir("nifti_f32");
    const Volume v = random_grid<float>({7, 5, 4}, 1, -3.0, 3.0);
    for (const char* name : {"v.nii", "v.nii.gz"}) {
      save_nifti(v, dir / name);
      NiftiHeader h;
      const Volume back = load_nifti<float>(dir / name, &h);
      CHECK((back.dims == v.dims).all());
      CHECK((back.spacing.cast<float>() == v.spacing.cast<float>()).all());
      CHECK((back.voxels == v.voxels).all());
      CHECK(h.gzipped == (std::string(name).ends_with(".gz")));
    }
  }

  TEST_CASE("uint8 and int16 grids keep their codes") {
    testing::TempDir dir("nifti_int");
    LabelMap labels(Eigen::Array3i(9, 2, 1));
    for (int i = 0; i < 9; ++i) labels(i, 0, 0) = labels(i, 1, 0) = std::uint8_t(i);
    save_nifti(labels, dir / "labels.nii.gz");
    CHECK((load_nifti<std::uint8_t>(dir / "labels.nii.gz").voxels == labels.voxels).all());

    const auto s = random_grid<std::int16_t>({4, 4, 4}, 2, -32768, 32767);
    save_nifti(s, dir / "s.nii");
    NiftiHeader h;
    CHECK((load_nifti<std::int16_t>(dir / "s.nii", &h).voxels == s.voxels).all());
    CHECK(h.datatype == NiftiDatatype::Int16);
  }

  TEST_CASE("zeros volume loads as zeros") {
    testing::TempDir dir("nifti_zero");
    save_nifti(Volume(Eigen::Array3i(3, 3, 3)), dir / "z.nii");
    CHECK((load_nifti<float>(dir / "z.nii").voxels == 0.0f).all());
  }

  TEST_CASE("gzip copy of a file loads like the original") {
    testing::TempDir dir("nifti_gz");
    const Volume v = random_grid<float>({6, 6, 3}, 3, 0.0, 1.0);
    save_nifti(v, dir / "a.nii");
    const auto raw = testing::read_bytes(dir / "a.nii");
    const auto packed = gzip_compress(raw);
    CHECK(gzip_decompress(packed) == raw);
    std::ofstream(dir / "b.nii.gz", std::ios::binary).write(reinterpret_cast<const char*>(packed.data()),
                                                            std::streamsize(packed.size()));
    CHECK((load_nifti<float>(dir / "b.nii.gz").voxels == load_nifti<float>(dir / "a.nii").voxels).all());
  }

  TEST_CASE("int16 scaling applies slope and intercept") {
    NiftiHeader h;
    h.dims = {1, 1, 1};
    h.datatype = NiftiDatatype::Int16;
    h.scl_slope = 2.0f;
    h.scl_inter = 1.0f;
    const std::int16_t raw = 3;
    const auto bytes = header_bytes(h, {reinterpret_cast<const std::uint8_t*>(&raw), sizeof(raw)});
    CHECK(decode_nifti(bytes).values[0] == 7.0);
  }

  TEST_CASE("slope 0 means unscaled") {
    NiftiHeader h;
    h.dims = {2, 1, 1};
    h.datatype = NiftiDatatype::UInt8;
    h.scl_slope = 0.0f;
    h.scl_inter = 5.0f;
    const std::uint8_t raw[2] = {4, 9};
    const auto f = decode_nifti(header_bytes(h, raw));
    CHECK(f.values[0] == 4.0);
    CHECK(f.values[1] == 9.0);
  }

  TEST_CASE("malformed headers and payloads are rejected by kind") {
    NiftiHeader h;
    h.dims = {2, 2, 2};
    h.datatype = NiftiDatatype::Float32;
    std::vector<float> vals(8, 1.0f);
    const auto good = header_bytes(h, {reinterpret_cast<const std::uint8_t*>(vals.data()), vals.size() * 4});
    CHECK_FALSE(error_kind([&] { decode_nifti(good); }));

    auto bad_size = good;
    bad_size[0] = 0x10;
    CHECK(error_kind([&] { decode_nifti(bad_size); }) == ErrorKind::Format);

    auto bad_magic = good;
    bad_magic[344] = 'x';
    CHECK(error_kind([&] { decode_nifti(bad_magic); }) == ErrorKind::Format);

    auto bad_type = good;
    const std::int16_t float64 = 64;
    std::memcpy(bad_type.data() + 70, &float64, 2);
    CHECK(error_kind([&] { decode_nifti(bad_type); }) == ErrorKind::Unsupported);

    auto short_payload = good;
    short_payload.resize(short_payload.size() - 3);
    CHECK(error_kind([&] { decode_nifti(short_payload); }) == ErrorKind::Truncation);

    CHECK(error_kind([&] { decode_nifti(std::vector<std::uint8_t>(100, 0)); }) == ErrorKind::Format);
  }

  TEST_CASE("byte-swapped headers decode") {
    NiftiHeader h;
    h.dims = {2, 1, 1};
    h.datatype = NiftiDatatype::Int16;
    h.scl_slope = 1.0f;
    const std::int16_t raw[2] = {0x0102, -2};
    auto bytes = header_bytes(h, {reinterpret_cast<const std::uint8_t*>(raw), sizeof(raw)});
    // Swap every header field we read plus the payload.
    const auto swap = [&](std::size_t off, std::size_t n) { std::reverse(bytes.begin() + long(off), bytes.begin() + long(off + n)); };
    swap(0, 4);
    for (std::size_t i = 0; i < 8; ++i) swap(40 + 2 * i, 2);
    swap(70, 2);
    swap(72, 2);
    for (std::size_t i = 0; i < 8; ++i) swap(76 + 4 * i, 4);
    swap(108, 4);
    swap(112, 4);
    swap(116, 4);
    swap(252, 2);
    swap(254, 2);
    for (std::size_t i = 0; i < 6; ++i) swap(256 + 4 * i, 4);
    for (std::size_t i = 0; i < 12; ++i) swap(280 + 4 * i, 4);
    swap(352, 2);
    swap(354, 2);
    const NiftiFile f = decode_nifti(bytes);
    CHECK(f.header.byte_swapped);
    CHECK(f.values[0] == 0x0102);
    CHECK(f.values[1] == -2);
  }

  TEST_CASE("empty volumes are refused before writing") {
    testing::TempDir dir("nifti_empty");
    CHECK(error_kind([&] { save_nifti(Volume(Eigen::Array3i(0, 3, 3)), dir / "e.nii"); }) == ErrorKind::Input);
    CHECK_FALSE(fs::exists(dir / "e.nii"));
  }

  TEST_CASE("integer targets reject non-integral values") {
    testing::TempDir dir("nifti_target");
    Volume v(Eigen::Array3i(1, 1, 1));
    v.voxels[0] = 1.5f;
    save_nifti(v, dir / "v.nii");
    CHECK(error_kind([&] { load_nifti<std::uint8_t>(dir / "v.nii"); }) == ErrorKind::Unsupported);
  }

  TEST_CASE("missing files report not found") {
    CHECK(error_kind([] { read_nifti("/nonexistent/x.nii"); }) == ErrorKind::NotFound);
  }

  TEST_CASE("min-max normalization") {
    Volume v(Eigen::Array3i(3, 1, 1));
    v.voxels << 2.0f, 4.0f, 6.0f;
    const Volume n = normalize_minmax(v);
    CHECK(n.voxels[0] == 0.0f);
    CHECK(n.voxels[1] == 0.5f);
    CHECK(n.voxels[2] == 1.0f);

    Volume c(Eigen::Array3i(2, 2, 2), Eigen::Array3d::Ones(), 3.0f);
    CHECK((normalize_minmax(c).voxels == 0.0f).all());

    const Volume r = normalize_minmax(random_grid<float>({9, 8, 7}, 4, -50.0, 900.0));
    CHECK(r.voxels.minCoeff() == 0.0f);
    CHECK(r.voxels.maxCoeff() == 1.0f);
  }

  TEST_CASE("pad_to_cube centers content") {
    Volume v(Eigen::Array3i(100, 100, 100), Eigen::Array3d::Constant(0.8), 1.0f);
    const Volume p = pad_to_cube(v);
    CHECK((p.dims == 210).all());
    CHECK(p.voxels.cast<double>().sum() == 1e6);
    CHECK(p(54, 100, 100) == 0.0f);
    CHECK(p(55, 55, 55) == 1.0f);
    CHECK(p(154, 154, 154) == 1.0f);
    CHECK(p(155, 100, 100) == 0.0f);

    Volume odd(Eigen::Array3i(3, 4, 5), Eigen::Array3d::Ones(), 2.0f);
    const Volume q = pad_to_cube(odd, 6);
    // Low border gets floor((6 - n) / 2), the odd voxel goes high.
    CHECK(q(0, 0, 0) == 0.0f);
    CHECK(q(1, 1, 0) == 2.0f);
    CHECK(q(4, 4, 4) == 0.0f);
    CHECK(q.voxels.sum() == odd.voxels.sum());

    const Volume same = pad_to_cube(Volume(Eigen::Array3i::Constant(210), Eigen::Array3d::Ones(), 0.5f));
    CHECK((same.voxels == 0.5f).all());

    CHECK(error_kind([] { pad_to_cube(Volume(Eigen::Array3i(211, 1, 1))); }) == ErrorKind::Parameter);
  }

  TEST_CASE("roi slices and tissue volumes") {
    LabelMap labels(Eigen::Array3i(10, 10, 80), Eigen::Array3d::Constant(0.8));
    CHECK(roi_slice_indices(labels, Plane::Axial).empty());
    int placed = 0;
    for (int z = 40; z <= 60; ++z) labels(5, 5, z) = code(TissueClass::Ventricles), ++placed;
    for (int i = 0; i < 100 - placed; ++i) labels(i % 10, i / 10, 50) = code(TissueClass::Ventricles);
    labels(5, 5, 50) = code(TissueClass::Ventricles);
    const auto axial = roi_slice_indices(labels, Plane::Axial);
    REQUIRE(axial.size() == 21);
    CHECK(axial.front() == 40);
    CHECK(axial.back() == 60);

    LabelMap hundred(Eigen::Array3i(10, 10, 1), Eigen::Array3d::Constant(0.8), code(TissueClass::Ventricles));
    CHECK(tissue_volume(hundred, TissueClass::Ventricles) == doctest::Approx(51.2).epsilon(1e-12));
    CHECK(tissue_volume(hundred, TissueClass::WhiteMatter) == 0.0);
  }

  TEST_CASE("slice extraction and insertion are inverse") {
    const Volume v = random_grid<float>({5, 6, 7}, 5, 0.0, 1.0);
    for (Plane p : kAllPlanes) {
      Volume w = v.like<float>();
      for (int i = 0; i < slice_count(v, p); ++i) insert_slice(w, p, i, extract_slice(v, p, i));
      CHECK((w.voxels == v.voxels).all());
    }
    const Image2 axial = extract_slice(v, Plane::Axial, 3);
    CHECK(axial.rows() == 6);
    CHECK(axial.cols() == 5);
    CHECK(axial(2, 4) == v(4, 2, 3));
    CHECK(error_kind([&] { extract_slice(v, Plane::Axial, 7); }) == ErrorKind::NotFound);
  }

  TEST_CASE("misaligned volume and labels") {
    CHECK(error_kind([] { require_aligned(Volume(Eigen::Array3i(2, 2, 2)), LabelMap(Eigen::Array3i(2, 2, 3))); }) ==
          ErrorKind::Alignment);
  }
}
