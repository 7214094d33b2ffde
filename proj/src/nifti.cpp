#include "hemosynth/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace hemosynth {
namespace {

// Byte offsets of the NIfTI-1 header fields we touch.
constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

template <typename T>
T byteswap_value(T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t off) const {
    T v;
    std::memcpy(&v, bytes_.data() + off, sizeof(T));
    return swap_ ? byteswap_value(v) : v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

template <typename T>
void put(std::vector<std::uint8_t>& buf, std::size_t off, T v) {
  std::memcpy(buf.data() + off, &v, sizeof(T));
}

std::size_t bytes_per_voxel(NiftiDatatype t) {
  switch (t) {
    case NiftiDatatype::UInt8: return 1;
    case NiftiDatatype::Int16: return 2;
    case NiftiDatatype::Float32: return 4;
  }
  return 0;
}

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

}  // namespace

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  // windowBits 15 + 16 selects the gzip wrapper; zlib writes mtime 0, so output is reproducible.
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(ErrorKind::Write, "deflateInit2 failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, uLong(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = uInt(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = uInt(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorKind::Write, "gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(ErrorKind::Format, "inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = uInt(bytes.size());
  for (;;) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    const int rc = inflate(&zs, Z_NO_FLUSH);
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (rc == Z_STREAM_END) break;
    // Input exhausted before the end of stream: keep what decoded, the payload check reports it.
    if (rc == Z_BUF_ERROR) break;
    if (rc != Z_OK) {
      inflateEnd(&zs);
      throw Error(ErrorKind::Format, "corrupt gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

NiftiFile decode_nifti(std::span<const std::uint8_t> raw) {
  std::vector<std::uint8_t> inflated;
  bool gz = is_gzip(raw);
  std::span<const std::uint8_t> bytes = raw;
  if (gz) {
    inflated = gzip_decompress(raw);
    bytes = inflated;
  }
  if (bytes.size() < kHeaderSize) throw Error(ErrorKind::Format, "file shorter than a NIfTI-1 header");

  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  bool swap = false;
  if (sizeof_hdr != 348) {
    if (byteswap_value(sizeof_hdr) != 348) throw Error(ErrorKind::Format, "sizeof_hdr != 348");
    swap = true;
  }
  if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0)
    throw Error(ErrorKind::Format, "bad magic (only single-file n+1 is supported)");

  HeaderReader rd(bytes, swap);
  NiftiFile f;
  NiftiHeader& h = f.header;
  h.byte_swapped = swap;
  h.gzipped = gz;
  h.ndim = rd.get<std::int16_t>(kOffDim);
  if (h.ndim != 2 && h.ndim != 3) throw Error(ErrorKind::Unsupported, "dim[0] must be 2 or 3");
  for (int a = 0; a < 3; ++a) {
    const int d = a < h.ndim ? rd.get<std::int16_t>(kOffDim + 2 * (a + 1)) : 1;
    if (d <= 0) throw Error(ErrorKind::Format, "non-positive dimension");
    h.dims[a] = d;
    const float s = rd.get<float>(kOffPixdim + 4 * (a + 1));
    h.spacing[a] = (a < h.ndim && s > 0.0f) ? double(s) : 1.0;
  }
  const auto dt = rd.get<std::int16_t>(kOffDatatype);
  if (dt != 2 && dt != 4 && dt != 16) throw Error(ErrorKind::Unsupported, "datatype " + std::to_string(dt));
  h.datatype = NiftiDatatype(dt);
  h.scl_slope = rd.get<float>(kOffSclSlope);
  h.scl_inter = rd.get<float>(kOffSclInter);
  const float vox_offset = rd.get<float>(kOffVoxOffset);
  if (!(vox_offset >= float(kHeaderSize))) throw Error(ErrorKind::Format, "vox_offset inside header");
  h.vox_offset = std::size_t(vox_offset);

  Orientation& o = h.orientation;
  o.qfac = rd.get<float>(kOffPixdim);
  o.qform_code = rd.get<std::int16_t>(kOffQformCode);
  o.sform_code = rd.get<std::int16_t>(kOffSformCode);
  for (int i = 0; i < 3; ++i) {
    o.quatern[i] = rd.get<float>(kOffQuatern + 4 * i);
    o.qoffset[i] = rd.get<float>(kOffQoffset + 4 * i);
    for (int j = 0; j < 4; ++j) o.srow(i, j) = rd.get<float>(kOffSrow + 16 * i + 4 * j);
  }

  const std::size_t n = std::size_t(h.dims.cast<std::size_t>().prod());
  const std::size_t bpv = bytes_per_voxel(h.datatype);
  if (bytes.size() < h.vox_offset + n * bpv)
    throw Error(ErrorKind::Truncation, "voxel payload holds " +
                                           std::to_string(bytes.size() > h.vox_offset ? bytes.size() - h.vox_offset : 0) +
                                           " of " + std::to_string(n * bpv) + " bytes");

  HeaderReader data(bytes.subspan(h.vox_offset), swap);
  f.values.resize(Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    switch (h.datatype) {
      case NiftiDatatype::UInt8: v = data.get<std::uint8_t>(i); break;
      case NiftiDatatype::Int16: v = data.get<std::int16_t>(2 * i); break;
      case NiftiDatatype::Float32: v = data.get<float>(4 * i); break;
    }
    f.values[Eigen::Index(i)] = v;
  }
  if (h.scl_slope != 0.0f && std::isfinite(h.scl_slope) &&
      !(h.scl_slope == 1.0f && h.scl_inter == 0.0f))
    f.values = f.values * double(h.scl_slope) + double(h.scl_inter);
  return f;
}

NiftiFile read_nifti(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_nifti(bytes);
}

std::vector<std::uint8_t> encode_nifti(const NiftiHeader& h, std::span<const std::uint8_t> payload, bool gzip) {
  static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
  const std::size_t n = std::size_t(h.dims.cast<std::size_t>().prod());
  if (payload.size() != n * bytes_per_voxel(h.datatype)) throw Error(ErrorKind::Write, "payload size mismatch");

  constexpr std::size_t kVoxOffset = 352;
  std::vector<std::uint8_t> buf(kVoxOffset + payload.size(), 0);
  put<std::int32_t>(buf, 0, 348);
  put<std::int16_t>(buf, kOffDim, std::int16_t(h.ndim));
  for (int a = 0; a < 7; ++a) put<std::int16_t>(buf, kOffDim + 2 * (a + 1), std::int16_t(a < 3 ? h.dims[a] : 1));
  put<std::int16_t>(buf, kOffDatatype, std::int16_t(h.datatype));
  put<std::int16_t>(buf, kOffBitpix, std::int16_t(8 * bytes_per_voxel(h.datatype)));
  put<float>(buf, kOffPixdim, h.orientation.qfac);
  for (int a = 0; a < 3; ++a) put<float>(buf, kOffPixdim + 4 * (a + 1), float(h.spacing[a]));
  put<float>(buf, kOffVoxOffset, float(kVoxOffset));
  put<float>(buf, kOffSclSlope, h.scl_slope);
  put<float>(buf, kOffSclInter, h.scl_inter);
  buf[kOffXyztUnits] = 2;  // mm
  const Orientation& o = h.orientation;
  put<std::int16_t>(buf, kOffQformCode, o.qform_code);
  put<std::int16_t>(buf, kOffSformCode, o.sform_code);
  for (int i = 0; i < 3; ++i) {
    put<float>(buf, kOffQuatern + 4 * i, o.quatern[i]);
    put<float>(buf, kOffQoffset + 4 * i, o.qoffset[i]);
    for (int j = 0; j < 4; ++j) put<float>(buf, kOffSrow + 16 * i + 4 * j, o.srow(i, j));
  }
  std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);
  std::copy(payload.begin(), payload.end(), buf.begin() + kVoxOffset);
  return gzip ? gzip_compress(buf) : buf;
}

bool wants_gzip(const std::filesystem::path& path) { return path.extension() == ".gz"; }

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Write, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw Error(ErrorKind::Write, "short write to " + path.string());
}

}  // namespace hemosynth
