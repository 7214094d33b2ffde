#pragma once

#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "hemosynth/errors.hpp"
#include "hemosynth/grid.hpp"
#include "hemosynth/rng.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    const auto stamp = hemosynth::derive_seed(std::uint64_t(::getpid()), {std::uint64_t(++counter)});
    path_ = fs::temp_directory_path() / ("hemosynth_" + tag + "_" + std::to_string(stamp % 1000000007ull));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Runs `f` and reports the ErrorKind it threw, or nothing.
template <typename F>
std::optional<hemosynth::ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const hemosynth::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace testing
