#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hemosynth/types.hpp"

namespace hemosynth {

/// One fetus in a case manifest. Paths are absolute once loaded.
struct CaseRecord {
  std::string id;
  std::filesystem::path volume_path;
  std::filesystem::path labelmap_path;
  std::optional<std::filesystem::path> lesion_mask_path;
  std::optional<PapileGrade> grade;
  Split split = Split::Train;
  Diagnosis diagnosis = Diagnosis::NotGmhIvh;

  bool is_normal() const { return diagnosis == Diagnosis::NotGmhIvh; }
};

/// Reads {"cases": [...]}; relative paths resolve against the manifest's directory.
/// Set `check_files` to false to skip the readability check.
std::vector<CaseRecord> load_manifest(const std::filesystem::path& path, bool check_files = true);

/// Writes paths relative to the manifest's directory when they lie beneath it.
void save_manifest(const std::filesystem::path& path, const std::vector<CaseRecord>& cases);

const CaseRecord& find_case(const std::vector<CaseRecord>& cases, const std::string& id);

}  // namespace hemosynth
