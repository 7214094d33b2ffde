#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace hemosynth {

/// Tissue classes of the label maps. Codes are the on-disk values.
enum class TissueClass : std::uint8_t {
  Background = 0,
  ExternalCSF = 1,
  GrayMatter = 2,
  WhiteMatter = 3,
  Ventricles = 4,
  Cerebellum = 5,
  DeepGrayMatter = 6,
  BrainstemSpinalCord = 7,
  CorpusCallosum = 8,
};

inline constexpr int kTissueClassCount = 9;

constexpr std::uint8_t code(TissueClass c) { return static_cast<std::uint8_t>(c); }
constexpr bool is_tissue_code(int v) { return v >= 0 && v < kTissueClassCount; }
std::string_view to_string(TissueClass c);

enum class Plane { Axial, Coronal, Sagittal };

inline constexpr std::array<Plane, 3> kAllPlanes = {Plane::Axial, Plane::Coronal, Plane::Sagittal};

std::string_view to_string(Plane p);
std::optional<Plane> parse_plane(std::string_view s);

/// Axis (0 = x, 1 = y, 2 = z) the slices of a plane are stacked along.
constexpr int normal_axis(Plane p) {
  switch (p) {
    case Plane::Axial: return 2;
    case Plane::Coronal: return 1;
    case Plane::Sagittal: return 0;
  }
  return 2;
}

/// Volume axes mapped onto slice rows and columns.
constexpr int row_axis(Plane p) { return p == Plane::Axial ? 1 : 2; }
constexpr int col_axis(Plane p) { return p == Plane::Sagittal ? 1 : 0; }

enum class PapileGrade { I = 1, II = 2, III = 3, IV = 4 };

std::string_view to_string(PapileGrade g);
std::optional<PapileGrade> parse_grade(std::string_view s);

enum class Diagnosis { GmhIvh, NotGmhIvh };

std::string_view to_string(Diagnosis d);
std::optional<Diagnosis> parse_diagnosis(std::string_view s);

enum class Split { Train, ValidationInternal, ValidationExternal };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

}  // namespace hemosynth
