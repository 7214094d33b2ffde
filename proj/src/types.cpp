#include "hemosynth/types.hpp"

namespace hemosynth {

std::string_view to_string(TissueClass c) {
  switch (c) {
    case TissueClass::Background: return "background";
    case TissueClass::ExternalCSF: return "external_csf";
    case TissueClass::GrayMatter: return "gray_matter";
    case TissueClass::WhiteMatter: return "white_matter";
    case TissueClass::Ventricles: return "ventricles";
    case TissueClass::Cerebellum: return "cerebellum";
    case TissueClass::DeepGrayMatter: return "deep_gray_matter";
    case TissueClass::BrainstemSpinalCord: return "brainstem_spinal_cord";
    case TissueClass::CorpusCallosum: return "corpus_callosum";
  }
  return "unknown";
}

std::string_view to_string(Plane p) {
  switch (p) {
    case Plane::Axial: return "axial";
    case Plane::Coronal: return "coronal";
    case Plane::Sagittal: return "sagittal";
  }
  return "axial";
}

std::optional<Plane> parse_plane(std::string_view s) {
  for (Plane p : kAllPlanes)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

std::string_view to_string(PapileGrade g) {
  switch (g) {
    case PapileGrade::I: return "I";
    case PapileGrade::II: return "II";
    case PapileGrade::III: return "III";
    case PapileGrade::IV: return "IV";
  }
  return "I";
}

std::optional<PapileGrade> parse_grade(std::string_view s) {
  if (s == "I") return PapileGrade::I;
  if (s == "II") return PapileGrade::II;
  if (s == "III") return PapileGrade::III;
  if (s == "IV") return PapileGrade::IV;
  return std::nullopt;
}

std::string_view to_string(Diagnosis d) { return d == Diagnosis::GmhIvh ? "GMH-IVH" : "NotGMH-IVH"; }

std::optional<Diagnosis> parse_diagnosis(std::string_view s) {
  if (s == "GMH-IVH") return Diagnosis::GmhIvh;
  if (s == "NotGMH-IVH") return Diagnosis::NotGmhIvh;
  return std::nullopt;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::ValidationInternal: return "validation-internal";
    case Split::ValidationExternal: return "validation-external";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation-internal") return Split::ValidationInternal;
  if (s == "validation-external") return Split::ValidationExternal;
  return std::nullopt;
}

}  // namespace hemosynth
