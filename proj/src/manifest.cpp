#include "hemosynth/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "hemosynth/errors.hpp"

namespace hemosynth {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string relativize(const fs::path& base, const fs::path& p) {
  const fs::path rel = p.lexically_relative(base);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

std::string require_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) throw Error(ErrorKind::Input, where + ": missing string field '" + key + "'");
  return j[key].get<std::string>();
}

}  // namespace

std::vector<CaseRecord> load_manifest(const fs::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Input, "manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object() || !doc.contains("cases") || !doc["cases"].is_array())
    throw Error(ErrorKind::Input, "manifest needs a top-level 'cases' array");

  const fs::path base = fs::absolute(path).parent_path();
  std::vector<CaseRecord> cases;
  for (const json& c : doc["cases"]) {
    CaseRecord r;
    r.id = require_string(c, "id", "case");
    const std::string where = "case " + r.id;
    r.volume_path = resolve(base, require_string(c, "volume", where));
    r.labelmap_path = resolve(base, require_string(c, "labels", where));
    if (c.contains("lesion_mask") && !c["lesion_mask"].is_null())
      r.lesion_mask_path = resolve(base, require_string(c, "lesion_mask", where));
    if (c.contains("grade") && !c["grade"].is_null()) {
      r.grade = parse_grade(require_string(c, "grade", where));
      if (!r.grade) throw Error(ErrorKind::Input, where + ": grade must be I, II, III or IV");
    }
    const auto split = parse_split(require_string(c, "split", where));
    if (!split) throw Error(ErrorKind::Input, where + ": unknown split");
    r.split = *split;
    const auto dx = parse_diagnosis(require_string(c, "diagnosis", where));
    if (!dx) throw Error(ErrorKind::Input, where + ": diagnosis must be GMH-IVH or NotGMH-IVH");
    r.diagnosis = *dx;
    if (r.lesion_mask_path && r.diagnosis != Diagnosis::GmhIvh)
      throw Error(ErrorKind::Input, where + ": lesion mask given for a case not diagnosed GMH-IVH");
    if (check_files) {
      for (const fs::path* p : {&r.volume_path, &r.labelmap_path})
        if (!fs::is_regular_file(*p)) throw Error(ErrorKind::Input, where + ": unreadable file " + p->string());
      if (r.lesion_mask_path && !fs::is_regular_file(*r.lesion_mask_path))
        throw Error(ErrorKind::Input, where + ": unreadable file " + r.lesion_mask_path->string());
    }
    cases.push_back(std::move(r));
  }
  return cases;
}

void save_manifest(const fs::path& path, const std::vector<CaseRecord>& cases) {
  const fs::path base = fs::absolute(path).parent_path();
  json arr = json::array();
  for (const CaseRecord& r : cases) {
    json c;
    c["id"] = r.id;
    c["volume"] = relativize(base, fs::absolute(r.volume_path));
    c["labels"] = relativize(base, fs::absolute(r.labelmap_path));
    c["lesion_mask"] = r.lesion_mask_path ? json(relativize(base, fs::absolute(*r.lesion_mask_path))) : json(nullptr);
    c["grade"] = r.grade ? json(std::string(to_string(*r.grade))) : json(nullptr);
    c["split"] = std::string(to_string(r.split));
    c["diagnosis"] = std::string(to_string(r.diagnosis));
    arr.push_back(std::move(c));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Write, "cannot write manifest " + path.string());
  out << json{{"cases", arr}}.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Write, "short write to " + path.string());
}

const CaseRecord& find_case(const std::vector<CaseRecord>& cases, const std::string& id) {
  for (const CaseRecord& c : cases)
    if (c.id == id) return c;
  throw Error(ErrorKind::NotFound, "no case '" + id + "' in manifest");
}

}  // namespace hemosynth
