#include "hemosynth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hemosynth/errors.hpp"
#include "hemosynth/log.hpp"
#include "hemosynth/nifti.hpp"
#include "hemosynth/parallel.hpp"
#include "hemosynth/rng.hpp"
#include "hemosynth/stats.hpp"
#include "hemosynth/volume_ops.hpp"

namespace hemosynth {

namespace fs = std::filesystem;
using nlohmann::json;

std::string HeatSource::label() const { return directory ? "dir:" + directory->string() : "reference"; }

HeatSource parse_heat_source(std::string_view text) {
  if (text == "reference") return {};
  if (text.starts_with("dir:") && text.size() > 4) return {fs::path(std::string(text.substr(4)))};
  throw Error(ErrorKind::Parameter, "heat source must be 'reference' or 'dir:PATH', got '" + std::string(text) + "'");
}

LoadedCase load_case(const CaseRecord& record) {
  LoadedCase c{record, normalize_minmax(load_nifti<float>(record.volume_path)),
               load_nifti<std::uint8_t>(record.labelmap_path)};
  require_aligned(c.volume, c.labels);
  return c;
}

Volume case_heat_volume(const LoadedCase& c, const HeatSource& source, const ReferenceScorerParams& params) {
  if (source.is_reference()) return reference_heat_volume(c.volume, c.labels, params);
  for (const char* ext : {".nii.gz", ".nii"}) {
    const fs::path p = *source.directory / (c.record.id + ext);
    if (fs::exists(p)) return load_external_heatmap(p, c.volume.dims).heat;
  }
  throw Error(ErrorKind::NotFound, "no heatmap for case " + c.record.id + " under " + source.directory->string());
}

// ---------------------------------------------------------------------------
// phantom

PhantomSetOptions benchmark_phantom_options() {
  PhantomSetOptions o;
  o.lesion.attenuation_lo = 0.15;
  o.lesion.attenuation_hi = 0.30;
  o.lesion.threshold_lo = 150.0;
  o.lesion.threshold_hi = 190.0;
  o.lesion.boundary_blur_sigma = 1.0;
  o.lesion_params.min_voxels = 300;
  return o;
}

std::string phantom_case_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phantom_%03d", index);
  return buf;
}

std::vector<std::string> lesioned_case_ids(const std::vector<std::string>& ids, std::uint64_t seed, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorKind::Parameter, "lesion fraction outside [0, 1]");
  const auto k = std::size_t(std::lround(fraction * double(ids.size())));
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  for (const auto& id : ids) ranked.emplace_back(derive_seed(seed, {hash_string(id), 2}), id);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

PhantomCase generate_phantom_case(const PhantomSetOptions& o, const std::string& id, bool lesioned) {
  const std::uint64_t key = hash_string(id);
  PhantomParams p = o.phantom;
  Rng rng(derive_seed(o.seed, {key, 0}));
  for (int a = 0; a < 3; ++a) p.ventricle_axes[a] *= rng.uniform(1.0 - o.geometry_jitter, 1.0 + o.geometry_jitter);
  for (int a = 0; a < 3; ++a) p.dgm_axes[a] *= rng.uniform(1.0 - o.geometry_jitter, 1.0 + o.geometry_jitter);
  p.seed = derive_seed(o.seed, {key, 1});
  Phantom ph = generate_phantom(p);

  PhantomCase out{{}, std::move(ph.volume), std::move(ph.labels), std::nullopt};
  out.record.id = id;
  if (lesioned) {
    InjectedLesion les = inject_lesion_3d(out.volume, out.labels, o.lesion, derive_seed(o.seed, {key, 3}), o.lesion_params);
    out.volume = std::move(les.volume);
    out.lesion = std::move(les.mask);
    out.record.grade = grade_for_scenario(les.scenario);
    out.record.diagnosis = Diagnosis::GmhIvh;
    out.record.split = Split::ValidationInternal;
  }
  return out;
}

fs::path cmd_phantom(const PhantomSetOptions& o) {
  if (o.count < 1) throw Error(ErrorKind::Parameter, "phantom count must be >= 1");
  if (!(o.geometry_jitter >= 0.0 && o.geometry_jitter < 1.0))
    throw Error(ErrorKind::Parameter, "geometry jitter outside [0, 1)");
  o.phantom.validate();
  o.lesion.validate();

  std::vector<std::string> ids;
  for (int i = 0; i < o.count; ++i) ids.push_back(phantom_case_id(i));
  const auto lesioned = lesioned_case_ids(ids, o.seed, o.lesion_fraction);

  fs::create_directories(o.out / "cases");
  std::vector<CaseRecord> records(ids.size());
  parallel_for(ids.size(), o.threads, [&](std::size_t i) {
    const std::string& id = ids[i];
    PhantomCase c = generate_phantom_case(o, id, std::binary_search(lesioned.begin(), lesioned.end(), id));
    CaseRecord& rec = records[i];
    rec = c.record;
    rec.volume_path = o.out / "cases" / (id + "_t2w.nii.gz");
    rec.labelmap_path = o.out / "cases" / (id + "_labels.nii.gz");
    if (c.lesion) {
      rec.lesion_mask_path = o.out / "cases" / (id + "_lesion.nii.gz");
      save_nifti(*c.lesion, *rec.lesion_mask_path);
    }
    save_nifti(c.volume, rec.volume_path);
    save_nifti(c.labels, rec.labelmap_path);
  });
  const fs::path manifest = o.out / "manifest.json";
  save_manifest(manifest, records);
  return manifest;
}

// ---------------------------------------------------------------------------
// synth

ExportSummary cmd_synth(const fs::path& manifest, const SynthesisConfig& config, const fs::path& out_dir,
                        unsigned threads) {
  return export_training_set(load_manifest(manifest), config, out_dir, threads);
}

// ---------------------------------------------------------------------------
// score

json score_record(const AnomalyScore& s) {
  json r;
  r["case"] = s.case_id;
  r["level"] = s.level == ScoreLevel::Case ? "case" : "slice";
  r["plane"] = s.plane ? json(std::string(to_string(*s.plane))) : json(nullptr);
  r["index"] = s.index ? json(*s.index) : json(nullptr);
  r["score"] = s.value;
  return r;
}

ScoreRun cmd_score(const std::vector<CaseRecord>& cases, const HeatSource& source, unsigned threads) {
  std::vector<json> per_case(cases.size());
  std::vector<char> failed(cases.size(), 0);
  parallel_for(cases.size(), threads, [&](std::size_t i) {
    json& out = per_case[i];
    out = json::array();
    try {
      const LoadedCase c = load_case(cases[i]);
      const CaseScores s = score_case(c.record.id, case_heat_volume(c, source), c.labels);
      out.push_back(score_record(s.case_score));
      for (const AnomalyScore& a : s.slice_scores) out.push_back(score_record(a));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotFound && e.kind() != ErrorKind::Alignment) throw;
      log(LogLevel::Warn, e.what());
      out.push_back({{"case", cases[i].id}, {"level", "error"}, {"error", e.what()}});
      failed[i] = 1;
    }
  });
  ScoreRun run;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    for (auto& r : per_case[i]) run.records.push_back(std::move(r));
    run.errors += failed[i];
  }
  return run;
}

// ---------------------------------------------------------------------------
// eval

namespace {

std::string slice_key(const std::string& id, const std::string& plane, int index) {
  return id + "/" + plane + "/" + std::to_string(index);
}

json ci_json(const stats::MetricWithCI& m) { return {{"estimate", m.estimate}, {"ci_lo", m.lo}, {"ci_hi", m.hi}}; }

std::optional<double> resampled(std::span<const std::size_t> idx, const LevelData& d,
                                double (*metric)(std::span<const double>, std::span<const int>)) {
  std::vector<double> s(idx.size());
  std::vector<int> l(idx.size());
  bool pos = false, neg = false;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    s[k] = d.scores[idx[k]];
    l[k] = d.labels[idx[k]];
    (l[k] ? pos : neg) = true;
  }
  if (!pos || !neg) return std::nullopt;
  return metric(s, l);
}

double auroc_of(std::span<const double> s, std::span<const int> l) { return stats::roc_auroc(s, l).auroc; }
double aupr_of(std::span<const double> s, std::span<const int> l) { return stats::pr_aupr(s, l).aupr; }

// Reorders `compare` to the key order of `base`.
LevelData align(const LevelData& base, const LevelData& compare) {
  std::map<std::string, double> by_key;
  for (std::size_t i = 0; i < compare.keys.size(); ++i) by_key[compare.keys[i]] = compare.scores[i];
  if (by_key.size() != base.keys.size()) throw Error(ErrorKind::Input, "compared score files cover different units");
  LevelData out = base;
  for (std::size_t i = 0; i < base.keys.size(); ++i) {
    const auto it = by_key.find(base.keys[i]);
    if (it == by_key.end()) throw Error(ErrorKind::Input, "compared score file lacks " + base.keys[i]);
    out.scores[i] = it->second;
  }
  return out;
}

}  // namespace

EvalInputs eval_inputs(const json& scores, const std::vector<CaseRecord>& cases) {
  if (!scores.is_array()) throw Error(ErrorKind::Format, "scores must be a JSON array");
  std::map<std::string, const CaseRecord*> by_id;
  for (const CaseRecord& c : cases) by_id[c.id] = &c;
  std::map<std::string, std::optional<Mask3>> lesion_masks;

  EvalInputs in;
  for (const json& r : scores) {
    const std::string id = r.at("case").get<std::string>();
    const std::string level = r.at("level").get<std::string>();
    if (level == "error") continue;
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorKind::Input, "scored case " + id + " is not in the manifest");
    const CaseRecord& rec = *it->second;
    const double score = r.at("score").get<double>();
    if (level == "case") {
      in.case_level.keys.push_back(id);
      in.case_level.scores.push_back(score);
      in.case_level.labels.push_back(rec.is_normal() ? 0 : 1);
      continue;
    }
    if (level != "slice") throw Error(ErrorKind::Format, "unknown score level '" + level + "'");
    const std::string plane_name = r.at("plane").get<std::string>();
    const auto plane = parse_plane(plane_name);
    if (!plane) throw Error(ErrorKind::Format, "unknown plane '" + plane_name + "'");
    const int index = r.at("index").get<int>();
    int label = 0;
    if (!rec.is_normal()) {
      auto [mit, inserted] = lesion_masks.try_emplace(id);
      if (inserted && rec.lesion_mask_path) mit->second = load_nifti<std::uint8_t>(*rec.lesion_mask_path);
      if (!mit->second) continue;
      label = (extract_slice(*mit->second, *plane, index) != 0).any() ? 1 : 0;
    }
    in.slice_level.keys.push_back(slice_key(id, plane_name, index));
    in.slice_level.scores.push_back(score);
    in.slice_level.labels.push_back(label);
  }
  return in;
}

json evaluate_level(const LevelData& d, const LevelData* compare, const EvalOptions& o) {
  json block;
  std::size_t positives = 0;
  for (int l : d.labels) positives += std::size_t(l);
  block["n"] = d.labels.size();
  block["positives"] = positives;
  if (positives == 0 || positives == d.labels.size()) {
    block["error"] = "both classes are needed for evaluation";
    return block;
  }

  const auto roc = stats::roc_auroc(d.scores, d.labels);
  const auto auroc = stats::bootstrap_ci([&](auto idx) { return resampled(idx, d, auroc_of); }, d.labels.size(),
                                         o.resamples, 0.95, derive_seed(o.seed, {1}));
  const auto aupr = stats::bootstrap_ci([&](auto idx) { return resampled(idx, d, aupr_of); }, d.labels.size(),
                                        o.resamples, 0.95, derive_seed(o.seed, {2}));
  const std::size_t negatives = d.labels.size() - positives;
  const double sens = stats::sensitivity_at_specificity(roc.curve, o.target);
  const double spec = stats::specificity_at_sensitivity(roc.curve, o.target);
  const auto sens_ci = stats::wilson_interval(std::size_t(std::lround(sens * double(positives))), positives);
  const auto spec_ci = stats::wilson_interval(std::size_t(std::lround(spec * double(negatives))), negatives);

  const auto youden = stats::youden_threshold(d.scores, d.labels);
  const auto preds = stats::predict(d.scores, youden.threshold);
  const auto cm = stats::confusion_matrix(preds, d.labels);

  block["auroc"] = ci_json(auroc);
  block["aupr"] = ci_json(aupr);
  block["sens_at_spec"] = ci_json(sens_ci);
  block["sens_at_spec"]["target_specificity"] = o.target;
  block["spec_at_sens"] = ci_json(spec_ci);
  block["spec_at_sens"]["target_sensitivity"] = o.target;
  block["youden"] = {{"threshold", youden.threshold}, {"j", youden.j}};
  block["confusion_matrix"] = {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
  block["bootstrap"] = {{"resamples", o.resamples}, {"redraws", auroc.redraws + aupr.redraws}};

  json comparisons = json::array();
  if (compare) {
    const LevelData other = align(d, *compare);
    const auto entry = [&](const char* metric, const stats::ComparisonResult& r) {
      comparisons.push_back({{"metric", metric},
                             {"vs", o.compare_name},
                             {"method", std::string(stats::to_string(r.method))},
                             {"statistic", r.statistic},
                             {"p", r.p_value}});
    };
    entry("auroc", stats::delong_test(d.scores, other.scores, d.labels));
    entry("aupr", stats::bootstrap_compare_aupr(d.scores, other.scores, d.labels, o.resamples, derive_seed(o.seed, {3})));
    const auto other_youden = stats::youden_threshold(other.scores, other.labels);
    entry("youden_operating_point",
          stats::mcnemar_test(preds, stats::predict(other.scores, other_youden.threshold), d.labels));
  }
  block["comparisons"] = comparisons;
  return block;
}

json cmd_eval(const json& scores, const std::vector<CaseRecord>& cases, const json* compare, const EvalOptions& o) {
  const EvalInputs base = eval_inputs(scores, cases);
  std::optional<EvalInputs> other;
  if (compare) other = eval_inputs(*compare, cases);
  json report;
  report["case"] = evaluate_level(base.case_level, other ? &other->case_level : nullptr, o);
  report["slice"] = evaluate_level(base.slice_level, other ? &other->slice_level : nullptr, o);
  return report;
}

// ---------------------------------------------------------------------------
// segment

CaseSegmentation cmd_segment(const CaseRecord& record, const HeatSource& source, double threshold, bool refine,
                             const std::optional<fs::path>& out, const RegionGrowParams& params) {
  const LoadedCase c = load_case(record);
  CaseSegmentation seg =
      segment_case(record.id, c.volume, c.labels, case_heat_volume(c, source), threshold, refine, params);
  if (out) save_nifti(seg.mask, *out);
  return seg;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace hemosynth
