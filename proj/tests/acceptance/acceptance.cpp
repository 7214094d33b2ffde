// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: acceptance [criterion...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hemosynth/errors.hpp"
#include "hemosynth/image_ops.hpp"
#include "hemosynth/nifti.hpp"
#include "hemosynth/phantom.hpp"
#include "hemosynth/pipeline.hpp"
#include "hemosynth/rng.hpp"
#include "hemosynth/service.hpp"
#include "hemosynth/stats.hpp"
#include "hemosynth/synthesis.hpp"
#include "hemosynth/volume_ops.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a macro named _res.
#include <httplib.h>

namespace fs = std::filesystem;
using namespace hemosynth;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hemosynth_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// Independent oracles

double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] == 1 && l[j] == 0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

// Average precision by counting at every distinct threshold, highest first.
double exhaustive_ap(const std::vector<double>& s, const std::vector<int>& l) {
  std::vector<double> t = s;
  std::sort(t.begin(), t.end(), std::greater<>());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  std::size_t npos = 0;
  for (int v : l) npos += std::size_t(v);
  double ap = 0.0, prev = 0.0;
  for (double th : t) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= th) (l[i] ? tp : fp)++;
    const double recall = double(tp) / double(npos);
    const double precision = double(tp) / double(tp + fp);
    ap += (recall - prev) * precision;
    prev = recall;
  }
  return ap;
}

Outcome metric_oracles() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(20240601);
  double worst_auc = 0.0, worst_delong = 0.0;
  int ap_mismatch = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const int n = rng.uniform_int(2, 200);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> l(static_cast<std::size_t>(n));
    const int decimals = rng.uniform_int(1, 3);  // coarse rounding produces ties
    const double scale = std::pow(10.0, decimals);
    for (int i = 0; i < n; ++i) {
      l[std::size_t(i)] = rng.bernoulli(0.4);
      s[std::size_t(i)] = std::round((rng.normal() + 0.8 * l[std::size_t(i)]) * scale) / scale;
    }
    l[0] = 1;
    l[1] = 0;
    const double auc = stats::roc_auroc(s, l).auroc;
    worst_auc = std::max(worst_auc, std::abs(auc - pairwise_auroc(s, l)));
    worst_delong = std::max(worst_delong, std::abs(stats::delong_auc(s, l) - auc));
    ap_mismatch += stats::pr_aupr(s, l).aupr != exhaustive_ap(s, l);
  }
  o.detail << "max|AUROC-pairwise|=" << worst_auc << " AUPR mismatches=" << ap_mismatch
           << " max|DeLong-AUROC|=" << worst_delong;
  o.require(worst_auc < 1e-9, "trapezoid AUROC vs pairwise within 1e-9");
  o.require(ap_mismatch == 0, "step AUPR equals exhaustive enumeration exactly");
  o.require(worst_delong < 1e-12, "DeLong AUC equals roc_auroc within 1e-12");

  const auto w = stats::wilson_interval(8, 10, 0.95);
  o.detail << " wilson=(" << w.lo << "," << w.hi << ")";
  o.require(std::abs(w.lo - 0.490) <= 0.001 && std::abs(w.hi - 0.943) <= 0.001, "Wilson (0.490, 0.943)");

  const double mc = stats::mcnemar_exact_p(10, 2);
  o.detail << " mcnemar=" << mc;
  o.require(std::abs(mc - 158.0 / 4096.0) <= 1e-12, "McNemar exact p = 158/4096");

  const std::vector<double> d{1, 2, 3};
  const double wp = stats::wilcoxon_signed_rank(d).p_value;
  o.detail << " wilcoxon=" << wp;
  o.require(wp == 0.25, "Wilcoxon [1,2,3] p = 0.25 exactly");
  o.require(seconds_since(t0) < 10.0, "runtime < 10 s");
  return o;
}

// ---------------------------------------------------------------------------

struct SynthRun {
  std::vector<int> scenarios;
  std::size_t failures = 0;
  std::size_t containment_violations = 0;
  std::size_t brightening_violations = 0;
  std::size_t ratio_violations = 0;
  std::size_t samples_with_core = 0;
  std::uint64_t digest = 1469598103934665603ull;
};

void fold(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ull;
}

SynthRun synthesize_many(const std::vector<Slice2D>& slices, std::size_t target, std::uint64_t seed) {
  SynthRun run;
  const SynthesisConfig config;
  for (std::size_t k = 0; run.scenarios.size() < target; ++k) {
    const Slice2D& slice = slices[k % slices.size()];
    Rng rng(derive_seed(seed, {k}));
    PseudoLesionSample s;
    try {
      s = synthesize_pseudo_lesion(slice, config, rng);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SynthesisFailed) throw;
      ++run.failures;
      continue;
    }
    run.scenarios.push_back(int(s.scenario));
    const Mask2 allowed = brain_mask(*slice.labels) && s.region;
    if ((s.lesion_mask && !allowed).any() || !s.lesion_mask.any()) ++run.containment_violations;
    if (s.scenario == HemorrhageScenario::HemisphericWM &&
        (s.region && !class_mask(*slice.labels, TissueClass::WhiteMatter)).any())
      ++run.containment_violations;
    if ((s.image.grid > slice.grid).any()) ++run.brightening_violations;
    // Core ratio before the boundary blur: composite with the hard mask and average over it.
    const Image2 hard = composite_lesion(slice.grid, Grid2<double>(s.lesion_mask.cast<double>()), s.attenuation);
    double ratio_sum = 0.0;
    int ratio_n = 0;
    bool core = false;
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i) {
      const double before = slice.grid.data()[i];
      if (!s.lesion_mask.data()[i] || before <= 0.0) continue;
      ratio_sum += double(hard.data()[i]) / before;
      ++ratio_n;
      const double ratio = double(s.image.grid.data()[i]) / before;
      if (ratio < s.attenuation - 1e-6 || ratio > 1.0 + 1e-6) ++run.ratio_violations;
      if (s.alpha.data()[i] >= 1.0f - 1e-6f) {
        core = true;
        if (std::abs(ratio - s.attenuation) > 1e-6) ++run.ratio_violations;
      }
    }
    if (ratio_n && (ratio_sum / ratio_n < 0.3 - 1e-6 || ratio_sum / ratio_n > 0.5 + 1e-6)) ++run.ratio_violations;
    run.samples_with_core += core;
    fold(run.digest, s.image.grid.data(), std::size_t(s.image.grid.size()) * sizeof(float));
    fold(run.digest, s.lesion_mask.data(), std::size_t(s.lesion_mask.size()));
  }
  return run;
}

Outcome synthesis_properties() {
  Outcome o;
  const auto t0 = Clock::now();
  std::vector<Slice2D> slices;
  for (std::uint64_t seed : {11u, 12u}) {
    PhantomParams p;
    p.seed = seed;
    const Phantom ph = generate_phantom(p);
    const Volume v = normalize_minmax(ph.volume);
    for (Plane plane : kAllPlanes)
      for (Slice2D& s : extract_roi_slices(v, ph.labels, plane, "p" + std::to_string(seed))) slices.push_back(std::move(s));
  }
  constexpr std::size_t kSamples = 10000;
  const SynthRun a = synthesize_many(slices, kSamples, 99);
  const SynthRun b = synthesize_many(slices, kSamples, 99);

  std::array<double, 4> counts{};
  for (int sc : a.scenarios) counts[std::size_t(sc - 1)] += 1.0;
  const std::array<double, 4> expected{0.3, 0.3, 0.3, 0.1};
  double chi2 = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double e = expected[i] * double(kSamples);
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
    worst = std::max(worst, std::abs(counts[i] / double(kSamples) - expected[i]));
  }
  const double p = stats::chi_square_sf(chi2, 3);
  const double elapsed = seconds_since(t0);
  o.detail << kSamples << " samples on " << slices.size() << " slices, freq=(" << counts[0] / kSamples << ","
           << counts[1] / kSamples << "," << counts[2] / kSamples << "," << counts[3] / kSamples << ") chi2 p=" << p
           << " failures=" << a.failures << " core samples=" << a.samples_with_core << " time=" << elapsed << "s";
  o.require(worst <= 0.02, "scenario frequencies within 0.02");
  o.require(p > 0.01, "chi-square p > 0.01");
  o.require(a.containment_violations == 0, "mask inside brain and scenario region");
  o.require(a.brightening_violations == 0, "I' <= I pointwise");
  o.require(a.ratio_violations == 0, "core attenuation ratio in [0.3, 0.5]");
  o.require(a.digest == b.digest && a.scenarios == b.scenarios, "bit-identical rerun");
  o.require(elapsed < 60.0, "runtime < 60 s");
  return o;
}

// ---------------------------------------------------------------------------

Outcome phantom_benchmark() {
  Outcome o;
  const auto t0 = Clock::now();
  PhantomSetOptions opts = benchmark_phantom_options();
  opts.seed = 2024;
  opts.count = 40;
  opts.lesion_fraction = 0.25;
  std::vector<std::string> ids;
  for (int i = 0; i < opts.count; ++i) ids.push_back(phantom_case_id(i));
  const auto lesioned = lesioned_case_ids(ids, opts.seed, opts.lesion_fraction);

  std::vector<double> case_scores, slice_scores;
  std::vector<int> case_labels, slice_labels;
  struct LesionSlices {
    Volume volume;
    LabelMap labels;
    Volume heat;
    Mask3 truth;
    std::string id;
  };
  std::vector<LesionSlices> lesion_cases;

  for (const std::string& id : ids) {
    const bool les = std::binary_search(lesioned.begin(), lesioned.end(), id);
    PhantomCase c = generate_phantom_case(opts, id, les);
    const Volume volume = normalize_minmax(c.volume);
    Volume heat = reference_heat_volume(volume, c.labels);
    const CaseScores s = score_case(id, heat, c.labels);
    case_scores.push_back(s.case_score.value);
    case_labels.push_back(les);
    for (const AnomalyScore& a : s.slice_scores) {
      slice_scores.push_back(a.value);
      slice_labels.push_back(les && (extract_slice(*c.lesion, *a.plane, *a.index) != 0).any());
    }
    if (les) lesion_cases.push_back({volume, c.labels, std::move(heat), std::move(*c.lesion), id});
  }
  const double case_auc = stats::roc_auroc(case_scores, case_labels).auroc;
  const double slice_auc = stats::roc_auroc(slice_scores, slice_labels).auroc;
  const double youden = std::clamp(stats::youden_threshold(slice_scores, slice_labels).threshold, 0.0, 1.0);

  // Mean DSC over axial slices that carry ground-truth lesion.
  double dsc_thr = 0.0, dsc_ref = 0.0;
  int n_slices = 0;
  for (const LesionSlices& c : lesion_cases) {
    const CaseSegmentation thr = segment_case(c.id, c.volume, c.labels, c.heat, youden, false);
    const CaseSegmentation ref = segment_case(c.id, c.volume, c.labels, c.heat, youden, true);
    for (int z = 0; z < c.truth.dims[2]; ++z) {
      const Mask2 truth = extract_slice(c.truth, Plane::Axial, z) != 0;
      if (!truth.any()) continue;
      const Mask2 a = extract_slice(thr.mask, Plane::Axial, z) != 0;
      const Mask2 b = extract_slice(ref.mask, Plane::Axial, z) != 0;
      dsc_thr += dsc(a, truth);
      dsc_ref += dsc(b, truth);
      ++n_slices;
    }
  }
  dsc_thr /= std::max(1, n_slices);
  dsc_ref /= std::max(1, n_slices);
  const double elapsed = seconds_since(t0);
  o.detail << "case AUROC=" << case_auc << " slice AUROC=" << slice_auc << " (" << slice_scores.size() << " slices)"
           << " youden=" << youden << " DSC thresholded=" << dsc_thr << " refined=" << dsc_ref << " over " << n_slices
           << " axial lesion slices, time=" << elapsed << "s";
  o.require(case_auc >= 0.90, "case AUROC >= 0.90");
  o.require(slice_auc >= 0.85, "slice AUROC >= 0.85");
  o.require(dsc_thr >= 0.45, "thresholded DSC >= 0.45");
  o.require(dsc_ref >= 0.50, "refined DSC >= 0.50");
  o.require(dsc_ref >= dsc_thr, "refined >= thresholded");
  o.require(elapsed < 120.0, "runtime < 2 min");
  return o;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
bool round_trips(const Grid3<Scalar>& g, const fs::path& path) {
  save_nifti(g, path);
  const Grid3<Scalar> back = load_nifti<Scalar>(path);
  return back.same_shape(g) && (back.voxels == g.voxels).all() && back.orientation == g.orientation;
}

Outcome format_round_trip() {
  Outcome o;
  const fs::path dir = scratch_dir("format");
  Rng rng(5);
  const Eigen::Array3i dims(17, 11, 7);
  const Eigen::Array3d spacing(0.8, 0.9, 1.1);
  Grid3<std::uint8_t> u8(dims, spacing);
  Grid3<std::int16_t> i16(dims, spacing);
  Grid3<float> f32(dims, spacing);
  for (Eigen::Index i = 0; i < u8.size(); ++i) {
    u8.voxels[i] = std::uint8_t(rng.uniform_int(0, 255));
    i16.voxels[i] = std::int16_t(rng.uniform_int(-32768, 32767));
    f32.voxels[i] = float(rng.normal(0.0, 100.0));
  }
  int ok = 0, total = 0;
  for (const char* ext : {".nii", ".nii.gz"}) {
    total += 3;
    ok += round_trips(u8, dir / (std::string("u8") + ext));
    ok += round_trips(i16, dir / (std::string("i16") + ext));
    ok += round_trips(f32, dir / (std::string("f32") + ext));
  }
  o.detail << ok << "/" << total << " round trips voxel-identical";
  o.require(ok == total, "NIfTI round trips");

  Grid3<float> v(Eigen::Array3i(100, 90, 80), Eigen::Array3d::Constant(1.0));
  for (Eigen::Index i = 0; i < v.size(); ++i) v.voxels[i] = float(rng.uniform_int(0, 4095));  // exact in float
  const Grid3<float> padded = pad_to_cube(v);
  const double before = v.voxels.cast<double>().sum(), after = padded.voxels.cast<double>().sum();
  o.detail << "; pad sum " << before << " -> " << after;
  o.require((padded.dims == 210).all(), "padded to 210^3");
  o.require(before == after, "pad preserves intensity sum exactly");
  fs::remove_all(dir);
  return o;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = scratch_dir("determinism");
  PhantomSetOptions opts = benchmark_phantom_options();
  opts.count = 3;
  opts.seed = 77;
  opts.lesion_fraction = 0.34;

  std::vector<std::map<std::string, std::string>> phantom_trees, synth_trees;
  for (unsigned threads : {1u, 3u, 1u}) {
    const fs::path out = dir / ("phantom_t" + std::to_string(threads) + "_" + std::to_string(phantom_trees.size()));
    opts.out = out;
    opts.threads = threads;
    cmd_phantom(opts);
    phantom_trees.push_back(read_tree(out));

    std::vector<CaseRecord> normal;
    for (const CaseRecord& c : load_manifest(out / "manifest.json"))
      if (c.is_normal()) normal.push_back(c);
    save_manifest(out / "normal.json", normal);
    SynthesisConfig config;
    config.seed = 31;
    const fs::path synth_out = dir / ("synth_" + std::to_string(synth_trees.size()));
    cmd_synth(out / "normal.json", config, synth_out, threads);
    synth_trees.push_back(read_tree(synth_out));
  }
  const bool phantom_same = phantom_trees[0] == phantom_trees[1] && phantom_trees[0] == phantom_trees[2];
  const bool synth_same = synth_trees[0] == synth_trees[1] && synth_trees[0] == synth_trees[2];
  o.detail << "phantom tree " << phantom_trees[0].size() << " files, synth tree " << synth_trees[0].size()
           << " files; runs at 1, 3, 1 threads";
  o.require(phantom_trees[0].size() > 3 && synth_trees[0].size() > 3, "non-trivial trees");
  o.require(phantom_same, "cmd_phantom byte-identical");
  o.require(synth_same, "cmd_synth byte-identical");
  fs::remove_all(dir);
  return o;
}

// ---------------------------------------------------------------------------

Outcome service_consistency() {
  Outcome o;
  const fs::path dir = scratch_dir("service");
  PhantomSetOptions opts = benchmark_phantom_options();
  opts.count = 2;
  opts.seed = 5;
  opts.lesion_fraction = 0.5;
  opts.out = dir;
  const auto cases = load_manifest(cmd_phantom(opts));
  const CaseIndex index = CaseIndex::build(cases, HeatSource{});

  httplib::Server server;
  install_routes(server, index);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  int compared = 0, mismatches = 0;
  for (const CaseRecord& c : cases)
    for (double threshold : {0.0, 0.2, 0.5, 1.0})
      for (bool refine : {false, true}) {
        const nlohmann::json body{{"threshold", threshold}, {"refine", refine}};
        const auto res = client.Post("/api/cases/" + c.id + "/segment", body.dump(), "application/json");
        if (!res || res->status != 200) {
          ++mismatches;
          continue;
        }
        const double served = nlohmann::json::parse(res->body).at("volume_mm3").get<double>();
        const double offline = cmd_segment(c, HeatSource{}, threshold, refine).volume_mm3;
        mismatches += served != offline;
        ++compared;
      }
  server.stop();
  worker.join();
  o.detail << compared << " /segment responses compared with cmd_segment, " << mismatches << " mismatches";
  o.require(compared == 16 && mismatches == 0, "service volume equals cmd_segment volume exactly");
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric-oracles", metric_oracles},
      {"synthesis-properties", synthesis_properties},
      {"phantom-benchmark", phantom_benchmark},
      {"format-round-trip", format_round_trip},
      {"determinism", determinism},
      {"service-consistency", service_consistency},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    const auto t0 = Clock::now();
    Outcome r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail << "exception: " << e.what();
    }
    failed += !r.pass;
    std::printf("%s  %-22s %6.1fs  %s\n", r.pass ? "PASS" : "FAIL", name.c_str(), seconds_since(t0), r.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
