#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemosynth/manifest.hpp"
#include "hemosynth/phantom.hpp"
#include "hemosynth/refine.hpp"
#include "hemosynth/scoring.hpp"
#include "hemosynth/synthesis.hpp"

namespace hemosynth {

/// Where heat volumes come from: the built-in reference scorer or `<dir>/<case>.nii[.gz]`.
struct HeatSource {
  std::optional<std::filesystem::path> directory;

  bool is_reference() const { return !directory; }
  std::string label() const;
};

/// "reference" or "dir:PATH".
HeatSource parse_heat_source(std::string_view text);

struct LoadedCase {
  CaseRecord record;
  Volume volume;
  LabelMap labels;
};

LoadedCase load_case(const CaseRecord& record);

/// Heat volume for a loaded case. External heatmaps must match the case dims.
Volume case_heat_volume(const LoadedCase& c, const HeatSource& source, const ReferenceScorerParams& params = {});

// ---------------------------------------------------------------------------
// phantom

struct PhantomSetOptions {
  std::filesystem::path out;
  int count = 1;
  std::uint64_t seed = 0;
  double lesion_fraction = 0.0;
  unsigned threads = 1;
  PhantomParams phantom;
  /// Each case scales its ventricle and DGM semi-axes by U[1 - j, 1 + j] per axis.
  double geometry_jitter = 0.10;
  SynthesisConfig lesion;
  Lesion3DParams lesion_params;
};

/// Phantom sets are tuned so the reference pipeline has a measurable target: lesions darker
/// and larger than the training-set defaults.
PhantomSetOptions benchmark_phantom_options();

std::string phantom_case_id(int index);

/// round(fraction * count) ids with the smallest per-case seed hashes.
std::vector<std::string> lesioned_case_ids(const std::vector<std::string>& ids, std::uint64_t seed, double fraction);

struct PhantomCase {
  CaseRecord record;  ///< paths left empty
  Volume volume;
  LabelMap labels;
  std::optional<Mask3> lesion;
};

/// One case of a phantom set, as cmd_phantom would write it.
PhantomCase generate_phantom_case(const PhantomSetOptions& options, const std::string& id, bool lesioned);

/// Writes `<out>/cases/*` and `<out>/manifest.json`; returns the manifest path.
std::filesystem::path cmd_phantom(const PhantomSetOptions& options);

// ---------------------------------------------------------------------------
// synth

ExportSummary cmd_synth(const std::filesystem::path& manifest, const SynthesisConfig& config,
                        const std::filesystem::path& out_dir, unsigned threads = 1);

// ---------------------------------------------------------------------------
// score

struct ScoreRun {
  nlohmann::json records = nlohmann::json::array();  ///< {case, level, plane, index, score} or {case, level: "error", error}
  std::size_t errors = 0;
};

nlohmann::json score_record(const AnomalyScore& s);

ScoreRun cmd_score(const std::vector<CaseRecord>& cases, const HeatSource& source, unsigned threads = 1);

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::size_t resamples = 1000;
  std::uint64_t seed = 0;
  double target = 0.8;
  std::string compare_name = "compare";
};

/// Scores and labels of one analysis level, keyed identically across score files.
struct LevelData {
  std::vector<std::string> keys;
  std::vector<double> scores;
  std::vector<int> labels;
};

struct EvalInputs {
  LevelData case_level;
  LevelData slice_level;
};

/// Case labels from manifest diagnoses; slice labels from lesion masks (slices of lesion
/// cases without a mask are left out of the slice level).
EvalInputs eval_inputs(const nlohmann::json& scores, const std::vector<CaseRecord>& cases);

nlohmann::json evaluate_level(const LevelData& data, const LevelData* compare, const EvalOptions& options);

nlohmann::json cmd_eval(const nlohmann::json& scores, const std::vector<CaseRecord>& cases,
                        const nlohmann::json* compare, const EvalOptions& options = {});

// ---------------------------------------------------------------------------
// segment

/// Segments the case and, when `out` is given, writes the uint8 mask there.
CaseSegmentation cmd_segment(const CaseRecord& record, const HeatSource& source, double threshold, bool refine,
                             const std::optional<std::filesystem::path>& out = std::nullopt,
                             const RegionGrowParams& params = {});

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace hemosynth
