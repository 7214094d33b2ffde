// hemosynth: phantom generation, pseudo-lesion synthesis, scoring, evaluation,
// segmentation and the viewer backend behind one binary.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "hemosynth/errors.hpp"
#include "hemosynth/log.hpp"
#include "hemosynth/parallel.hpp"
#include "hemosynth/pipeline.hpp"
#include "hemosynth/service.hpp"

namespace fs = std::filesystem;
using namespace hemosynth;

namespace {

void print_json(const nlohmann::json& j, const std::string& out) {
  if (out.empty() || out == "-") std::cout << j.dump(2) << "\n";
  else write_json_file(out, j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-lesion synthesis and evaluation toolkit for fetal brain MRI"};
  app.require_subcommand(1);

  unsigned threads = 0;
  std::uint64_t seed = 0;
  std::string manifest, out, config_path, source = "reference", compare, case_id, scores_path;
  bool strict = false, refine = false;
  double with_lesions = 0.0, threshold = 0.5;
  int count = 0, port = 8080;
  std::string host = "127.0.0.1";

  auto* phantom = app.add_subcommand("phantom", "generate phantom cases and a manifest");
  phantom->add_option("count", count, "number of cases")->required()->check(CLI::Range(1, 100000));
  phantom->add_option("--out", out, "output directory")->required();
  phantom->add_option("--seed", seed, "random seed")->required();
  phantom->add_option("--with-lesions", with_lesions, "fraction of cases given an injected lesion")
      ->check(CLI::Range(0.0, 1.0));
  phantom->add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* synth = app.add_subcommand("synth", "synthesize a pseudo-lesion training set from normal cases");
  synth->add_option("--manifest", manifest, "case manifest")->required();
  synth->add_option("--config", config_path, "synthesis config JSON");
  synth->add_option("--out", out, "output directory")->required();
  auto* synth_seed = synth->add_option("--seed", seed, "random seed (overrides the config)");
  synth->add_option("--threads", threads, "worker threads (0 = all cores)");
  synth->add_flag("--strict", strict, "fail if any slice could not be synthesized");

  auto* score = app.add_subcommand("score", "score cases at case and slice level");
  score->add_option("--manifest", manifest, "case manifest")->required();
  score->add_option("--source", source, "reference | dir:PATH");
  score->add_option("--out", out, "scores JSON (default stdout)");
  score->add_option("--threads", threads, "worker threads (0 = all cores)");
  score->add_flag("--strict", strict, "exit nonzero when any case could not be scored");

  auto* eval = app.add_subcommand("eval", "evaluate scores against manifest labels");
  eval->add_option("--scores", scores_path, "scores JSON")->required();
  eval->add_option("--manifest", manifest, "case manifest")->required();
  eval->add_option("--out", out, "report JSON (default stdout)");
  eval->add_option("--compare", compare, "second scores JSON to compare against");
  eval->add_option("--seed", seed, "bootstrap seed");

  auto* segment = app.add_subcommand("segment", "segment one case and report the lesion volume");
  segment->add_option("--manifest", manifest, "case manifest")->required();
  segment->add_option("--case", case_id, "case id")->required();
  segment->add_option("--threshold", threshold, "heat threshold")->required()->check(CLI::Range(0.0, 1.0));
  segment->add_flag("--refine", refine, "refine with region growing from each slice's heat maximum");
  segment->add_option("--source", source, "reference | dir:PATH");
  segment->add_option("--out", out, "mask NIfTI to write");

  auto* serve = app.add_subcommand("serve", "serve the viewer API");
  serve->add_option("--manifest", manifest, "case manifest")->required();
  serve->add_option("--source", source, "reference | dir:PATH");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port")->check(CLI::Range(1, 65535));
  serve->add_option("--threads", threads, "worker threads for indexing (0 = all cores)");

  CLI11_PARSE(app, argc, argv);
  const unsigned workers = resolve_threads(threads);

  try {
    if (*phantom) {
      PhantomSetOptions o = benchmark_phantom_options();
      o.out = out;
      o.count = count;
      o.seed = seed;
      o.lesion_fraction = with_lesions;
      o.threads = workers;
      std::cout << cmd_phantom(o).string() << "\n";
    } else if (*synth) {
      SynthesisConfig config = config_path.empty() ? SynthesisConfig{} : load_synthesis_config(config_path);
      if (*synth_seed) config.seed = seed;
      const ExportSummary s = cmd_synth(manifest, config, out, workers);
      std::cout << "samples " << s.samples << "\n";
      for (const auto& [scenario, n] : s.scenario_histogram) std::cout << "scenario " << scenario << " " << n << "\n";
      std::cout << "failures " << s.failures << "\n";
      if (strict && s.failures) return 1;
    } else if (*score) {
      const ScoreRun run = cmd_score(load_manifest(manifest), parse_heat_source(source), workers);
      print_json(run.records, out);
      if (strict && run.errors) return 1;
    } else if (*eval) {
      const auto report_compare = compare.empty() ? nlohmann::json() : read_json_file(compare);
      EvalOptions o;
      o.seed = seed;
      o.compare_name = compare.empty() ? "" : fs::path(compare).filename().string();
      print_json(cmd_eval(read_json_file(scores_path), load_manifest(manifest),
                          compare.empty() ? nullptr : &report_compare, o),
                 out);
    } else if (*segment) {
      const auto cases = load_manifest(manifest);
      const auto seg = cmd_segment(find_case(cases, case_id), parse_heat_source(source), threshold, refine,
                                   out.empty() ? std::nullopt : std::optional<fs::path>(out));
      std::printf("volume_mm3 %.6f\n", seg.volume_mm3);
    } else if (*serve) {
      const CaseIndex index = CaseIndex::build(load_manifest(manifest), parse_heat_source(source), workers);
      std::cout << "serving " << index.cases().size() << " cases on http://" << host << ":" << port << "/api/cases"
                << std::endl;
      run_server(index, host, port);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
