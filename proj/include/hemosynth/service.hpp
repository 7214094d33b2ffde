#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemosynth/pipeline.hpp"

namespace httplib {
class Server;
}

namespace hemosynth {

struct IndexedCase {
  CaseRecord record;
  Volume volume;  ///< min-max normalized
  LabelMap labels;
  Volume heat;
  CaseScores scores;
};

/// Everything the viewer backend serves, loaded once and read-only afterwards.
class CaseIndex {
 public:
  /// Cases that fail to load are logged and skipped; throws ErrorKind::Input if none load.
  static CaseIndex build(const std::vector<CaseRecord>& cases, const HeatSource& source, unsigned threads = 1);

  /// Descending case score, ties by id.
  const std::vector<IndexedCase>& cases() const { return cases_; }
  const IndexedCase* find(const std::string& id) const;
  const std::vector<std::string>& load_errors() const { return load_errors_; }

 private:
  std::vector<IndexedCase> cases_;
  std::vector<std::string> load_errors_;
};

/// v -> round(v * 255), half away from zero, after clamping v to [0, 1].
Grid2<std::uint8_t> quantize_8bit(const Image2& values);

/// 8-bit grayscale PNG.
std::vector<std::uint8_t> encode_png_gray(const Grid2<std::uint8_t>& pixels);

nlohmann::json case_list_json(const CaseIndex& index);
nlohmann::json case_meta_json(const IndexedCase& c);
nlohmann::json segmentation_json(const CaseSegmentation& seg);

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Routes one request; the HTTP server is a thin shell over this.
HttpResponse handle_request(const CaseIndex& index, const std::string& method, const std::string& path,
                            const std::map<std::string, std::string>& query, const std::string& body,
                            const RegionGrowParams& params = {});

/// Routes GET/POST /api/... on `server` to handle_request; `index` must outlive it.
void install_routes(httplib::Server& server, const CaseIndex& index, const RegionGrowParams& params = {});

/// Blocks serving on host:port until the process ends.
void run_server(const CaseIndex& index, const std::string& host, int port, const RegionGrowParams& params = {});

}  // namespace hemosynth
