#include "hemosynth/service.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <httplib.h>
#include <regex>

#include "hemosynth/errors.hpp"
#include "hemosynth/log.hpp"
#include "hemosynth/parallel.hpp"
#include "hemosynth/volume_ops.hpp"

namespace hemosynth {

using nlohmann::json;

CaseIndex CaseIndex::build(const std::vector<CaseRecord>& records, const HeatSource& source, unsigned threads) {
  std::vector<std::optional<IndexedCase>> loaded(records.size());
  std::vector<std::string> errors(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    try {
      LoadedCase c = load_case(records[i]);
      Volume heat = case_heat_volume(c, source);
      CaseScores scores = score_case(c.record.id, heat, c.labels);
      loaded[i] = IndexedCase{std::move(c.record), std::move(c.volume), std::move(c.labels), std::move(heat),
                              std::move(scores)};
    } catch (const Error& e) {
      errors[i] = records[i].id + ": " + e.what();
    }
  });
  CaseIndex index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (loaded[i]) index.cases_.push_back(std::move(*loaded[i]));
    else {
      log(LogLevel::Warn, errors[i]);
      index.load_errors_.push_back(errors[i]);
    }
  }
  if (index.cases_.empty()) throw Error(ErrorKind::Input, "no loadable cases");
  std::stable_sort(index.cases_.begin(), index.cases_.end(), [](const IndexedCase& a, const IndexedCase& b) {
    if (a.scores.case_score.value != b.scores.case_score.value)
      return a.scores.case_score.value > b.scores.case_score.value;
    return a.record.id < b.record.id;
  });
  return index;
}

const IndexedCase* CaseIndex::find(const std::string& id) const {
  for (const IndexedCase& c : cases_)
    if (c.record.id == id) return &c;
  return nullptr;
}

Grid2<std::uint8_t> quantize_8bit(const Image2& values) {
  Grid2<std::uint8_t> out(values.rows(), values.cols());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double v = std::clamp(double(values.data()[i]), 0.0, 1.0);
    out.data()[i] = std::uint8_t(std::lround(v * 255.0));
  }
  return out;
}

std::vector<std::uint8_t> encode_png_gray(const Grid2<std::uint8_t>& pixels) {
  if (pixels.size() == 0) throw Error(ErrorKind::Input, "empty image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorKind::Write, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorKind::Write, "png_create_info_struct failed");
  }
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(std::size_t(pixels.rows()));
  for (Eigen::Index r = 0; r < pixels.rows(); ++r)
    rows[std::size_t(r)] = const_cast<png_bytep>(pixels.data() + r * pixels.cols());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::Write, "PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + len);
      },
      nullptr);
  png_set_IHDR(png, info, png_uint_32(pixels.cols()), png_uint_32(pixels.rows()), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

json case_list_json(const CaseIndex& index) {
  json out = json::array();
  for (const IndexedCase& c : index.cases())
    out.push_back({{"id", c.record.id},
                   {"grade", c.record.grade ? json(std::string(to_string(*c.record.grade))) : json(nullptr)},
                   {"diagnosis", std::string(to_string(c.record.diagnosis))},
                   {"score", c.scores.case_score.value}});
  return out;
}

json case_meta_json(const IndexedCase& c) {
  json meta;
  meta["id"] = c.record.id;
  meta["dims"] = {c.volume.dims[0], c.volume.dims[1], c.volume.dims[2]};
  meta["spacing"] = {c.volume.spacing[0], c.volume.spacing[1], c.volume.spacing[2]};
  json planes = json::object(), ranges = json::object();
  for (Plane p : kAllPlanes) {
    const std::string name(to_string(p));
    planes[name] = slice_count(c.volume, p);
    const auto roi = roi_slice_indices(c.labels, p);
    ranges[name] = roi.empty() ? json(nullptr) : json::array({roi.front(), roi.back()});
  }
  meta["planes"] = planes;
  meta["roi_slice_ranges"] = ranges;
  json tissue = json::object();
  for (int k = 1; k < kTissueClassCount; ++k) {
    const auto cls = TissueClass(k);
    tissue[std::string(to_string(cls))] = tissue_volume(c.labels, cls);
  }
  meta["tissue_volumes"] = tissue;
  return meta;
}

json segmentation_json(const CaseSegmentation& seg) {
  json axial = json::object();
  for (const auto& [index, mask] : seg.axial_slices) {
    json rows = json::array();
    for (const RowRuns& runs : rle_encode(mask)) {
      json row = json::array();
      for (const auto& [start, len] : runs) row.push_back({start, len});
      rows.push_back(std::move(row));
    }
    axial[std::to_string(index)] = std::move(rows);
  }
  return {{"volume_mm3", seg.volume_mm3}, {"slices", {{"axial", std::move(axial)}}}};
}

namespace {

HttpResponse json_response(int status, const json& j) { return {status, "application/json", j.dump()}; }
HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

HttpResponse render(const IndexedCase& c, const std::string& plane_name, const std::string& index_text,
                    const std::string& layer) {
  const auto plane = parse_plane(plane_name);
  if (!plane) return error_response(404, "unknown plane '" + plane_name + "'");
  int index = 0;
  try {
    std::size_t used = 0;
    index = std::stoi(index_text, &used);
    if (used != index_text.size()) throw std::invalid_argument(index_text);
  } catch (const std::exception&) {
    return error_response(404, "bad slice index '" + index_text + "'");
  }
  if (index < 0 || index >= slice_count(c.volume, *plane)) return error_response(404, "slice index out of range");
  const Volume* source = nullptr;
  if (layer == "image") source = &c.volume;
  else if (layer == "heatmap") source = &c.heat;
  else return error_response(422, "layer must be 'image' or 'heatmap'");
  const auto png = encode_png_gray(quantize_8bit(extract_slice(*source, *plane, index)));
  return {200, "image/png", std::string(png.begin(), png.end())};
}

HttpResponse segment(const IndexedCase& c, const std::string& body, const RegionGrowParams& params) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception&) {
    return error_response(422, "body must be JSON");
  }
  if (!req.is_object() || !req.contains("threshold") || !req["threshold"].is_number())
    return error_response(422, "threshold must be a number");
  const double threshold = req["threshold"].get<double>();
  if (!(threshold >= 0.0 && threshold <= 1.0)) return error_response(422, "threshold outside [0, 1]");
  bool refine = false;
  if (req.contains("refine")) {
    if (!req["refine"].is_boolean()) return error_response(422, "refine must be a boolean");
    refine = req["refine"].get<bool>();
  }
  const CaseSegmentation seg = segment_case(c.record.id, c.volume, c.labels, c.heat, threshold, refine, params);
  return json_response(200, segmentation_json(seg));
}

}  // namespace

HttpResponse handle_request(const CaseIndex& index, const std::string& method, const std::string& path,
                            const std::map<std::string, std::string>& query, const std::string& body,
                            const RegionGrowParams& params) {
  static const std::regex meta_re(R"(^/api/cases/([^/]+)/meta$)");
  static const std::regex slice_re(R"(^/api/cases/([^/]+)/slices/([^/]+)/([^/]+)$)");
  static const std::regex segment_re(R"(^/api/cases/([^/]+)/segment$)");
  std::smatch m;
  try {
    if (path == "/api/cases") {
      if (method != "GET") return error_response(405, "method not allowed");
      return json_response(200, case_list_json(index));
    }
    const auto lookup = [&](const std::string& id) { return index.find(id); };
    if (std::regex_match(path, m, meta_re)) {
      if (method != "GET") return error_response(405, "method not allowed");
      const IndexedCase* c = lookup(m[1]);
      if (!c) return error_response(404, "unknown case '" + m[1].str() + "'");
      return json_response(200, case_meta_json(*c));
    }
    if (std::regex_match(path, m, slice_re)) {
      if (method != "GET") return error_response(405, "method not allowed");
      const IndexedCase* c = lookup(m[1]);
      if (!c) return error_response(404, "unknown case '" + m[1].str() + "'");
      const auto it = query.find("layer");
      return render(*c, m[2], m[3], it == query.end() ? "image" : it->second);
    }
    if (std::regex_match(path, m, segment_re)) {
      if (method != "POST") return error_response(405, "method not allowed");
      const IndexedCase* c = lookup(m[1]);
      if (!c) return error_response(404, "unknown case '" + m[1].str() + "'");
      return segment(*c, body, params);
    }
    return error_response(404, "no route for " + path);
  } catch (const Error& e) {
    return error_response(e.kind() == ErrorKind::Parameter ? 422 : 500, e.what());
  }
}

void install_routes(httplib::Server& server, const CaseIndex& index, const RegionGrowParams& params) {
  const auto handler = [&index, params](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query(req.params.begin(), req.params.end());
    const HttpResponse r = handle_request(index, req.method, req.path, query, req.body, params);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get(R"(/api/.*)", handler);
  server.Post(R"(/api/.*)", handler);
}

void run_server(const CaseIndex& index, const std::string& host, int port, const RegionGrowParams& params) {
  httplib::Server server;
  install_routes(server, index, params);
  log(LogLevel::Info, "serving on " + host + ":" + std::to_string(port));
  if (!server.listen(host, port)) throw Error(ErrorKind::Input, "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace hemosynth
