#include "ctnet/errors.hpp"
#include "ctnet/io.hpp"

namespace ctnet {
namespace {

template <class T>
T field(const Json& doc, const char* key, const std::string& path) {
  if (!doc.is_object() || !doc.contains(key)) throw ParseError(path + "." + key + ": missing");
  try {
    return doc.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ParseError(path + "." + key + ": wrong type");
  }
}

Json points_to_json(const std::vector<Point>& pts) {
  Json out = Json::array();
  for (const Point& p : pts) out.push_back({p.x, p.y});
  return out;
}

std::vector<Point> points_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_array()) throw ParseError(path + ": expected an array of [x, y]");
  std::vector<Point> pts;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Json& e = doc[i];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      throw ParseError(path + "[" + std::to_string(i) + "]: expected [x, y]");
    }
    pts.push_back(Point{e[0].get<double>(), e[1].get<double>()});
  }
  return pts;
}

WindowSpec window_from_json(const Json& doc, const std::string& path) {
  WindowSpec w{field<std::size_t>(doc, "size", path), field<std::size_t>(doc, "stride", path),
               field<std::size_t>(doc, "padding", path)};
  w.validate();
  return w;
}

}  // namespace

Json parse_json(std::string_view text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(origin + ": invalid JSON (" + e.what() + ")");
  }
}

std::string dump_json(const Json& doc) { return doc.dump(2) + "\n"; }

Json grid_info_to_json(const GridInfo& g) {
  return {{"image_h", g.image_h},
          {"image_w", g.image_w},
          {"feature_h", g.feature_h},
          {"feature_w", g.feature_w},
          {"feature_stride", g.feature_stride},
          {"window", {{"size", g.window.size}, {"stride", g.window.stride}, {"padding", g.window.padding}}}};
}

GridInfo grid_info_from_json(const Json& doc) {
  GridInfo g;
  g.image_h = field<std::size_t>(doc, "image_h", "grid");
  g.image_w = field<std::size_t>(doc, "image_w", "grid");
  g.feature_h = field<std::size_t>(doc, "feature_h", "grid");
  g.feature_w = field<std::size_t>(doc, "feature_w", "grid");
  g.feature_stride = field<std::size_t>(doc, "feature_stride", "grid");
  if (!doc.contains("window")) throw ParseError("grid.window: missing");
  g.window = window_from_json(doc.at("window"), "grid.window");
  return g;
}

void save_correspondence(const CorrespondenceMatrix& m, const fs::path& path) {
  m.validate();
  save_tensor(m.scores, path);
  fs::path sidecar = path;
  sidecar += ".json";
  write_text(sidecar, dump_json({{"rows", grid_info_to_json(m.rows)}, {"cols", grid_info_to_json(m.cols)}}));
}

CorrespondenceMatrix load_correspondence(const fs::path& path) {
  fs::path sidecar = path;
  sidecar += ".json";
  const Json meta = parse_json(read_text(sidecar), sidecar.string());
  if (!meta.contains("rows") || !meta.contains("cols")) throw ParseError(sidecar.string() + ": rows/cols missing");
  CorrespondenceMatrix m{load_tensor(path), grid_info_from_json(meta.at("rows")), grid_info_from_json(meta.at("cols"))};
  m.validate();
  return m;
}

Json control_grid_to_json(const ControlGrid& c) {
  return {{"grid", c.grid}, {"source", points_to_json(c.source)}, {"target", points_to_json(c.target)}};
}

ControlGrid control_grid_from_json(const Json& doc) {
  ControlGrid c;
  c.grid = field<std::size_t>(doc, "grid", "control");
  c.source = points_from_json(doc.value("source", Json()), "control.source");
  c.target = points_from_json(doc.value("target", Json()), "control.target");
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ParseError(std::string("control: ") + e.what());
  }
  return c;
}

Json tps_to_json(const TpsTransform& t) {
  Json weights = Json::array();
  for (const auto& w : t.weights) weights.push_back({w[0], w[1]});
  return {{"control", control_grid_to_json(t.control)},
          {"lambda", t.lambda},
          {"affine", {{t.affine[0][0], t.affine[0][1], t.affine[0][2]}, {t.affine[1][0], t.affine[1][1], t.affine[1][2]}}},
          {"weights", weights}};
}

TpsTransform tps_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("control")) throw ParseError("tps.control: missing");
  TpsTransform t;
  t.control = control_grid_from_json(doc.at("control"));
  t.lambda = field<double>(doc, "lambda", "tps");
  const auto affine = field<std::vector<std::vector<double>>>(doc, "affine", "tps");
  if (affine.size() != 2 || affine[0].size() != 3 || affine[1].size() != 3) throw ParseError("tps.affine: expected 2 x 3");
  for (int d = 0; d < 2; ++d) t.affine[d] = {affine[d][0], affine[d][1], affine[d][2]};
  const auto weights = field<std::vector<std::vector<double>>>(doc, "weights", "tps");
  if (weights.size() != t.control.size()) throw ParseError("tps.weights: expected one pair per control point");
  for (const auto& w : weights) {
    if (w.size() != 2) throw ParseError("tps.weights: expected [wx, wy] pairs");
    t.weights.push_back({w[0], w[1]});
  }
  return t;
}

}  // namespace ctnet
