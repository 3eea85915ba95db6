#include <algorithm>
#include <array>
#include <string_view>

#include "ctnet/errors.hpp"
#include "ctnet/pipeline.hpp"

namespace ctnet {
namespace {

constexpr std::array<std::string_view, 15> kConfigKeys = {
    "seed",     "alpha",   "dense_window", "tps_window",   "grid",      "lambda_k", "lambda_r",          "lambda_s",
    "lambda1",  "lambda2", "loss_weights", "precision",    "workers",   "encoder_uses_image", "perceptual_weights"};

constexpr std::array<std::string_view, 8> kWeightKeys = kLossNames;

void reject_unknown(const Json& doc, std::span<const std::string_view> known, const std::string& path) {
  for (const auto& [key, value] : doc.items()) {
    if (key.empty() || std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError(path + key + ": unknown config key");
    }
  }
}

template <class T>
T read(const Json& doc, const std::string& key, const std::string& path) {
  try {
    return doc.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ParseError(path + key + ": wrong type");
  }
}

WindowSpec read_window(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw ParseError(path + ": expected an object");
  static constexpr std::array<std::string_view, 3> keys = {"size", "stride", "padding"};
  reject_unknown(doc, keys, path + ".");
  WindowSpec w;
  if (doc.contains("size")) w.size = read<std::size_t>(doc, "size", path + ".");
  if (doc.contains("stride")) w.stride = read<std::size_t>(doc, "stride", path + ".");
  if (doc.contains("padding")) w.padding = read<std::size_t>(doc, "padding", path + ".");
  return w;
}

Json window_json(const WindowSpec& w) { return {{"size", w.size}, {"stride", w.stride}, {"padding", w.padding}}; }

}  // namespace

void PipelineConfig::validate() const {
  dense_window.validate();
  tps_window.validate();
  if (!(alpha > 0.0)) throw ValidationError("config alpha must be positive");
  if (grid < 3) throw ValidationError("config grid must be at least 3");
  for (double v : {lambda_k, lambda_r, lambda_s, lambda1, lambda2}) {
    if (!(v >= 0.0)) throw ValidationError("config lambda values must be non-negative");
  }
  for (double v : loss_weights.as_array()) {
    if (!(v >= 0.0)) throw ValidationError("config loss weights must be non-negative");
  }
  for (double v : perceptual_weights) {
    if (!(v >= 0.0)) throw ValidationError("config perceptual weights must be non-negative");
  }
  if (!perceptual_weights.empty() && perceptual_weights.size() != 3) {
    throw ValidationError("config perceptual_weights needs one weight per pyramid level (3)");
  }
  if (workers == 0) throw ValidationError("config workers must be at least 1");
}

Json PipelineConfig::to_json(bool include_workers) const {
  Json weights = Json::object();
  const auto w = loss_weights.as_array();
  for (std::size_t k = 0; k < w.size(); ++k) weights[std::string(kLossNames[k])] = w[k];
  Json doc = {{"seed", seed},
              {"alpha", alpha},
              {"dense_window", window_json(dense_window)},
              {"tps_window", window_json(tps_window)},
              {"grid", grid},
              {"lambda_k", lambda_k},
              {"lambda_r", lambda_r},
              {"lambda_s", lambda_s},
              {"lambda1", lambda1},
              {"lambda2", lambda2},
              {"loss_weights", weights},
              {"precision", precision == Precision::f32 ? "f32" : "f64"},
              {"encoder_uses_image", encoder_uses_image},
              {"perceptual_weights", perceptual_weights}};
  if (include_workers) doc["workers"] = workers;
  return doc;
}

PipelineConfig PipelineConfig::from_json(const Json& doc) {
  if (!doc.is_object()) throw ParseError("config: expected an object");
  reject_unknown(doc, kConfigKeys, "");
  PipelineConfig c;
  if (doc.contains("seed")) c.seed = read<std::uint64_t>(doc, "seed", "");
  if (doc.contains("alpha")) c.alpha = read<double>(doc, "alpha", "");
  if (doc.contains("dense_window")) c.dense_window = read_window(doc.at("dense_window"), "dense_window");
  if (doc.contains("tps_window")) c.tps_window = read_window(doc.at("tps_window"), "tps_window");
  if (doc.contains("grid")) c.grid = read<std::size_t>(doc, "grid", "");
  if (doc.contains("lambda_k")) c.lambda_k = read<double>(doc, "lambda_k", "");
  if (doc.contains("lambda_r")) c.lambda_r = read<double>(doc, "lambda_r", "");
  if (doc.contains("lambda_s")) c.lambda_s = read<double>(doc, "lambda_s", "");
  if (doc.contains("lambda1")) c.lambda1 = read<double>(doc, "lambda1", "");
  if (doc.contains("lambda2")) c.lambda2 = read<double>(doc, "lambda2", "");
  if (doc.contains("loss_weights")) {
    const Json& w = doc.at("loss_weights");
    if (!w.is_object()) throw ParseError("loss_weights: expected an object");
    reject_unknown(w, kWeightKeys, "loss_weights.");
    double* slots[8] = {&c.loss_weights.l1,         &c.loss_weights.tps,   &c.loss_weights.layout,
                        &c.loss_weights.perceptual, &c.loss_weights.style, &c.loss_weights.contextual,
                        &c.loss_weights.adversarial, &c.loss_weights.reg};
    for (std::size_t k = 0; k < 8; ++k) {
      const std::string key(kLossNames[k]);
      if (w.contains(key)) *slots[k] = read<double>(w, key, "loss_weights.");
    }
  }
  if (doc.contains("precision")) {
    const std::string p = read<std::string>(doc, "precision", "");
    if (p == "f32") {
      c.precision = Precision::f32;
    } else if (p == "f64") {
      c.precision = Precision::f64;
    } else {
      throw ParseError("precision: expected \"f32\" or \"f64\"");
    }
  }
  if (doc.contains("workers")) c.workers = read<std::size_t>(doc, "workers", "");
  if (doc.contains("encoder_uses_image")) c.encoder_uses_image = read<bool>(doc, "encoder_uses_image", "");
  if (doc.contains("perceptual_weights")) c.perceptual_weights = read<std::vector<double>>(doc, "perceptual_weights", "");
  try {
    c.validate();
  } catch (const ParseError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  const Json doc = parse_json(read_text(path), path.string());
  try {
    return PipelineConfig::from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace ctnet
