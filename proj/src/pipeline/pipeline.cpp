#include "ctnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "ctnet/errors.hpp"
#include "ctnet/metrics.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/pose_fields.hpp"

namespace ctnet {
namespace {

constexpr double kLayoutFloor = 1e-6;
constexpr double kDiscriminatorScore = 0.5;

[[noreturn]] void rethrow_with_prefix(const std::string& prefix) {
  try {
    throw;
  } catch (const FitError& e) {
    throw FitError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  } catch (const ParseError& e) {
    throw ParseError(prefix + e.what());
  } catch (const BoundsError& e) {
    throw BoundsError(prefix + e.what());
  } catch (const InvalidWindowError& e) {
    throw InvalidWindowError(prefix + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(prefix + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const std::exception& e) {
    throw Error(prefix + e.what());
  }
}

void require_image(const Tensor& t, std::size_t h, std::size_t w, const char* what) {
  if (t.rank() != 3 || t.dim(0) != h || t.dim(1) != w || t.dim(2) != 3) {
    throw ShapeError(std::string(what) + " must be " + std::to_string(h) + "x" + std::to_string(w) + "x3, got " +
                     shape_string(t.dims()));
  }
}

void require_layout(const SegmentationMap& s, std::size_t h, std::size_t w, const char* what) {
  if (s.height() != h || s.width() != w) {
    throw ShapeError(std::string(what) + " must be " + std::to_string(h) + "x" + std::to_string(w) + ", got " +
                     std::to_string(s.height()) + "x" + std::to_string(s.width()));
  }
}

void require_keypoints(const KeypointSet& k, std::size_t h, std::size_t w, const char* what) {
  if (k.height() != h || k.width() != w) {
    throw ShapeError(std::string(what) + " describe a " + std::to_string(k.width()) + "x" + std::to_string(k.height()) +
                     " (width x height) image, expected " + std::to_string(w) + "x" + std::to_string(h));
  }
}

Tensor rows_of(const Tensor& features) {
  return features.reshaped({features.dim(0) * features.dim(1), features.dim(2)});
}

std::optional<double> masked_or_none(const Tensor& a, const Tensor& b, const Tensor& mask) {
  try {
    return masked_ssim(a, b, mask);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Tensor model_encoder_input(const Tensor& image, const Tensor& model_field, bool uses_image) {
  if (!uses_image) return model_field;
  require_rank(image, 3, "model image");
  require_rank(model_field, 3, "model pose field");
  if (image.dim(0) != model_field.dim(0) || image.dim(1) != model_field.dim(1)) {
    throw ShapeError("model image " + shape_string(image.dims()) + " and pose field " +
                     shape_string(model_field.dims()) + " differ in size");
  }
  const std::size_t n = image.dim(0) * image.dim(1), ci = image.dim(2), cf = model_field.dim(2);
  std::vector<double> out(n * (ci + cf));
  const auto a = image.data(), b = model_field.data();
  for (std::size_t p = 0; p < n; ++p) {
    std::copy(a.begin() + p * ci, a.begin() + (p + 1) * ci, out.begin() + p * (ci + cf));
    std::copy(b.begin() + p * cf, b.begin() + (p + 1) * cf, out.begin() + p * (ci + cf) + ci);
  }
  return Tensor({image.dim(0), image.dim(1), ci + cf}, std::move(out), common_precision({&image, &model_field}));
}

CorrespondenceMatrix correspond(const PipelineConfig& config, const Tensor& model_image, const Tensor& model_field,
                                const Tensor& target_field, Scale scale) {
  const FeatureMap model =
      encode_features(model_encoder_input(model_image, model_field, config.encoder_uses_image), config.seed, "model");
  const FeatureMap target = encode_features(target_field, config.seed, "target");
  const WindowSpec& window = scale == Scale::dense ? config.dense_window : config.tps_window;
  return correspondence_matrix(aggregate_features(target, window), aggregate_features(model, window),
                               grid_for(target, window), grid_for(model, window));
}

Tensor clothes_of(const Tensor& image, const SegmentationMap& layout) {
  return masked_clothes(image, clothes_mask(layout).with_precision(image.precision()));
}

ControlGrid control_points(const PipelineConfig& config, const CorrespondenceMatrix& tps_matrix) {
  return soft_argmax_control_points(tps_matrix, config.grid, config.alpha);
}

FeaturePyramid feature_pyramid(const PipelineConfig& config, const Tensor& image) {
  auto stages = encoder_stages(image, config.seed);
  FeaturePyramid p = FeaturePyramid::uniform({image, std::move(stages[0]), std::move(stages[1])});
  if (!config.perceptual_weights.empty()) p.weights = config.perceptual_weights;
  p.validate();
  return p;
}

Json LossReport::to_json() const {
  Json out = Json::object();
  const auto c = components.as_array();
  for (std::size_t k = 0; k < c.size(); ++k) out[std::string(kLossNames[k])] = c[k];
  out["total"] = total.total;
  return out;
}

LossReport compute_losses(const PipelineConfig& config, const LossInputs& in) {
  LossReport r;
  LossComponents& c = r.components;
  c.l1 = l1_loss(in.fused, in.reference_image);
  c.tps = tps_loss(in.tps_clothes, in.reference_clothes, in.control,
                   TpsLossWeights{config.lambda1, config.lambda2, config.lambda_r, config.lambda_s});

  std::vector<double> logits(in.layout_scores.data().begin(), in.layout_scores.data().end());
  for (double& v : logits) v = std::log(v + kLayoutFloor);
  c.layout = cross_entropy_loss(Tensor(in.layout_scores.dims(), std::move(logits)), in.layout_target);

  const FeaturePyramid fused = feature_pyramid(config, in.fused);
  const FeaturePyramid reference = feature_pyramid(config, in.reference_image);
  c.perceptual = perceptual_loss(fused, reference);
  c.style = style_loss(fused, reference);

  const Tensor fused_clothes = clothes_of(in.fused, in.layout_target);
  c.contextual = contextual_loss(rows_of(encoder_stages(fused_clothes, config.seed)[1]),
                                 rows_of(encoder_stages(in.model_clothes, config.seed)[1]));

  const Tensor score = Tensor::filled({1}, kDiscriminatorScore);
  c.adversarial = adversarial_loss(score, score);
  c.reg = attention_regularizer(AttentionMask(in.attention));
  r.total = total_loss(c, config.loss_weights);
  return r;
}

MetricReport compute_metrics(const Tensor& warped_clothes, const Tensor& fused, const Tensor& truth_clothes,
                             const Tensor& truth_image, const SegmentationMap& layout_target) {
  const Tensor clothes = clothes_mask(layout_target);
  const Tensor person = person_mask(layout_target);
  return MetricReport{masked_or_none(warped_clothes, truth_clothes, clothes),
                      masked_or_none(fused, truth_clothes, clothes), masked_or_none(fused, truth_image, person)};
}

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineInputs& inputs, const fs::path& out_dir) {
  config.validate();
  WorkerScope workers(config.workers);

  std::map<std::string, fs::path> files = {
      {"model_image", inputs.model_image},       {"model_keypoints", inputs.model_keypoints},
      {"model_layout", inputs.model_layout},     {"target_keypoints", inputs.target_keypoints},
      {"target_body", inputs.target_body},       {"target_preserved", inputs.target_preserved}};
  if (inputs.layout_prediction) files["layout_prediction"] = *inputs.layout_prediction;
  if (inputs.generated) files["generated"] = *inputs.generated;
  if (inputs.attention_mask) files["attention_mask"] = *inputs.attention_mask;
  if (inputs.truth_clothes) files["truth_clothes"] = *inputs.truth_clothes;

  std::map<std::string, std::string> digests;
  std::string fingerprints;
  for (const auto& [name, path] : files) {
    std::string digest = "missing";
    try {
      digest = sha256_file(path);
    } catch (const IoError&) {
    }
    digests[name] = digest;
    fingerprints += (fingerprints.empty() ? "" : ", ") + name + "=" + digest.substr(0, 12);
  }

  auto stage = [&](const char* name, const auto& body) {
    try {
      return body();
    } catch (...) {
      rethrow_with_prefix(std::string("stage ") + name + " [inputs: " + fingerprints + "]: ");
    }
  };
  auto as_config = [&](const Tensor& t) { return t.with_precision(config.precision); };

  struct Loaded {
    Tensor model_image, target_body;
    KeypointSet model_kp, target_kp;
    SegmentationMap model_layout, target_preserved;
  };
  const Loaded in = stage("load-inputs", [&] {
    Loaded l{as_config(load_png(inputs.model_image)),      as_config(load_png(inputs.target_body)),
             load_keypoints(inputs.model_keypoints),       load_keypoints(inputs.target_keypoints),
             load_label_png(inputs.model_layout),          load_label_png(inputs.target_preserved)};
    const std::size_t h = l.model_image.dim(0), w = l.model_image.dim(1);
    require_image(l.model_image, h, w, "model image");
    require_image(l.target_body, h, w, "target body image");
    require_keypoints(l.model_kp, h, w, "model keypoints");
    require_keypoints(l.target_kp, h, w, "target keypoints");
    require_layout(l.model_layout, h, w, "model layout");
    require_layout(l.target_preserved, h, w, "target preserved layout");
    return l;
  });
  const std::size_t h = in.model_image.dim(0), w = in.model_image.dim(1);

  const auto [p_model, p_target] = stage("pose-fields", [&] {
    return std::pair{as_config(distance_fields(in.model_kp).field), as_config(distance_fields(in.target_kp).field)};
  });
  const auto [m_dis, m_tps] = stage("correspondence", [&] {
    return std::pair{correspond(config, in.model_image, p_model, p_target, Scale::dense),
                     correspond(config, in.model_image, p_model, p_target, Scale::tps)};
  });
  const auto [model_clothes, warped_clothes] = stage("dense-warp", [&] {
    Tensor clothes = clothes_of(in.model_image, in.model_layout);
    Tensor warped = dense_warp_blocks(m_dis, clothes, config.alpha);
    return std::pair{std::move(clothes), std::move(warped)};
  });
  const auto [layout_scores, warped_layout] = stage("layout-warp", [&] {
    Tensor scores = warp_layout_scores(m_dis, in.model_layout, config.alpha);
    SegmentationMap labels = argmax_labels(scores);
    return std::pair{std::move(scores), std::move(labels)};
  });
  const auto [transform, tps_clothes] = stage("tps", [&] {
    TpsTransform t = tps_fit(control_points(config, m_tps), config.lambda_k);
    Tensor applied = tps_apply(t, model_clothes);
    return std::pair{std::move(t), std::move(applied)};
  });
  const auto [prediction, target_layout] = stage("layout-merge", [&] {
    SegmentationMap pred = inputs.layout_prediction ? load_label_png(*inputs.layout_prediction)
                                                    : default_layout_prediction(warped_layout);
    require_layout(pred, h, w, "layout prediction");
    SegmentationMap merged = merge_layout(pred, in.target_preserved);
    return std::pair{std::move(pred), std::move(merged)};
  });

  struct Fused {
    Tensor masked, nontarget, generated, attention, fused;
  };
  const Fused fz = stage("fusion", [&] {
    Fused f;
    f.masked = masked_clothes(warped_clothes, clothes_mask(target_layout).with_precision(config.precision));
    f.nontarget = extract_nontarget(in.target_body, target_layout);
    if (inputs.generated) {
      f.generated = as_config(load_image_any(*inputs.generated));
      require_image(f.generated, h, w, "generated image");
    } else {
      f.generated = add(f.masked, f.nontarget);
    }
    const Tensor raw = inputs.attention_mask ? load_mask_png(*inputs.attention_mask)
                                             : Tensor::filled({h, w}, inputs.identity_mask.value_or(1.0));
    if (raw.dim(0) != h || raw.dim(1) != w) throw ShapeError("attention mask must be " + std::to_string(h) + "x" + std::to_string(w));
    const AttentionMask mask(as_config(raw));
    f.attention = mask.values();
    f.fused = fuse_attention(tps_clothes, f.generated, mask);
    return f;
  });

  const Tensor truth_clothes = stage("load-truth", [&] {
    if (!inputs.truth_clothes) return model_clothes;
    Tensor t = as_config(load_image_any(*inputs.truth_clothes));
    require_image(t, h, w, "ground-truth clothes");
    return t;
  });
  const Tensor reference_image = add(masked_clothes(truth_clothes, clothes_mask(target_layout).with_precision(config.precision)),
                                     fz.nontarget);

  const LossReport losses = stage("losses", [&] {
    return compute_losses(config, LossInputs{fz.fused, reference_image, tps_clothes, truth_clothes, transform.control,
                                             layout_scores, target_layout, model_clothes, fz.attention});
  });
  const MetricReport metrics = stage("metrics", [&] {
    if (!inputs.truth_clothes) return MetricReport{};
    return compute_metrics(warped_clothes, fz.fused, truth_clothes, reference_image, target_layout);
  });

  Json report = {{"warp_ssim", optional_json(metrics.warp_ssim)},
                 {"mask_ssim", optional_json(metrics.mask_ssim)},
                 {"h_ssim", optional_json(metrics.h_ssim)},
                 {"losses", losses.to_json()}};

  Json manifest = stage("write-outputs", [&] {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<std::string> written;
    auto tensor = [&](const std::string& name, const Tensor& t) {
      save_tensor(t, out_dir / (name + ".cttn"));
      written.push_back(name + ".cttn");
    };
    auto image = [&](const std::string& name, const Tensor& t) {
      tensor(name, t);
      save_png(t, out_dir / (name + ".png"));
      written.push_back(name + ".png");
    };
    auto labels = [&](const std::string& name, const SegmentationMap& s) {
      save_label_png(s, out_dir / (name + ".png"));
      written.push_back(name + ".png");
    };
    auto text = [&](const std::string& name, const Json& doc) {
      write_text(out_dir / name, dump_json(doc));
      written.push_back(name);
    };
    tensor("p_model", p_model);
    tensor("p_target", p_target);
    save_correspondence(m_dis, out_dir / "m_dis.cttn");
    written.insert(written.end(), {"m_dis.cttn", "m_dis.cttn.json"});
    save_correspondence(m_tps, out_dir / "m_tps.cttn");
    written.insert(written.end(), {"m_tps.cttn", "m_tps.cttn.json"});
    image("model_clothes", model_clothes);
    image("warped_clothes", warped_clothes);
    tensor("layout_scores", layout_scores);
    labels("warped_layout", warped_layout);
    text("control_grid.json", control_grid_to_json(transform.control));
    text("tps.json", tps_to_json(transform));
    image("tps_clothes", tps_clothes);
    labels("layout_prediction", prediction);
    labels("target_layout", target_layout);
    image("masked_clothes", fz.masked);
    image("nontarget", fz.nontarget);
    image("generated", fz.generated);
    image("attention", fz.attention);
    image("fused", fz.fused);
    text("report.json", report);

    Json doc;
    doc["config"] = config.to_json(false);
    for (const auto& [name, path] : files) {
      doc["inputs"][name] = {{"file", path.filename().string()}, {"sha256", digests[name]}};
    }
    for (const auto& name : written) doc["outputs"][name] = sha256_file(out_dir / name);
    doc["stand_ins"] = {
        {"layout_prediction", inputs.layout_prediction ? "file" : "warped limbs and clothes"},
        {"generated", inputs.generated ? "file" : "masked warped clothes plus non-target body"},
        {"attention_mask", inputs.attention_mask ? Json("file") : Json(inputs.identity_mask.value_or(1.0))},
        {"discriminator_scores", kDiscriminatorScore},
        {"reference_clothes", inputs.truth_clothes ? "file" : "model clothes"}};
    write_text(out_dir / "manifest.json", dump_json(doc));
    return doc;
  });
  return PipelineResult{std::move(report), std::move(manifest)};
}

}  // namespace ctnet
