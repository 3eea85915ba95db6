#include "ctnet/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "ctnet/errors.hpp"
#include "ctnet/fusion.hpp"
#include "ctnet/io.hpp"
#include "ctnet/metrics.hpp"
#include "ctnet/parallel.hpp"
#include "ctnet/pipeline.hpp"
#include "ctnet/synthetic.hpp"

namespace ctnet {
namespace {

// Config file then flag overrides, shared by every stage subcommand.
struct ConfigFlags {
  std::string path;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::size_t> grid;
  std::optional<double> lambda_k;
  std::optional<std::size_t> workers;
  std::optional<std::string> precision;

  void attach(CLI::App* app) {
    app->add_option("--config", path, "JSON pipeline configuration");
    app->add_option("--seed", seed, "Encoder seed");
    app->add_option("--alpha", alpha, "Softmax sharpness");
    app->add_option("--grid", grid, "Control lattice side");
    app->add_option("--lambda-k", lambda_k, "TPS kernel regularisation");
    app->add_option("--workers", workers, "Worker threads");
    app->add_option("--precision", precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  }

  PipelineConfig resolve() const {
    PipelineConfig c = path.empty() ? PipelineConfig{} : load_config(path);
    if (seed) c.seed = *seed;
    if (alpha) c.alpha = *alpha;
    if (grid) c.grid = *grid;
    if (lambda_k) c.lambda_k = *lambda_k;
    if (workers) c.workers = *workers;
    if (precision) c.precision = *precision == "f32" ? Precision::f32 : Precision::f64;
    c.validate();
    return c;
  }
};

void save_image_any(const Tensor& t, const fs::path& path) {
  if (path.extension() == ".png") {
    save_png(t, path);
  } else {
    save_tensor(t, path);
  }
}

void emit(std::ostream& out, const Json& doc, const std::string& path) {
  const std::string text = dump_json(doc);
  if (!path.empty()) write_text(path, text);
  out << text;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) != nullptr) return kExitValidation;
  if (dynamic_cast<const NumericalError*>(&e) != nullptr) return kExitNumerical;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return kExitIo;
  return 1;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Garment-transfer geometry and loss toolkit"};
  app.require_subcommand(1);

  // distance-field
  auto* df = app.add_subcommand("distance-field", "Keypoints to per-joint distance fields");
  std::string df_keypoints, df_out, df_confidence;
  df->add_option("--keypoints", df_keypoints, "Keypoints JSON")->required();
  df->add_option("--out", df_out, "Output tensor file (H x W x 18)")->required();
  df->add_option("--confidence-out", df_confidence, "Optional binary joint maps");

  // correspond
  auto* co = app.add_subcommand("correspond", "Correspondence matrix between model and target");
  std::string co_image, co_model, co_target, co_out, co_scale = "dense";
  ConfigFlags co_cfg;
  co->add_option("--model-image", co_image, "Model image")->required();
  co->add_option("--model-field", co_model, "Model distance fields")->required();
  co->add_option("--target-field", co_target, "Target distance fields")->required();
  co->add_option("--scale", co_scale, "dense or tps")->check(CLI::IsMember({"dense", "tps"}));
  co->add_option("--out", co_out, "Output matrix (a .json sidecar is written beside it)")->required();
  co_cfg.attach(co);

  // warp-dense
  auto* wd = app.add_subcommand("warp-dense", "Softmax warp of an image or layout through a matrix");
  std::string wd_matrix, wd_image, wd_layout, wd_out, wd_scores;
  double wd_alpha = kDefaultAlpha;
  wd->add_option("--matrix", wd_matrix, "Correspondence matrix")->required();
  auto* wd_img_opt = wd->add_option("--image", wd_image, "Image (.png or .cttn)");
  auto* wd_lay_opt = wd->add_option("--layout", wd_layout, "Label PNG");
  wd_img_opt->excludes(wd_lay_opt);
  wd->add_option("--out", wd_out, "Output (.png or .cttn; label PNG for --layout)")->required();
  wd->add_option("--scores-out", wd_scores, "Soft warped layout scores (--layout only)");
  wd->add_option("--alpha", wd_alpha, "Softmax sharpness");

  // tps-fit
  auto* tf = app.add_subcommand("tps-fit", "Control points from a TPS-scale matrix, then the spline");
  std::string tf_matrix, tf_control, tf_out, tf_control_out;
  ConfigFlags tf_cfg;
  auto* tf_m = tf->add_option("--matrix", tf_matrix, "TPS-scale correspondence matrix");
  auto* tf_c = tf->add_option("--control", tf_control, "Control grid JSON to fit directly");
  tf_m->excludes(tf_c);
  tf->add_option("--out", tf_out, "Output spline JSON")->required();
  tf->add_option("--control-out", tf_control_out, "Write the control grid used");
  tf_cfg.attach(tf);

  // tps-apply
  auto* ta = app.add_subcommand("tps-apply", "Backward-warp an image with a fitted spline");
  std::string ta_tps, ta_image, ta_out;
  ta->add_option("--tps", ta_tps, "Spline JSON")->required();
  ta->add_option("--image", ta_image, "Image (.png or .cttn)")->required();
  ta->add_option("--out", ta_out, "Output (.png or .cttn)")->required();

  // layout-merge
  auto* lm = app.add_subcommand("layout-merge", "Write preserved target labels over a layout prediction");
  std::string lm_pred, lm_warped, lm_preserved, lm_out;
  auto* lm_p = lm->add_option("--pred", lm_pred, "Layout prediction label PNG");
  auto* lm_w = lm->add_option("--warped", lm_warped, "Warped layout; its limbs and clothes become the prediction");
  lm_p->excludes(lm_w);
  lm->add_option("--preserved", lm_preserved, "Target preserved layout")->required();
  lm->add_option("--out", lm_out, "Merged label PNG")->required();

  // fuse
  auto* fu = app.add_subcommand("fuse", "Attention fusion of the TPS result and a generated image");
  std::string fu_tps, fu_gen, fu_mask, fu_out, fu_warped, fu_layout, fu_body;
  std::optional<double> fu_identity;
  fu->add_option("--tps", fu_tps, "TPS-warped clothes")->required();
  fu->add_option("--gen", fu_gen, "Generated image");
  fu->add_option("--warped", fu_warped, "Dense-warped clothes, for the default generated image");
  fu->add_option("--layout", fu_layout, "Merged target layout, for the default generated image");
  fu->add_option("--body", fu_body, "Target body image, for the default generated image");
  auto* fu_m = fu->add_option("--mask", fu_mask, "Attention mask PNG");
  auto* fu_i = fu->add_option("--identity-mask", fu_identity, "Constant attention mask value");
  fu_m->excludes(fu_i);
  fu->add_option("--out", fu_out, "Output (.png or .cttn)")->required();

  // losses
  auto* lo = app.add_subcommand("losses", "All training losses for one set of intermediates");
  std::string lo_fused, lo_tps, lo_truth, lo_control, lo_scores, lo_layout, lo_model, lo_attention, lo_body, lo_out;
  ConfigFlags lo_cfg;
  lo->add_option("--fused", lo_fused, "Fused result")->required();
  lo->add_option("--tps-clothes", lo_tps, "TPS-warped clothes")->required();
  lo->add_option("--truth-clothes", lo_truth, "Reference clothes")->required();
  lo->add_option("--control", lo_control, "Control grid JSON")->required();
  lo->add_option("--layout-scores", lo_scores, "Soft warped layout")->required();
  lo->add_option("--target-layout", lo_layout, "Merged target layout")->required();
  lo->add_option("--model-clothes", lo_model, "Model clothes")->required();
  lo->add_option("--attention", lo_attention, "Attention mask (.png or .cttn)")->required();
  lo->add_option("--body", lo_body, "Target body image")->required();
  lo->add_option("--out", lo_out, "Also write the JSON here");
  lo_cfg.attach(lo);

  // metrics
  auto* me = app.add_subcommand("metrics", "SSIM scores or the inception score");
  std::string me_warped, me_fused, me_truth, me_body, me_layout, me_a, me_b, me_mask, me_probs, me_out;
  me->add_option("--warped", me_warped, "Dense-warped clothes");
  me->add_option("--fused", me_fused, "Fused result");
  me->add_option("--truth-clothes", me_truth, "Ground-truth clothes");
  me->add_option("--body", me_body, "Target body image");
  me->add_option("--target-layout", me_layout, "Merged target layout");
  me->add_option("--a", me_a, "First image for a plain SSIM");
  me->add_option("--b", me_b, "Second image for a plain SSIM");
  me->add_option("--mask", me_mask, "Binary mask PNG for --a/--b");
  me->add_option("--probs", me_probs, "N x K class probabilities for the inception score");
  me->add_option("--out", me_out, "Also write the JSON here");

  // pipeline
  auto* pi = app.add_subcommand("pipeline", "Run every stage on file inputs");
  PipelineInputs pi_in;
  std::string pi_fixture, pi_out, pi_layout, pi_gen, pi_mask, pi_truth;
  std::optional<double> pi_identity;
  ConfigFlags pi_cfg;
  pi->add_option("--fixture", pi_fixture, "Directory holding the standard input file names");
  pi->add_option("--model-image", pi_in.model_image, "Model image");
  pi->add_option("--model-keypoints", pi_in.model_keypoints, "Model keypoints JSON");
  pi->add_option("--model-layout", pi_in.model_layout, "Model layout label PNG");
  pi->add_option("--target-keypoints", pi_in.target_keypoints, "Target keypoints JSON");
  pi->add_option("--target-body", pi_in.target_body, "Target body image");
  pi->add_option("--target-preserved", pi_in.target_preserved, "Target preserved layout label PNG");
  pi->add_option("--layout-pred", pi_layout, "Layout prediction label PNG");
  pi->add_option("--generated", pi_gen, "Generated image");
  auto* pi_m = pi->add_option("--attention-mask", pi_mask, "Attention mask PNG");
  auto* pi_i = pi->add_option("--identity-mask", pi_identity, "Constant attention mask value");
  pi_m->excludes(pi_i);
  pi->add_option("--truth-clothes", pi_truth, "Ground-truth clothes");
  pi->add_option("--out", pi_out, "Output directory")->required();
  pi_cfg.attach(pi);

  // fixture
  auto* fx = app.add_subcommand("fixture", "Write a bundled synthetic input set");
  std::string fx_kind = "smoke", fx_out;
  fx->add_option("--kind", fx_kind, "smoke or identity")->check(CLI::IsMember({"smoke", "identity"}));
  fx->add_option("--out", fx_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (*df) {
      const KeypointSet k = load_keypoints(df_keypoints);
      save_tensor(distance_fields(k).field, df_out);
      if (!df_confidence.empty()) save_tensor(confidence_map(k), df_confidence);
    } else if (*co) {
      const PipelineConfig c = co_cfg.resolve();
      WorkerScope scope(c.workers);
      const Tensor image = load_png(co_image).with_precision(c.precision);
      const Tensor pm = load_tensor(co_model).with_precision(c.precision);
      const Tensor pt = load_tensor(co_target).with_precision(c.precision);
      save_correspondence(correspond(c, image, pm, pt, co_scale == "tps" ? Scale::tps : Scale::dense), co_out);
    } else if (*wd) {
      const CorrespondenceMatrix m = load_correspondence(wd_matrix);
      if (!wd_layout.empty()) {
        const Tensor scores = warp_layout_scores(m, load_label_png(wd_layout), wd_alpha);
        save_label_png(argmax_labels(scores), wd_out);
        if (!wd_scores.empty()) save_tensor(scores, wd_scores);
      } else if (!wd_image.empty()) {
        const Tensor x = load_image_any(wd_image);
        const bool at_grid = x.rank() == 3 && x.dim(0) == m.cols.grid_h() && x.dim(1) == m.cols.grid_w();
        save_image_any(at_grid ? dense_warp(m, x, wd_alpha) : dense_warp_blocks(m, x, wd_alpha), wd_out);
      } else {
        throw ValidationError("warp-dense needs --image or --layout");
      }
    } else if (*tf) {
      const PipelineConfig c = tf_cfg.resolve();
      ControlGrid control;
      if (!tf_control.empty()) {
        control = control_grid_from_json(parse_json(read_text(tf_control), tf_control));
      } else if (!tf_matrix.empty()) {
        control = control_points(c, load_correspondence(tf_matrix));
      } else {
        throw ValidationError("tps-fit needs --matrix or --control");
      }
      if (!tf_control_out.empty()) write_text(tf_control_out, dump_json(control_grid_to_json(control)));
      write_text(tf_out, dump_json(tps_to_json(tps_fit(control, c.lambda_k))));
    } else if (*ta) {
      const TpsTransform t = tps_from_json(parse_json(read_text(ta_tps), ta_tps));
      save_image_any(tps_apply(t, load_image_any(ta_image)), ta_out);
    } else if (*lm) {
      const SegmentationMap preserved = load_label_png(lm_preserved);
      SegmentationMap pred = !lm_pred.empty()     ? load_label_png(lm_pred)
                             : !lm_warped.empty() ? default_layout_prediction(load_label_png(lm_warped))
                                                  : throw ValidationError("layout-merge needs --pred or --warped");
      save_label_png(merge_layout(pred, preserved), lm_out);
    } else if (*fu) {
      const Tensor tps = load_image_any(fu_tps);
      Tensor gen;
      if (!fu_gen.empty()) {
        gen = load_image_any(fu_gen);
      } else if (!fu_warped.empty() && !fu_layout.empty() && !fu_body.empty()) {
        const SegmentationMap layout = load_label_png(fu_layout);
        const Tensor warped = load_image_any(fu_warped);
        gen = add(masked_clothes(warped, clothes_mask(layout).with_precision(warped.precision())),
                  extract_nontarget(load_image_any(fu_body), layout));
      } else {
        throw ValidationError("fuse needs --gen, or --warped with --layout and --body");
      }
      const Tensor raw = !fu_mask.empty() ? load_mask_png(fu_mask)
                                          : Tensor::filled({tps.dim(0), tps.dim(1)}, fu_identity.value_or(1.0));
      save_image_any(fuse_attention(tps, gen, AttentionMask(raw.with_precision(tps.precision()))), fu_out);
    } else if (*lo) {
      const PipelineConfig c = lo_cfg.resolve();
      WorkerScope scope(c.workers);
      const SegmentationMap layout = load_label_png(lo_layout);
      const Tensor truth = load_image_any(lo_truth);
      const Tensor nontarget = extract_nontarget(load_image_any(lo_body), layout);
      const Tensor reference = add(masked_clothes(truth, clothes_mask(layout).with_precision(truth.precision())), nontarget);
      const fs::path attention(lo_attention);
      Tensor mask = attention.extension() == ".png" ? load_mask_png(attention) : load_tensor(attention);
      const LossReport r = compute_losses(
          c, LossInputs{load_image_any(lo_fused), reference, load_image_any(lo_tps), truth,
                        control_grid_from_json(parse_json(read_text(lo_control), lo_control)), load_tensor(lo_scores),
                        layout, load_image_any(lo_model), mask});
      emit(out, r.to_json(), lo_out);
    } else if (*me) {
      Json doc = Json::object();
      if (!me_probs.empty()) doc["inception_score"] = inception_score(load_tensor(me_probs));
      if (!me_a.empty() || !me_b.empty()) {
        if (me_a.empty() || me_b.empty()) throw ValidationError("metrics: --a and --b go together");
        const Tensor a = load_image_any(me_a), b = load_image_any(me_b);
        doc["ssim"] = ssim(a, b).mean;
        if (!me_mask.empty()) {
          Tensor mask = load_mask_png(me_mask);
          doc["masked_ssim"] = masked_ssim(a, b, mask);
        }
      }
      if (!me_truth.empty()) {
        if (me_warped.empty() || me_fused.empty() || me_body.empty() || me_layout.empty()) {
          throw ValidationError("metrics: --truth-clothes needs --warped, --fused, --body and --target-layout");
        }
        const SegmentationMap layout = load_label_png(me_layout);
        const Tensor truth = load_image_any(me_truth);
        const Tensor reference = add(masked_clothes(truth, clothes_mask(layout).with_precision(truth.precision())),
                                     extract_nontarget(load_image_any(me_body), layout));
        const MetricReport r = compute_metrics(load_image_any(me_warped), load_image_any(me_fused), truth, reference, layout);
        auto put = [&](const char* key, const std::optional<double>& v) { doc[key] = v ? Json(*v) : Json(nullptr); };
        put("warp_ssim", r.warp_ssim);
        put("mask_ssim", r.mask_ssim);
        put("h_ssim", r.h_ssim);
      }
      if (doc.empty()) throw ValidationError("metrics: nothing to compute");
      emit(out, doc, me_out);
    } else if (*pi) {
      PipelineConfig c = pi_cfg.path.empty() && !pi_fixture.empty() && fs::exists(fs::path(pi_fixture) / "config.json")
                             ? load_config(fs::path(pi_fixture) / "config.json")
                             : PipelineConfig{};
      if (!pi_cfg.path.empty()) c = load_config(pi_cfg.path);
      ConfigFlags overrides = pi_cfg;
      overrides.path.clear();
      {
        PipelineConfig o = c;
        if (overrides.seed) o.seed = *overrides.seed;
        if (overrides.alpha) o.alpha = *overrides.alpha;
        if (overrides.grid) o.grid = *overrides.grid;
        if (overrides.lambda_k) o.lambda_k = *overrides.lambda_k;
        if (overrides.workers) o.workers = *overrides.workers;
        if (overrides.precision) o.precision = *overrides.precision == "f32" ? Precision::f32 : Precision::f64;
        c = o;
      }
      PipelineInputs in = pi_fixture.empty() ? PipelineInputs{} : fixture_inputs(pi_fixture);
      auto take = [](fs::path& slot, const fs::path& given) {
        if (!given.empty()) slot = given;
      };
      take(in.model_image, pi_in.model_image);
      take(in.model_keypoints, pi_in.model_keypoints);
      take(in.model_layout, pi_in.model_layout);
      take(in.target_keypoints, pi_in.target_keypoints);
      take(in.target_body, pi_in.target_body);
      take(in.target_preserved, pi_in.target_preserved);
      if (!pi_layout.empty()) in.layout_prediction = pi_layout;
      if (!pi_gen.empty()) in.generated = pi_gen;
      if (!pi_mask.empty()) in.attention_mask = pi_mask;
      if (!pi_truth.empty()) in.truth_clothes = pi_truth;
      in.identity_mask = pi_identity;
      for (const auto* p : {&in.model_image, &in.model_keypoints, &in.model_layout, &in.target_keypoints,
                            &in.target_body, &in.target_preserved}) {
        if (p->empty()) throw ValidationError("pipeline: every mandatory input needs a path (or use --fixture)");
      }
      const PipelineResult r = run_pipeline(c, in, pi_out);
      out << dump_json(r.report);
    } else if (*fx) {
      write_fixture(fx_kind == "identity" ? identity_fixture() : smoke_fixture(), fx_out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace ctnet
