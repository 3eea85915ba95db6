#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ctnet/errors.hpp"
#include "ctnet/fusion.hpp"
#include "ctnet/io.hpp"
#include "ctnet/layout.hpp"
#include "ctnet/losses.hpp"
#include "ctnet/metrics.hpp"
#include "ctnet/ops.hpp"
#include "ctnet/pipeline.hpp"
#include "ctnet/pose_fields.hpp"
#include "ctnet/synthetic.hpp"
#include "ctnet/warping.hpp"

namespace py = pybind11;
using namespace ctnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape dims(a.shape(), a.shape() + a.ndim());
  if (dims.empty()) dims = {1};
  return Tensor(dims, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.dims().begin(), t.dims().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

SegmentationMap to_map(const LabelArray& a) {
  if (a.ndim() != 2) throw ShapeError("label map must be 2-D");
  return SegmentationMap(a.shape(0), a.shape(1), std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

LabelArray to_labels(const SegmentationMap& s) {
  LabelArray out({s.height(), s.width()});
  std::copy(s.labels().begin(), s.labels().end(), out.mutable_data());
  return out;
}

std::vector<Point> to_points(const Array& a) {
  const Tensor t = to_tensor(a);
  require_rank(t, 2, "control points");
  if (t.dim(1) != 2) throw ShapeError("control points must be K x 2 (x, y)");
  std::vector<Point> p(t.dim(0));
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = {t.at(i, 0), t.at(i, 1)};
  return p;
}

ControlGrid make_grid(std::size_t grid, const Array& source, const Array& target) {
  ControlGrid c;
  c.grid = grid;
  c.source = to_points(source);
  c.target = to_points(target);
  c.validate();
  return c;
}

FeaturePyramid pyramid(const std::vector<Array>& levels, std::optional<std::vector<double>> weights) {
  std::vector<Tensor> t;
  for (const auto& l : levels) t.push_back(to_tensor(l));
  FeaturePyramid p = FeaturePyramid::uniform(std::move(t));
  if (weights) p.weights = *weights;
  p.validate();
  return p;
}

PipelineConfig config_from(const std::optional<std::string>& text) {
  if (!text) return {};
  PipelineConfig c = PipelineConfig::from_json(parse_json(*text, "config"));
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_ctnet, m) {
  m.doc() = "Garment-transfer warping, fusion and loss kernels";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", validation.ptr());
  py::register_exception<InvalidWindowError>(m, "InvalidWindowError", validation.ptr());
  py::register_exception<BoundsError>(m, "BoundsError", validation.ptr());
  py::register_exception<ParseError>(m, "ParseError", validation.ptr());
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
  py::register_exception<FitError>(m, "FitError", numerical.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());

  m.attr("DEFAULT_ALPHA") = kDefaultAlpha;
  m.attr("LABEL_COUNT") = kLabelCount;

  // tensor core
  m.def("softmax_rows", [](const Array& s, double alpha) { return to_array(softmax_rows(to_tensor(s), alpha)); },
        py::arg("scores"), py::arg("alpha") = kDefaultAlpha);
  m.def(
      "unfold",
      [](const Array& x, std::size_t size, std::size_t stride, std::size_t padding) {
        return to_array(unfold(to_tensor(x), WindowSpec{size, stride, padding}));
      },
      py::arg("x"), py::arg("size") = 3, py::arg("stride") = 1, py::arg("padding") = 1);
  m.def("bilinear_sample", [](const Array& img, const Array& rc) {
    return to_array(bilinear_sample(to_tensor(img), to_tensor(rc)));
  });

  // pose fields
  m.def(
      "distance_fields",
      [](const std::string& keypoints_json) {
        const DistanceField f = distance_fields(keypoints_from_json(parse_json(keypoints_json, "keypoints")));
        return py::make_tuple(to_array(f.field), std::vector<bool>(f.present.begin(), f.present.end()));
      },
      py::arg("keypoints_json"));

  // correspondence and warping
  py::class_<CorrespondenceMatrix>(m, "CorrespondenceMatrix")
      .def_property_readonly("scores", [](const CorrespondenceMatrix& c) { return to_array(c.scores); })
      .def_property_readonly("grid_rows", [](const CorrespondenceMatrix& c) {
        return py::make_tuple(c.rows.grid_h(), c.rows.grid_w());
      })
      .def_property_readonly("grid_cols", [](const CorrespondenceMatrix& c) {
        return py::make_tuple(c.cols.grid_h(), c.cols.grid_w());
      })
      .def("save", [](const CorrespondenceMatrix& c, const fs::path& p) { save_correspondence(c, p); });
  m.def("load_correspondence", &load_correspondence);
  m.def(
      "correspond",
      [](const Array& image, const Array& model_field, const Array& target_field, const std::string& scale,
         const std::optional<std::string>& config) {
        if (scale != "dense" && scale != "tps") throw ValidationError("scale must be 'dense' or 'tps'");
        return correspond(config_from(config), to_tensor(image), to_tensor(model_field), to_tensor(target_field),
                          scale == "dense" ? Scale::dense : Scale::tps);
      },
      py::arg("model_image"), py::arg("model_field"), py::arg("target_field"), py::arg("scale") = "dense",
      py::arg("config") = py::none());
  m.def(
      "dense_warp_scores",
      [](const Array& s, const Array& x, std::size_t h, std::size_t w, double alpha) {
        return to_array(dense_warp_scores(to_tensor(s), to_tensor(x), h, w, alpha));
      },
      py::arg("scores"), py::arg("x"), py::arg("out_h"), py::arg("out_w"), py::arg("alpha") = kDefaultAlpha);
  m.def(
      "dense_warp",
      [](const CorrespondenceMatrix& c, const Array& x, double alpha) {
        const Tensor t = to_tensor(x);
        const bool grid_sized = t.rank() == 3 && t.dim(0) == c.cols.grid_h() && t.dim(1) == c.cols.grid_w();
        return to_array(grid_sized ? dense_warp(c, t, alpha) : dense_warp_blocks(c, t, alpha));
      },
      py::arg("matrix"), py::arg("x"), py::arg("alpha") = kDefaultAlpha);

  py::class_<TpsTransform>(m, "TpsTransform")
      .def("map",
           [](const TpsTransform& t, double x, double y) {
             const Point p = t.map({x, y});
             return py::make_tuple(p.x, p.y);
           })
      .def("apply", [](const TpsTransform& t, const Array& img) { return to_array(tps_apply(t, to_tensor(img))); })
      .def_readonly("lam", &TpsTransform::lambda);
  m.def(
      "tps_fit",
      [](const Array& source, const Array& target, std::size_t grid, double lam) {
        return tps_fit(make_grid(grid, source, target), lam);
      },
      py::arg("source"), py::arg("target"), py::arg("grid"), py::arg("lam") = 1e-6);
  m.def(
      "second_order_constraint",
      [](const Array& source, const Array& target, std::size_t grid, double lr, double ls) {
        return second_order_constraint(make_grid(grid, source, target), lr, ls);
      },
      py::arg("source"), py::arg("target"), py::arg("grid"), py::arg("lambda_r") = 1.0, py::arg("lambda_s") = 1.0);
  m.def(
      "tps_loss",
      [](const Array& warped, const Array& truth, const Array& source, const Array& target, std::size_t grid) {
        return tps_loss(to_tensor(warped), to_tensor(truth), make_grid(grid, source, target));
      },
      py::arg("warped"), py::arg("truth"), py::arg("source"), py::arg("target"), py::arg("grid"));

  // layout and fusion
  m.def(
      "warp_layout",
      [](const CorrespondenceMatrix& c, const LabelArray& s, double alpha) {
        return to_labels(warp_layout(c, to_map(s), alpha));
      },
      py::arg("matrix"), py::arg("labels"), py::arg("alpha") = kDefaultAlpha);
  m.def("merge_layout",
        [](const LabelArray& pred, const LabelArray& kept) { return to_labels(merge_layout(to_map(pred), to_map(kept))); });
  m.def("cross_entropy_loss",
        [](const Array& logits, const LabelArray& truth) { return cross_entropy_loss(to_tensor(logits), to_map(truth)); });
  m.def("masked_clothes",
        [](const Array& w, const Array& mask) { return to_array(masked_clothes(to_tensor(w), to_tensor(mask))); });
  m.def("extract_nontarget", [](const Array& body, const LabelArray& layout) {
    return to_array(extract_nontarget(to_tensor(body), to_map(layout)));
  });
  m.def("fuse_attention", [](const Array& tps, const Array& gen, const Array& mask) {
    return to_array(fuse_attention(to_tensor(tps), to_tensor(gen), AttentionMask(to_tensor(mask))));
  });
  m.def("attention_regularizer",
        [](const Array& mask) { return attention_regularizer(AttentionMask(to_tensor(mask))); });

  // losses and metrics
  m.def(
      "perceptual_loss",
      [](const std::vector<Array>& a, const std::vector<Array>& b, std::optional<std::vector<double>> w) {
        return perceptual_loss(pyramid(a, w), pyramid(b, w));
      },
      py::arg("a"), py::arg("b"), py::arg("weights") = py::none());
  m.def("style_loss", [](const std::vector<Array>& a, const std::vector<Array>& b) {
    return style_loss(pyramid(a, std::nullopt), pyramid(b, std::nullopt));
  });
  m.def("gram_matrix", [](const Array& f) { return to_array(gram_matrix(to_tensor(f))); });
  m.def(
      "contextual_loss", [](const Array& x, const Array& y, double h) { return contextual_loss(to_tensor(x), to_tensor(y), h); },
      py::arg("x"), py::arg("y"), py::arg("h") = kContextualBandwidth);
  m.def("adversarial_loss",
        [](const Array& real, const Array& fake) { return adversarial_loss(to_tensor(real), to_tensor(fake)); });
  m.def("l1_loss", [](const Array& a, const Array& b) { return l1_loss(to_tensor(a), to_tensor(b)); });
  m.def(
      "total_loss",
      [](const std::array<double, 8>& c, std::optional<std::array<double, 8>> w) {
        LossComponents lc{c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]};
        LossWeights lw;
        if (w) lw = {(*w)[0], (*w)[1], (*w)[2], (*w)[3], (*w)[4], (*w)[5], (*w)[6], (*w)[7]};
        return total_loss(lc, lw).total;
      },
      py::arg("components"), py::arg("weights") = py::none());
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_tensor(a), to_tensor(b)).mean; });
  m.def("masked_ssim", [](const Array& a, const Array& b, const Array& mask) {
    return masked_ssim(to_tensor(a), to_tensor(b), to_tensor(mask));
  });
  m.def("inception_score", [](const Array& p) { return inception_score(to_tensor(p)); });

  // io and pipeline
  m.def("load_png", [](const fs::path& p) { return to_array(load_png(p)); });
  m.def("save_png", [](const Array& img, const fs::path& p) { save_png(to_tensor(img), p); });
  m.def("load_labels", [](const fs::path& p) { return to_labels(load_label_png(p)); });
  m.def("write_fixture", [](const std::string& kind, const fs::path& dir) {
    if (kind != "smoke" && kind != "identity") throw ValidationError("fixture kind must be 'smoke' or 'identity'");
    write_fixture(kind == "identity" ? identity_fixture() : smoke_fixture(), dir);
  });
  m.def(
      "run_pipeline",
      [](const fs::path& fixture, const fs::path& out, const std::optional<std::string>& config) {
        PipelineConfig c = config ? config_from(config)
                                  : (fs::exists(fixture / "config.json") ? load_config(fixture / "config.json")
                                                                         : PipelineConfig{});
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(c, fixture_inputs(fixture), out);
        }
        return py::make_tuple(dump_json(r.report), dump_json(r.manifest));
      },
      py::arg("fixture"), py::arg("out"), py::arg("config") = py::none());
}
