#include <cstring>
#include <filesystem>
#include <optional>
#include <string>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "srdrm/checkpoint.hpp"
#include "srdrm/datakit.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/inference.hpp"
#include "srdrm/losses.hpp"
#include "srdrm/metrics.hpp"
#include "srdrm/trainer.hpp"

namespace py = pybind11;
using namespace srdrm;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

ImageRGB8 to_image(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw ContractError("expected an (H, W, 3) uint8 array");
  }
  ImageRGB8 img(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size());
  return img;
}

U8Array from_image(const ImageRGB8& img) {
  U8Array out({img.height, img.width, std::size_t{3}});
  std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
  return out;
}

template <typename T, typename A>
Tensor4<T> to_tensor(const A& a) {
  if (a.ndim() != 4) throw ContractError("expected an (N, C, H, W) array");
  const Shape4 s{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                 static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(3))};
  return Tensor4<T>(s, std::vector<T>(a.data(), a.data() + s.count()));
}

template <typename T>
py::array_t<T> from_tensor(const Tensor4<T>& t) {
  const Shape4& s = t.shape();
  py::array_t<T> out({s.n, s.c, s.h, s.w});
  std::memcpy(out.mutable_data(), t.data(), t.size() * sizeof(T));
  return out;
}

template <typename T>
py::tuple loss_tuple(const LossResult<T>& r) {
  return py::make_tuple(r.value, from_tensor(r.gradient));
}

py::dict uiqm_dict(const UiqmResult& r) {
  py::dict d;
  d["uicm"] = r.uicm;
  d["uism"] = r.uism;
  d["uiconm"] = r.uiconm;
  d["uiqm"] = r.uiqm;
  return d;
}

py::dict row_dict(const MetricRow& r) {
  py::dict d;
  d["id"] = r.id;
  d["psnr"] = r.psnr;
  d["ssim"] = r.ssim;
  d["uiqm"] = r.uiqm;
  return d;
}

py::dict step_dict(const StepRecord& s) {
  py::dict d;
  d["step"] = s.step;
  d["epoch"] = s.epoch;
  d["total"] = s.total;
  d["content"] = s.content;
  d["perceptual"] = s.perceptual;
  d["l2"] = s.l2;
  d["adversarial"] = s.adversarial;
  d["d_loss"] = s.d_loss;
  d["d_real_mean"] = s.d_real_mean;
  d["d_fake_mean"] = s.d_fake_mean;
  return d;
}

}  // namespace

PYBIND11_MODULE(_srdrm, m) {
  m.doc() = "Deep residual multiplier super-resolution toolkit";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ContractError>(m, "ContractError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  auto format_error = py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<VersionError>(m, "VersionError", format_error.ptr());
  py::register_exception<CorruptionError>(m, "CorruptionError", format_error.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());

  // metrics
  m.def("psnr", [](const U8Array& a, const U8Array& b) { return psnr(to_image(a), to_image(b)); },
        py::arg("a"), py::arg("b"));
  m.def("ssim", [](const U8Array& a, const U8Array& b) { return ssim(to_image(a), to_image(b)); },
        py::arg("a"), py::arg("b"));
  m.def("uiqm", [](const U8Array& a) { return uiqm_dict(uiqm(to_image(a))); }, py::arg("image"));
  m.def(
      "evaluate_dataset",
      [](const std::filesystem::path& generated, const std::filesystem::path& truth) {
        const MetricReport r = evaluate_dataset(generated, truth);
        py::list rows;
        for (const auto& row : r.rows) rows.append(row_dict(row));
        py::dict d;
        d["rows"] = rows;
        d["unmatched"] = r.unmatched;
        d["mean"] = r.mean ? py::object(row_dict(*r.mean)) : py::none();
        return d;
      },
      py::arg("generated_dir"), py::arg("truth_dir"));

  // losses on (N, 3, H, W) float64 arrays in [-1, 1]
  m.def(
      "global_similarity_loss",
      [](const F64Array& g, const F64Array& t) {
        return loss_tuple(global_similarity_loss(to_tensor<double>(g), to_tensor<double>(t)));
      },
      py::arg("generated"), py::arg("target"));
  m.def(
      "perceptual_redmean_loss",
      [](const F64Array& g, const F64Array& t) {
        return loss_tuple(perceptual_redmean_loss(to_tensor<double>(g), to_tensor<double>(t)));
      },
      py::arg("generated"), py::arg("target"));
  m.def("redmean_disparity", &redmean_disparity, py::arg("gen_r"), py::arg("gen_g"),
        py::arg("gen_b"), py::arg("tgt_r"), py::arg("tgt_g"), py::arg("tgt_b"));

  // datakit
  m.def(
      "resize_bicubic",
      [](const U8Array& a, std::size_t w, std::size_t h) {
        return from_image(resize_bicubic(to_image(a), w, h));
      },
      py::arg("image"), py::arg("width"), py::arg("height"));
  m.def("halve", [](const U8Array& a) { return from_image(halve(to_image(a))); },
        py::arg("image"));
  m.def(
      "prepare_lr_sets",
      [](const std::filesystem::path& in, const std::filesystem::path& out,
         std::vector<int> scales, int jpeg_quality, std::uint64_t seed) {
        PrepareOptions opt;
        opt.scales = std::move(scales);
        opt.jpeg_quality = jpeg_quality;
        opt.seed = seed;
        const DatasetManifest mf = prepare_lr_sets(in, out, opt);
        py::dict counts;
        for (Split s : {Split::train, Split::val, Split::test}) {
          counts[py::str(split_name(s))] = mf.pairs(s).size();
        }
        return counts;
      },
      py::arg("input_dir"), py::arg("output_dir"), py::arg("scales") = std::vector<int>{2, 4, 8},
      py::arg("jpeg_quality") = kDefaultJpegQuality, py::arg("seed") = 0);

  // models
  py::class_<Generator<float>>(m, "Generator")
      .def_property_readonly("scale", [](const Generator<float>& g) { return g.config().scale(); })
      .def_property_readonly("base_filters",
                             [](const Generator<float>& g) { return g.config().base_filters; })
      .def_property_readonly("residual_layers",
                             [](const Generator<float>& g) { return g.config().residual_layers; })
      .def("parameter_count", &Generator<float>::parameter_count)
      .def(
          "forward",
          [](const Generator<float>& g, const F32Array& x) {
            return from_tensor(g.forward(to_tensor<float>(x)));
          },
          py::arg("x"), "(N, 3, H, W) float32 in [-1, 1] to the upscaled tensor")
      .def(
          "super_resolve",
          [](const Generator<float>& g, const U8Array& img, std::optional<std::vector<std::size_t>> roi) {
            std::optional<Roi> r;
            if (roi) {
              if (roi->size() != 4) throw ContractError("roi must be (x, y, w, h)");
              r = Roi{(*roi)[0], (*roi)[1], (*roi)[2], (*roi)[3]};
            }
            return from_image(super_resolve(g, to_image(img), r));
          },
          py::arg("image"), py::arg("roi") = py::none())
      .def("save", [](const Generator<float>& g, const std::filesystem::path& p) {
        save_checkpoint(g, p);
      });

  m.def(
      "build_generator",
      [](int scale_exp, bool tiny, std::uint64_t seed) {
        GeneratorConfig c = tiny ? GeneratorConfig::tiny(scale_exp) : GeneratorConfig{};
        c.scale_exp = scale_exp;
        c.validate();
        return build_generator<float>(c, seed);
      },
      py::arg("scale_exp"), py::arg("tiny") = true, py::arg("seed") = 0);
  m.def("load_generator", &load_generator, py::arg("path"));
  m.def(
      "discriminator_map_shape",
      [](std::size_t h, std::size_t w, bool tiny) {
        const DiscriminatorConfig c = tiny ? DiscriminatorConfig::tiny() : DiscriminatorConfig{};
        const Discriminator<float> d = build_discriminator<float>(c, 0);
        const Tensor4<float> x({1, 3, h, w});
        const Shape4 s = d.forward(x, x).shape();
        return py::make_tuple(s.h, s.w);
      },
      py::arg("height"), py::arg("width"), py::arg("tiny") = true);

  // training and evaluation
  m.def(
      "train",
      [](const std::string& config_text, const std::filesystem::path& data,
         const std::filesystem::path& out) {
        const TrainConfig cfg = parse_train_config(config_text);
        cfg.validate();
        const DatasetManifest mf = read_manifest(data);
        validate_manifest(mf);
        TrainLog log;
        {
          py::gil_scoped_release release;
          log = train(cfg, mf, out).log;
        }
        py::list steps;
        for (const auto& s : log.steps) steps.append(step_dict(s));
        return steps;
      },
      py::arg("config_text"), py::arg("data"), py::arg("out_dir"),
      "Runs a training job; returns the per-step records");
  m.def(
      "eval_report",
      [](const Generator<float>& g, const std::filesystem::path& data, const std::string& split) {
        const MetricReport r = eval_report(g, read_manifest(data), parse_split(split));
        py::list rows;
        for (const auto& row : r.rows) rows.append(row_dict(row));
        py::dict d;
        d["rows"] = rows;
        d["mean"] = r.mean ? py::object(row_dict(*r.mean)) : py::none();
        return d;
      },
      py::arg("generator"), py::arg("data"), py::arg("split"));
  m.def(
      "bench",
      [](const Generator<float>& g, std::size_t w, std::size_t h, std::size_t iters,
         std::size_t warmup) {
        BenchReport r;
        {
          py::gil_scoped_release release;
          r = bench(g, w, h, iters, warmup);
        }
        py::dict d;
        d["mean_ms"] = r.mean_ms;
        d["median_ms"] = r.median_ms;
        d["p95_ms"] = r.p95_ms;
        d["fps"] = r.fps;
        d["scale"] = r.scale;
        return d;
      },
      py::arg("generator"), py::arg("width"), py::arg("height"), py::arg("iterations") = 10,
      py::arg("warmup") = 3);
}
