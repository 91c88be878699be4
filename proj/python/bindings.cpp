#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "presto/ablation.hpp"
#include "presto/checkpoint_io.hpp"
#include "presto/downstream.hpp"
#include "presto/pretrain.hpp"
#include "presto/pts_io.hpp"
#include "presto/synth.hpp"

namespace py = pybind11;
using namespace presto;

namespace {

py::array_t<float> to_array(const std::vector<std::vector<float>>& rows) {
  const size_t n = rows.size();
  const size_t d = n ? rows[0].size() : 0;
  py::array_t<float> out({n, d});
  auto buf = out.mutable_unchecked<2>();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) buf(i, j) = rows[i][j];
  return out;
}

ModelConfig make_config(int depth, int width, int n_heads) {
  ModelConfig cfg;
  cfg.depth = depth;
  cfg.d_e = width;
  cfg.n_heads = n_heads;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_presto, m) {
  m.doc() = "Masked-autoencoder pretraining for pixel timeseries";

  py::register_exception<IoError>(m, "IoError");

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init(&make_config), py::arg("depth") = 2, py::arg("width") = 128,
           py::arg("n_heads") = 8)
      .def_readonly("depth", &ModelConfig::depth)
      .def_readonly("width", &ModelConfig::d_e)
      .def_readonly("dec_depth", &ModelConfig::dec_depth)
      .def_readonly("dec_width", &ModelConfig::d_dec);

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_property_readonly("labels",
                             [](const Dataset& ds) { return ds.labels; });

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_property_readonly("config", [](const Checkpoint& c) { return c.config; })
      .def_property_readonly("n_params",
                             [](const Checkpoint& c) { return count_params(c.params); });

  m.def(
      "synthesize",
      [](int64_t n_samples, int n_classes, int timesteps, double noise_sigma,
         double dropout, uint64_t seed) {
        SyntheticWorldConfig sw;
        sw.n_samples = n_samples;
        sw.n_classes = n_classes;
        sw.T = timesteps;
        sw.noise_sigma = noise_sigma;
        sw.dropout = dropout;
        sw.seed = seed;
        return generate_synthetic(sw);
      },
      py::arg("n_samples"), py::arg("n_classes") = 4, py::arg("timesteps") = kDefaultT,
      py::arg("noise_sigma") = 0.1, py::arg("dropout") = 0.0, py::arg("seed") = 0);

  m.def("read_pts", &read_pts, py::arg("path"));
  m.def("write_pts", &write_pts, py::arg("path"), py::arg("dataset"));
  m.def("read_checkpoint", &read_checkpoint, py::arg("path"));
  m.def("write_checkpoint", &write_checkpoint, py::arg("path"), py::arg("checkpoint"));

  m.def(
      "pretrain",
      [](const Dataset& ds, const ModelConfig& cfg, int epochs, int batch_size,
         double mask_ratio, double lambda, double lr, uint64_t seed) {
        PretrainConfig pc;
        pc.epochs = epochs;
        pc.batch_size = batch_size;
        pc.mask_ratio = mask_ratio;
        pc.lambda = lambda;
        pc.lr_max = lr;
        pc.seed = seed;
        PretrainResult res = pretrain(ds, cfg, pc);
        std::vector<double> losses;
        for (const auto& e : res.epoch_losses) losses.push_back(e.total());
        return py::make_tuple(std::move(res.ckpt), std::move(losses));
      },
      py::arg("dataset"), py::arg("config") = ModelConfig{}, py::arg("epochs") = 10,
      py::arg("batch_size") = 256, py::arg("mask_ratio") = 0.75, py::arg("lambda") = 2.0,
      py::arg("lr") = 1e-3, py::arg("seed") = 0);

  m.def(
      "embed",
      [](const Checkpoint& ckpt, const Dataset& ds, int months) {
        return to_array(months >= 0 ? embed_dataset_months(ckpt, ds, months)
                                    : embed_dataset(ckpt, ds));
      },
      py::arg("checkpoint"), py::arg("dataset"), py::arg("months") = -1);

  m.def("validate_probe", &validate_probe, py::arg("checkpoint"), py::arg("dataset"));

  m.def(
      "aggregate_image",
      [](const Checkpoint& ckpt, const Dataset& ds) {
        return aggregate_image(ckpt, ds.samples);
      },
      py::arg("checkpoint"), py::arg("pixels"));

  m.def(
      "finetune",
      [](const Checkpoint& ckpt, const Dataset& ds, double lr, int epochs,
         uint64_t seed) {
        FinetuneConfig fc;
        fc.lr = lr;
        fc.epochs = epochs;
        fc.seed = seed;
        FinetuneResult res = finetune(ckpt, ds, fc);
        return py::make_tuple(std::move(res.ckpt), res.val_accuracy);
      },
      py::arg("checkpoint"), py::arg("dataset"), py::arg("lr") = 3e-4,
      py::arg("epochs") = 20, py::arg("seed") = 0);

  m.def(
      "count_params",
      [](const ModelConfig& cfg) {
        ParamStore params = init_params(cfg, 0);
        return py::make_tuple(count_params(params), count_params_encoder_side(params));
      },
      py::arg("config") = ModelConfig{});

  m.def(
      "count_flops",
      [](const ModelConfig& cfg, const std::string& preset, bool with_decoder) {
        std::vector<TokenInfo> tokens;
        if (preset == "full")
          tokens = full_input_tokens();
        else if (preset == "ms")
          tokens = ms_pixel_tokens();
        else if (preset == "rgb")
          tokens = rgb_pixel_tokens();
        else
          throw std::invalid_argument("count_flops: preset must be full, ms, or rgb");
        FlopCount fc = count_flops(cfg, tokens, with_decoder ? tokens
                                                             : std::vector<TokenInfo>{});
        return fc.total();
      },
      py::arg("config") = ModelConfig{}, py::arg("preset") = "full",
      py::arg("with_decoder") = false);
}
