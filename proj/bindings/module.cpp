// Python bindings for the diffusion engine's main operations.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "longdiff/checkpoint.hpp"
#include "longdiff/data.hpp"
#include "longdiff/diffusion.hpp"
#include "longdiff/errors.hpp"
#include "longdiff/manifest.hpp"
#include "longdiff/metrics.hpp"
#include "longdiff/training.hpp"
#include "longdiff/unet.hpp"

namespace py = pybind11;
using namespace longdiff;

namespace {

Volume volume_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 3) throw std::invalid_argument("expected a 3D array");
    Volume v;
    v.shape = Shape3{static_cast<std::uint32_t>(arr.shape(0)),
                     static_cast<std::uint32_t>(arr.shape(1)),
                     static_cast<std::uint32_t>(arr.shape(2))};
    v.voxels.assign(arr.data(), arr.data() + arr.size());
    return v;
}

py::array_t<float> array_from_volume(const Volume& v) {
    py::array_t<float> arr({static_cast<py::ssize_t>(v.shape.depth),
                            static_cast<py::ssize_t>(v.shape.height),
                            static_cast<py::ssize_t>(v.shape.width)});
    std::copy(v.voxels.begin(), v.voxels.end(), arr.mutable_data());
    return arr;
}

PhantomSpec phantom_spec_from_kwargs(std::uint32_t grid, double atrophy_rate,
                                     double growth_rate) {
    PhantomSpec spec;
    spec.grid = Shape3{grid, grid, grid};
    const double c = (grid - 1) / 2.0;
    spec.center = {c, c, c};
    const double scale = grid / 16.0;
    for (auto* axes : {&spec.outer_semi_axes, &spec.inner_semi_axes}) {
        for (double& a : *axes) a *= scale;
    }
    spec.atrophy_rate = atrophy_rate;
    spec.growth_rate = growth_rate;
    return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "conditional volumetric diffusion engine";
    m.attr("__version__") = kEngineVersion;

    py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<data_error>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<numerical_error>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<ScheduleStep>(m, "ScheduleStep")
        .def_readonly("t", &ScheduleStep::t)
        .def_readonly("beta", &ScheduleStep::beta)
        .def_readonly("alpha", &ScheduleStep::alpha)
        .def_readonly("alpha_bar", &ScheduleStep::alpha_bar)
        .def_readonly("alpha_bar_prev", &ScheduleStep::alpha_bar_prev)
        .def_readonly("posterior_variance", &ScheduleStep::posterior_variance)
        .def_readonly("post_coef_x0", &ScheduleStep::post_coef_x0)
        .def_readonly("post_coef_xt", &ScheduleStep::post_coef_xt);

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_static("linear", &NoiseSchedule::linear, py::arg("steps"),
                    py::arg("beta_start"), py::arg("beta_end"))
        .def_property_readonly("steps", &NoiseSchedule::steps)
        .def("at", &NoiseSchedule::at, py::arg("t"))
        .def_property_readonly("beta", [](const NoiseSchedule& s) { return s.beta(); })
        .def_property_readonly("alpha_bar",
                               [](const NoiseSchedule& s) { return s.alpha_bar(); })
        .def_property_readonly("posterior_variance",
                               [](const NoiseSchedule& s) { return s.posterior_variance(); })
        .def("write_csv", &NoiseSchedule::write_csv, py::arg("path"));

    py::class_<Denoiser, std::shared_ptr<Denoiser>>(m, "Denoiser");

    py::class_<GaussianOracleDenoiser, Denoiser, std::shared_ptr<GaussianOracleDenoiser>>(
        m, "GaussianOracleDenoiser")
        .def(py::init<const NoiseSchedule&, double, double>(), py::arg("schedule"),
             py::arg("prior_mean"), py::arg("prior_var"), py::keep_alive<1, 2>())
        .def("affine_coefficients", &GaussianOracleDenoiser::affine_coefficients,
             py::arg("t"));

    py::class_<ZeroDenoiser, Denoiser, std::shared_ptr<ZeroDenoiser>>(m, "ZeroDenoiser")
        .def(py::init<>());

    m.def("forward_marginal",
          [](const NoiseSchedule& s, py::array_t<float> x0, int t) {
              const auto moments = forward_marginal(s, volume_from_array(x0), t);
              return py::make_tuple(array_from_volume(moments.mean), moments.variance);
          },
          py::arg("schedule"), py::arg("x0"), py::arg("t"));

    m.def("forward_sample",
          [](const NoiseSchedule& s, py::array_t<float> x0, int t, py::array_t<float> eps) {
              return array_from_volume(
                  forward_sample(s, volume_from_array(x0), t, volume_from_array(eps)));
          },
          py::arg("schedule"), py::arg("x0"), py::arg("t"), py::arg("eps"));

    m.def("posterior",
          [](const NoiseSchedule& s, py::array_t<float> x0, py::array_t<float> xt, int t) {
              const auto moments =
                  posterior(s, volume_from_array(x0), volume_from_array(xt), t);
              return py::make_tuple(array_from_volume(moments.mean), moments.variance);
          },
          py::arg("schedule"), py::arg("x0"), py::arg("xt"), py::arg("t"));

    m.def("reverse_step",
          [](const NoiseSchedule& s, py::array_t<float> xt, int t,
             py::array_t<float> eps_pred, py::array_t<float> noise) {
              return array_from_volume(reverse_step(s, volume_from_array(xt), t,
                                                    volume_from_array(eps_pred),
                                                    volume_from_array(noise)));
          },
          py::arg("schedule"), py::arg("xt"), py::arg("t"), py::arg("eps_pred"),
          py::arg("noise"));

    m.def("sample_loop",
          [](const NoiseSchedule& s, const Denoiser& d, py::array_t<float> source,
             double delta, std::uint64_t seed) {
              return array_from_volume(
                  sample_loop(s, d, volume_from_array(source), delta, seed));
          },
          py::arg("schedule"), py::arg("denoiser"), py::arg("source"),
          py::arg("delta_years"), py::arg("seed"));

    m.def("generate_phantom",
          [](std::uint32_t grid, double age_years, double atrophy_rate, double growth_rate) {
              return array_from_volume(generate_phantom(
                  phantom_spec_from_kwargs(grid, atrophy_rate, growth_rate), age_years));
          },
          py::arg("grid") = 16, py::arg("age_years") = 0.0, py::arg("atrophy_rate") = 0.06,
          py::arg("growth_rate") = 0.08);

    m.def("tissue_voxel_count",
          [](py::array_t<float> v, float threshold) {
              return count_voxels_at_least(volume_from_array(v), threshold);
          },
          py::arg("volume"), py::arg("threshold") = kTissueThreshold);

    m.def("normalize",
          [](py::array_t<float> raw) {
              const auto [v, affine] = normalize(volume_from_array(raw));
              return py::make_tuple(array_from_volume(v), affine.scale, affine.offset);
          },
          py::arg("raw"));

    m.def("write_volume",
          [](const std::string& path, py::array_t<float> v) {
              write_volume(path, volume_from_array(v));
          },
          py::arg("path"), py::arg("volume"));

    m.def("read_volume",
          [](const std::string& path) { return array_from_volume(read_volume(path)); },
          py::arg("path"));

    m.def("ssim",
          [](py::array_t<float> a, py::array_t<float> b, int window, double data_range) {
              return ssim(volume_from_array(a), volume_from_array(b), window, data_range);
          },
          py::arg("a"), py::arg("b"), py::arg("window") = 7, py::arg("data_range") = 2.0);

    m.def("mse",
          [](py::array_t<float> a, py::array_t<float> b) {
              return mse(volume_from_array(a), volume_from_array(b));
          },
          py::arg("a"), py::arg("b"));

    m.def("frechet_proxy",
          [](const std::vector<py::array_t<float>>& a, const std::vector<py::array_t<float>>& b,
             std::uint64_t projection_seed, int feature_dim) {
              std::vector<Volume> va, vb;
              for (const auto& arr : a) va.push_back(volume_from_array(arr));
              for (const auto& arr : b) vb.push_back(volume_from_array(arr));
              return frechet_proxy(va, vb, projection_seed, feature_dim);
          },
          py::arg("set_a"), py::arg("set_b"), py::arg("projection_seed") = 0,
          py::arg("feature_dim") = 32);

    // Training entry point over in-memory pairs: each pair is
    // (source, target, delta_years).
    m.def("train_denoiser",
          [](const NoiseSchedule& schedule,
             const std::vector<std::tuple<py::array_t<float>, py::array_t<float>, double>>& raw_pairs,
             std::int64_t iterations, double learning_rate, std::uint64_t seed,
             int base_channels, const std::string& checkpoint_path) {
              std::vector<LongitudinalPair> pairs;
              for (const auto& [src, tgt, delta] : raw_pairs) {
                  LongitudinalPair p;
                  p.source = volume_from_array(src);
                  p.target = volume_from_array(tgt);
                  p.delta_years = delta;
                  p.subject_id = "py" + std::to_string(pairs.size());
                  pairs.push_back(std::move(p));
              }
              UNetConfig net_config;
              net_config.base_channels = base_channels;
              net_config.norm_groups = std::min(4, base_channels);
              net_config.time_embed_dim = 32;
              net_config.delta_embed_dim = 8;
              TrainConfig config;
              config.iterations = iterations;
              config.learning_rate = learning_rate;
              config.rng_seed = seed;
              config.checkpoint_every = iterations + 1;
              std::vector<double> losses;
              TrainCallbacks callbacks;
              callbacks.on_step = [&](std::int64_t, double loss, double) {
                  losses.push_back(loss);
              };
              TrainState state = train(schedule, net_config, config, pairs, callbacks);
              if (!checkpoint_path.empty()) {
                  write_checkpoint(checkpoint_path, make_checkpoint(state, schedule));
              }
              return losses;
          },
          py::arg("schedule"), py::arg("pairs"), py::arg("iterations") = 200,
          py::arg("learning_rate") = 1e-3, py::arg("seed") = 0,
          py::arg("base_channels") = 8, py::arg("checkpoint_path") = "");

    m.def("sample_from_checkpoint",
          [](const std::string& checkpoint_path, py::array_t<float> source, double delta,
             std::uint64_t seed) {
              const Checkpoint ckpt = read_checkpoint(checkpoint_path);
              const auto schedule = NoiseSchedule::linear(
                  ckpt.meta.schedule_steps, ckpt.meta.beta_start, ckpt.meta.beta_end);
              TrainState state = restore_train_state(ckpt);
              const UNetDenoiser denoiser(state.net);
              const Volume out = sample_loop(schedule, denoiser, volume_from_array(source),
                                             delta, seed);
              return array_from_volume(clamp_to_data_range(out));
          },
          py::arg("checkpoint_path"), py::arg("source"), py::arg("delta_years"),
          py::arg("seed") = 0);
}
