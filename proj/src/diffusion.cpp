#include "longdiff/diffusion.hpp"

#include <cmath>
#include <string>

#include "longdiff/errors.hpp"
#include "longdiff/rng.hpp"

namespace longdiff {

GaussianMoments forward_marginal(const NoiseSchedule& schedule, const Volume& x0, int t) {
    const ScheduleStep s = schedule.at(t);
    GaussianMoments out;
    out.mean = Volume::zeros(x0.shape);
    out.mean.spacing = x0.spacing;
    const double scale = std::sqrt(s.alpha_bar);
    for (std::size_t i = 0; i < x0.voxels.size(); ++i) {
        out.mean.voxels[i] = static_cast<float>(scale * x0.voxels[i]);
    }
    out.variance = 1.0 - s.alpha_bar;
    return out;
}

Volume forward_sample(const NoiseSchedule& schedule, const Volume& x0, int t,
                      const NoiseSample& eps) {
    require_same_shape(x0, eps, "forward_sample");
    const ScheduleStep s = schedule.at(t);
    Volume out = Volume::zeros(x0.shape);
    out.spacing = x0.spacing;
    for (std::size_t i = 0; i < x0.voxels.size(); ++i) {
        out.voxels[i] = static_cast<float>(
            forward_sample_scalar(s, x0.voxels[i], eps.voxels[i]));
    }
    return out;
}

GaussianMoments posterior(const NoiseSchedule& schedule, const Volume& x0,
                          const Volume& xt, int t) {
    require_same_shape(x0, xt, "posterior");
    const ScheduleStep s = schedule.at(t);
    GaussianMoments out;
    out.mean = Volume::zeros(x0.shape);
    out.mean.spacing = x0.spacing;
    for (std::size_t i = 0; i < x0.voxels.size(); ++i) {
        out.mean.voxels[i] =
            static_cast<float>(posterior_mean_scalar(s, x0.voxels[i], xt.voxels[i]));
    }
    out.variance = s.posterior_variance;
    return out;
}

Volume reverse_step(const NoiseSchedule& schedule, const Volume& xt, int t,
                    const Volume& eps_pred, const NoiseSample& noise) {
    require_same_shape(xt, eps_pred, "reverse_step");
    if (t > 1) require_same_shape(xt, noise, "reverse_step noise");
    const ScheduleStep s = schedule.at(t);
    const double sigma = (t > 1) ? std::sqrt(s.posterior_variance) : 0.0;
    Volume out = Volume::zeros(xt.shape);
    out.spacing = xt.spacing;
    for (std::size_t i = 0; i < xt.voxels.size(); ++i) {
        double v = reverse_mean_scalar(s, xt.voxels[i], eps_pred.voxels[i]);
        if (t > 1) v += sigma * noise.voxels[i];
        out.voxels[i] = static_cast<float>(v);
    }
    return out;
}

double vlb_term(const NoiseSchedule& schedule, const Volume& x0, const Volume& xt,
                int t, const Volume& eps_pred) {
    if (t < 2 || t > schedule.steps()) {
        throw std::out_of_range("vlb_term: timestep " + std::to_string(t) +
                                " outside [2, " + std::to_string(schedule.steps()) + "]");
    }
    require_same_shape(x0, xt, "vlb_term");
    require_same_shape(x0, eps_pred, "vlb_term eps");
    const ScheduleStep s = schedule.at(t);
    // Same variance on both sides, so the KL reduces to a scaled squared
    // distance between the means.
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < x0.voxels.size(); ++i) {
        const double mu_true = posterior_mean_scalar(s, x0.voxels[i], xt.voxels[i]);
        const double mu_model = reverse_mean_scalar(s, xt.voxels[i], eps_pred.voxels[i]);
        const double d = mu_true - mu_model;
        sum_sq += d * d;
    }
    return sum_sq / (2.0 * s.posterior_variance);
}

NoiseSample draw_noise(Shape3 shape, std::uint64_t seed) {
    Rng rng(seed);
    NoiseSample eps = Volume::zeros(shape);
    for (float& v : eps.voxels) v = static_cast<float>(rng.normal());
    return eps;
}

Volume sample_loop(const NoiseSchedule& schedule, const Denoiser& denoiser,
                   const Volume& source, double delta_years, std::uint64_t seed,
                   const SamplerTrace& trace) {
    Rng rng(seed);
    Volume x = Volume::zeros(source.shape);
    x.spacing = source.spacing;
    for (float& v : x.voxels) v = static_cast<float>(rng.normal());

    for (int t = schedule.steps(); t >= 1; --t) {
        const Volume eps_pred = denoiser.predict_noise({x, t, source, delta_years});
        NoiseSample noise;
        if (t > 1) {
            noise = Volume::zeros(x.shape);
            for (float& v : noise.voxels) v = static_cast<float>(rng.normal());
        }
        x = reverse_step(schedule, x, t, eps_pred, noise);
        if (!x.all_finite()) {
            throw numerical_error("sample_loop: non-finite state at t=" +
                                  std::to_string(t) +
                                  ", max |voxel| = " + std::to_string(x.max_abs()));
        }
        if (trace.every > 0 && trace.sink && (t % trace.every == 0 || t == 1)) {
            trace.sink->push_back({t - 1, x});
        }
    }
    return x;
}

}  // namespace longdiff
