#include "longdiff/denoiser.hpp"

#include <cmath>

#include "longdiff/errors.hpp"

namespace longdiff {

GaussianOracleDenoiser::GaussianOracleDenoiser(const NoiseSchedule& schedule,
                                               double prior_mean, double prior_var)
    : schedule_(&schedule), prior_mean_(prior_mean), prior_var_(prior_var) {
    if (prior_var <= 0.0) throw config_error("oracle denoiser needs prior_var > 0");
}

std::pair<double, double> GaussianOracleDenoiser::affine_coefficients(int t) const {
    const ScheduleStep s = schedule_->at(t);
    const double sqrt_ab = std::sqrt(s.alpha_bar);
    const double one_minus = 1.0 - s.alpha_bar;
    const double denom = one_minus + s.alpha_bar * prior_var_;
    // E[x0|xt] = p*xt + q
    const double p = sqrt_ab * prior_var_ / denom;
    const double q = prior_mean_ * one_minus / denom;
    const double a = (1.0 - sqrt_ab * p) / std::sqrt(one_minus);
    const double b = -sqrt_ab * q / std::sqrt(one_minus);
    return {a, b};
}

double GaussianOracleDenoiser::posterior_x0_mean(int t, double xt) const {
    const ScheduleStep s = schedule_->at(t);
    const double one_minus = 1.0 - s.alpha_bar;
    const double denom = one_minus + s.alpha_bar * prior_var_;
    return (prior_mean_ * one_minus + std::sqrt(s.alpha_bar) * prior_var_ * xt) / denom;
}

double GaussianOracleDenoiser::predict_noise_scalar(int t, double xt) const {
    const auto [a, b] = affine_coefficients(t);
    return a * xt + b;
}

Volume GaussianOracleDenoiser::predict_noise(const DenoiserInput& in) const {
    const auto [a, b] = affine_coefficients(in.t);
    Volume out = Volume::zeros(in.xt.shape);
    for (std::size_t i = 0; i < out.voxels.size(); ++i) {
        out.voxels[i] = static_cast<float>(a * static_cast<double>(in.xt.voxels[i]) + b);
    }
    return out;
}

}  // namespace longdiff
