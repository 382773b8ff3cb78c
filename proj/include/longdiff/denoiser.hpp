#pragma once

#include <utility>

#include "longdiff/schedule.hpp"
#include "longdiff/volume.hpp"

namespace longdiff {

// Inputs to one noise-prediction call: the current sampler state x_t, its
// timestep, the conditioning source volume and the elapsed interval in years.
struct DenoiserInput {
    const Volume& xt;
    int t;
    const Volume& source;
    double delta_years;
};

// Conditional noise estimator contract. Implementations must be pure
// functions of their inputs (and parameters) so sampling stays deterministic.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Volume predict_noise(const DenoiserInput& in) const = 0;
};

// Posterior-optimal noise estimate for synthetic data whose voxels are i.i.d.
// N(prior_mean, prior_var). Conditioning inputs are ignored. Used to verify
// the sampler against a case where the exact answer is known.
//
// With x_t = sqrt(ab)*x0 + sqrt(1-ab)*eps and the conjugate Gaussian prior,
//   E[x0 | x_t] = (prior_mean*(1-ab) + sqrt(ab)*prior_var*x_t)
//                 / ((1-ab) + ab*prior_var)
//   E[eps | x_t] = (x_t - sqrt(ab)*E[x0|x_t]) / sqrt(1-ab)
// which is affine in x_t; affine_coefficients() exposes (a, b) with
// eps_hat = a*x_t + b.
class GaussianOracleDenoiser : public Denoiser {
public:
    GaussianOracleDenoiser(const NoiseSchedule& schedule, double prior_mean,
                           double prior_var);

    Volume predict_noise(const DenoiserInput& in) const override;

    double predict_noise_scalar(int t, double xt) const;
    double posterior_x0_mean(int t, double xt) const;
    std::pair<double, double> affine_coefficients(int t) const;

private:
    const NoiseSchedule* schedule_;
    double prior_mean_;
    double prior_var_;
};

// Denoiser that always predicts zero noise.
class ZeroDenoiser : public Denoiser {
public:
    Volume predict_noise(const DenoiserInput& in) const override {
        return Volume::zeros(in.xt.shape);
    }
};

}  // namespace longdiff
