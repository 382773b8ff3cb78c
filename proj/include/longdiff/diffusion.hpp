#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "longdiff/denoiser.hpp"
#include "longdiff/schedule.hpp"
#include "longdiff/volume.hpp"

namespace longdiff {

// ---------------------------------------------------------------------------
// Scalar cores, double precision. The volume operations below apply these
// voxelwise; tests can drive them directly at full precision.
// ---------------------------------------------------------------------------

inline double forward_mean_scalar(const ScheduleStep& s, double x0) {
    return std::sqrt(s.alpha_bar) * x0;
}

inline double forward_sample_scalar(const ScheduleStep& s, double x0, double eps) {
    return std::sqrt(s.alpha_bar) * x0 + std::sqrt(1.0 - s.alpha_bar) * eps;
}

inline double posterior_mean_scalar(const ScheduleStep& s, double x0, double xt) {
    return s.post_coef_x0 * x0 + s.post_coef_xt * xt;
}

// Mean of the denoising step given a noise estimate.
inline double reverse_mean_scalar(const ScheduleStep& s, double xt, double eps_pred) {
    return (xt - s.beta / std::sqrt(1.0 - s.alpha_bar) * eps_pred) / std::sqrt(s.alpha);
}

// ---------------------------------------------------------------------------
// Volume operations
// ---------------------------------------------------------------------------

struct GaussianMoments {
    Volume mean;
    double variance = 0.0;  // isotropic, shared by every voxel
};

// Marginal distribution of x_t given a clean volume.
GaussianMoments forward_marginal(const NoiseSchedule& schedule, const Volume& x0, int t);

// One-shot noising: sqrt(ab)*x0 + sqrt(1-ab)*eps. Deterministic given eps.
Volume forward_sample(const NoiseSchedule& schedule, const Volume& x0, int t,
                      const NoiseSample& eps);

// Exact denoising posterior given the clean volume.
GaussianMoments posterior(const NoiseSchedule& schedule, const Volume& x0,
                          const Volume& xt, int t);

// One ancestral step. The stochastic term is suppressed at t=1, where the
// step variance is exactly zero.
Volume reverse_step(const NoiseSchedule& schedule, const Volume& xt, int t,
                    const Volume& eps_pred, const NoiseSample& noise);

// KL divergence between the exact denoising posterior and the model step,
// both Gaussian with the same variance schedule; diagnostic, not the
// training loss. Requires 2 <= t <= T. Returns the total over voxels.
double vlb_term(const NoiseSchedule& schedule, const Volume& x0, const Volume& xt,
                int t, const Volume& eps_pred);

// Optional capture of intermediate states from sample_loop.
struct SamplerTrace {
    int every = 0;  // record x_t whenever t % every == 0 (plus t=1); 0 disables
    std::vector<std::pair<int, Volume>>* sink = nullptr;
};

// Full ancestral sampling chain: x_T ~ N(0, I), then T denoising steps
// conditioned on (source, delta_years). Deterministic given seed. Throws
// numerical_error with the failing timestep if the state stops being finite.
Volume sample_loop(const NoiseSchedule& schedule, const Denoiser& denoiser,
                   const Volume& source, double delta_years, std::uint64_t seed,
                   const SamplerTrace& trace = {});

// Fills a shaped field with i.i.d. standard normal draws.
NoiseSample draw_noise(Shape3 shape, std::uint64_t seed);

}  // namespace longdiff
