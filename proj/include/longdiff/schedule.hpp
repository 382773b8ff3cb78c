#pragma once

#include <string>
#include <vector>

namespace longdiff {

// Coefficient bundle for one timestep t in [1, T].
struct ScheduleStep {
    int t = 0;
    double beta = 0.0;
    double alpha = 0.0;
    double alpha_bar = 0.0;
    double alpha_bar_prev = 0.0;  // alpha_bar at t-1; defined as 1 at t=1
    double posterior_variance = 0.0;
    double post_coef_x0 = 0.0;
    double post_coef_xt = 0.0;
};

// Immutable noise schedule: the beta ramp and every coefficient derived from
// it, for t = 1..T. Cumulative products are accumulated in long double before
// being stored at double precision, so alpha_bar stays accurate even when it
// decays to the 1e-5 scale over a thousand steps. Safe to share across
// threads once built.
class NoiseSchedule {
public:
    // Linear ramp hitting both endpoints exactly: beta_t interpolates with
    // (t-1)/(T-1) spacing. Requires T >= 2 and 0 < beta_start <= beta_end < 1.
    static NoiseSchedule linear(int steps, double beta_start, double beta_end);

    int steps() const { return static_cast<int>(beta_.size()); }

    // Bundle for timestep t, 1-based. Throws std::out_of_range otherwise.
    ScheduleStep at(int t) const;

    const std::vector<double>& beta() const { return beta_; }
    const std::vector<double>& alpha() const { return alpha_; }
    const std::vector<double>& alpha_bar() const { return alpha_bar_; }
    const std::vector<double>& posterior_variance() const { return posterior_variance_; }
    const std::vector<double>& post_coef_x0() const { return post_coef_x0_; }
    const std::vector<double>& post_coef_xt() const { return post_coef_xt_; }

    // Diagnostic dump, one row per timestep:
    // t,beta,alpha,alpha_bar,posterior_variance
    void write_csv(const std::string& path) const;

private:
    NoiseSchedule() = default;

    std::vector<double> beta_, alpha_, alpha_bar_;
    std::vector<double> posterior_variance_, post_coef_x0_, post_coef_xt_;
};

}  // namespace longdiff
