#include "longdiff/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "longdiff/errors.hpp"

namespace longdiff {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 2) throw config_error("noise schedule needs at least 2 steps");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw config_error("beta range must satisfy 0 < beta_start <= beta_end < 1");
    }

    NoiseSchedule s;
    s.beta_.resize(steps);
    s.alpha_.resize(steps);
    s.alpha_bar_.resize(steps);
    s.posterior_variance_.resize(steps);
    s.post_coef_x0_.resize(steps);
    s.post_coef_xt_.resize(steps);

    // The running product is tracked twice: in long double for the derived
    // coefficients (keeps alpha_bar-dependent terms accurate after a thousand
    // multiplies) and in double for the stored alpha_bar array, so that the
    // recurrence alpha_bar[t] = alpha_bar[t-1] * alpha[t] holds exactly at
    // working precision.
    long double running_product = 1.0L;
    double running_product_d = 1.0;
    for (int i = 0; i < steps; ++i) {
        // (t-1)/(T-1) spacing so both endpoints are hit exactly.
        const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        const double alpha = 1.0 - beta;

        const long double alpha_bar_prev = running_product;
        running_product *= static_cast<long double>(alpha);
        running_product_d *= alpha;

        const long double one_minus_bar = 1.0L - running_product;
        const long double one_minus_prev = 1.0L - alpha_bar_prev;

        s.beta_[i] = beta;
        s.alpha_[i] = alpha;
        s.alpha_bar_[i] = running_product_d;
        s.posterior_variance_[i] =
            static_cast<double>(one_minus_prev / one_minus_bar * beta);
        s.post_coef_x0_[i] =
            static_cast<double>(std::sqrt(alpha_bar_prev) * beta / one_minus_bar);
        s.post_coef_xt_[i] = static_cast<double>(
            std::sqrt(static_cast<long double>(alpha)) * one_minus_prev / one_minus_bar);
    }

    // Consistency of the posterior-mean coefficients on the noiseless
    // trajectory: coef_x0 + coef_xt * sqrt(alpha_bar_t) must reduce to
    // sqrt(alpha_bar_{t-1}).
    for (int i = 0; i < steps; ++i) {
        const double prev = (i == 0) ? 1.0 : s.alpha_bar_[i - 1];
        const double lhs =
            s.post_coef_x0_[i] + s.post_coef_xt_[i] * std::sqrt(s.alpha_bar_[i]);
        const double rhs = std::sqrt(prev);
        if (std::abs(lhs - rhs) > 1e-10 * std::abs(rhs)) {
            throw numerical_error("schedule coefficients failed the posterior-mean "
                                  "consistency check at t=" + std::to_string(i + 1));
        }
    }
    return s;
}

ScheduleStep NoiseSchedule::at(int t) const {
    if (t < 1 || t > steps()) {
        throw std::out_of_range("timestep " + std::to_string(t) + " outside [1, " +
                                std::to_string(steps()) + "]");
    }
    const int i = t - 1;
    ScheduleStep step;
    step.t = t;
    step.beta = beta_[i];
    step.alpha = alpha_[i];
    step.alpha_bar = alpha_bar_[i];
    step.alpha_bar_prev = (i == 0) ? 1.0 : alpha_bar_[i - 1];
    step.posterior_variance = posterior_variance_[i];
    step.post_coef_x0 = post_coef_x0_[i];
    step.post_coef_xt = post_coef_xt_[i];
    return step;
}

void NoiseSchedule::write_csv(const std::string& path) const {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw data_error("cannot open for writing: " + path);
    std::fprintf(f, "t,beta,alpha,alpha_bar,posterior_variance\n");
    for (int i = 0; i < steps(); ++i) {
        std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g\n", i + 1, beta_[i], alpha_[i],
                     alpha_bar_[i], posterior_variance_[i]);
    }
    std::fclose(f);
}

}  // namespace longdiff
