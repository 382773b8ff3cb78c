#include <doctest.h>

#include <cmath>
#include <vector>

#include "longdiff/denoiser.hpp"
#include "longdiff/diffusion.hpp"
#include "longdiff/errors.hpp"
#include "longdiff/rng.hpp"

using namespace longdiff;

TEST_CASE("standard-normal prior gives eps_hat = sqrt(1-alpha_bar) * x_t") {
    const auto sched = NoiseSchedule::linear(100, 1e-3, 0.1);
    const GaussianOracleDenoiser oracle(sched, 0.0, 1.0);
    for (int t : {1, 17, 50, 100}) {
        const auto [a, b] = oracle.affine_coefficients(t);
        const double ab = sched.at(t).alpha_bar;
        CHECK(a == doctest::Approx(std::sqrt(1.0 - ab)).epsilon(1e-12));
        CHECK(b == doctest::Approx(0.0));
        CHECK(oracle.predict_noise_scalar(t, 0.6) ==
              doctest::Approx(std::sqrt(1.0 - ab) * 0.6).epsilon(1e-12));
    }
}

TEST_CASE("near point-mass prior pins the clean-volume estimate to the mass") {
    const auto sched = NoiseSchedule::linear(100, 1e-3, 0.1);
    const double c = 0.42;
    const GaussianOracleDenoiser oracle(sched, c, 1e-12);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int t = static_cast<int>(rng.uniform_int(1, 100));
        const double xt = rng.normal();
        CHECK(oracle.posterior_x0_mean(t, xt) == doctest::Approx(c).epsilon(1e-6));
    }
}

TEST_CASE("oracle slope matches a Monte Carlo regression of eps on x_t") {
    const auto sched = NoiseSchedule::linear(100, 1e-3, 0.1);
    const double m0 = 0.3, v0 = 0.25;
    const GaussianOracleDenoiser oracle(sched, m0, v0);
    const int t = 40;
    const ScheduleStep s = sched.at(t);

    Rng rng(17);
    const int n = 200000;
    double sx = 0, se = 0, sxx = 0, sxe = 0;
    for (int i = 0; i < n; ++i) {
        const double x0 = m0 + std::sqrt(v0) * rng.normal();
        const double eps = rng.normal();
        const double xt = forward_sample_scalar(s, x0, eps);
        sx += xt;
        se += eps;
        sxx += xt * xt;
        sxe += xt * eps;
    }
    const double mean_x = sx / n, mean_e = se / n;
    const double slope = (sxe / n - mean_x * mean_e) / (sxx / n - mean_x * mean_x);
    const double intercept = mean_e - slope * mean_x;

    const auto [a, b] = oracle.affine_coefficients(t);
    CHECK(slope == doctest::Approx(a).epsilon(0.02));
    CHECK(intercept == doctest::Approx(b).scale(1.0).epsilon(0.02));
}

TEST_CASE("no affine competitor beats the oracle on squared error") {
    const auto sched = NoiseSchedule::linear(100, 1e-3, 0.1);
    const double m0 = 0.3, v0 = 0.25;
    const GaussianOracleDenoiser oracle(sched, m0, v0);
    const int t = 60;
    const ScheduleStep s = sched.at(t);

    // Fixed Monte Carlo draw set, then exhaustive grid around the oracle pair.
    Rng rng(29);
    const int n = 50000;
    std::vector<double> xts(n), epss(n);
    for (int i = 0; i < n; ++i) {
        const double x0 = m0 + std::sqrt(v0) * rng.normal();
        epss[static_cast<std::size_t>(i)] = rng.normal();
        xts[static_cast<std::size_t>(i)] =
            forward_sample_scalar(s, x0, epss[static_cast<std::size_t>(i)]);
    }
    auto mse_of = [&](double a, double b) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = a * xts[static_cast<std::size_t>(i)] + b -
                             epss[static_cast<std::size_t>(i)];
            sum += d * d;
        }
        return sum / n;
    };
    const auto [a_star, b_star] = oracle.affine_coefficients(t);
    const double oracle_mse = mse_of(a_star, b_star);
    for (int ia = -10; ia <= 10; ++ia) {
        for (int ib = -10; ib <= 10; ++ib) {
            if (ia == 0 && ib == 0) continue;
            const double a = a_star + 0.05 * ia;
            const double b = b_star + 0.05 * ib;
            // Tiny slack: the empirical minimizer can sit a hair off the
            // population optimum at finite n.
            CHECK(mse_of(a, b) >= oracle_mse - 1e-4);
        }
    }
}

TEST_CASE("oracle-driven sample_loop reproduces the closed-form chain law") {
    // The chain is affine-Gaussian, so its output distribution is computable
    // exactly; the sampler must match it to Monte Carlo precision.
    const auto sched = NoiseSchedule::linear(50, 1e-3, 0.12);
    const double m0 = 0.3, v0 = 0.25;
    const GaussianOracleDenoiser oracle(sched, m0, v0);

    double mean = 0.0, var = 1.0;
    for (int t = sched.steps(); t >= 1; --t) {
        const auto [a, b] = oracle.affine_coefficients(t);
        const ScheduleStep s = sched.at(t);
        const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha);
        const double shrink = s.beta / std::sqrt(1.0 - s.alpha_bar);
        const double A = inv_sqrt_alpha * (1.0 - shrink * a);
        const double B = inv_sqrt_alpha * (-shrink * b);
        mean = A * mean + B;
        var = A * A * var + (t > 1 ? s.posterior_variance : 0.0);
    }

    const Shape3 one{1, 1, 1};
    const Volume source = Volume::zeros(one);
    const int n = 4000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const Volume out = sample_loop(sched, oracle, source, 1.0,
                                       static_cast<std::uint64_t>(1000 + i));
        sum += out.voxels[0];
        sum_sq += static_cast<double>(out.voxels[0]) * out.voxels[0];
    }
    const double got_mean = sum / n;
    const double got_var = sum_sq / n - got_mean * got_mean;
    CHECK(std::abs(got_mean - mean) < 3.0 * std::sqrt(var / n));
    CHECK(std::abs(got_var - var) < 3.0 * var * std::sqrt(2.0 / n));
}

TEST_CASE("oracle rejects a non-positive prior variance") {
    const auto sched = NoiseSchedule::linear(10, 1e-3, 0.1);
    CHECK_THROWS_AS(GaussianOracleDenoiser(sched, 0.0, 0.0), config_error);
    CHECK_THROWS_AS(GaussianOracleDenoiser(sched, 0.0, -1.0), config_error);
}
