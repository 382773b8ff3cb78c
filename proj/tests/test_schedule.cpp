#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "longdiff/errors.hpp"
#include "longdiff/schedule.hpp"

using namespace longdiff;

namespace {

// Independent extended-precision recomputation of every schedule array.
struct OracleArrays {
    std::vector<long double> beta, alpha, alpha_bar, posterior_variance, coef_x0, coef_xt;
};

OracleArrays schedule_oracle(int steps, long double b0, long double b1) {
    OracleArrays o;
    long double abar = 1.0L, prev = 1.0L;
    for (int i = 0; i < steps; ++i) {
        const long double beta = b0 + (b1 - b0) * static_cast<long double>(i) / (steps - 1);
        const long double alpha = 1.0L - beta;
        prev = abar;
        abar *= alpha;
        o.beta.push_back(beta);
        o.alpha.push_back(alpha);
        o.alpha_bar.push_back(abar);
        o.posterior_variance.push_back((1.0L - prev) / (1.0L - abar) * beta);
        o.coef_x0.push_back(std::sqrt(prev) * beta / (1.0L - abar));
        o.coef_xt.push_back(std::sqrt(alpha) * (1.0L - prev) / (1.0L - abar));
    }
    return o;
}

double rel_err(double got, long double want) {
    if (want == 0.0L) return std::abs(got);
    return static_cast<double>(std::abs(static_cast<long double>(got) - want) /
                               std::abs(want));
}

int ulp_distance(double a, double b) {
    if (a == b) return 0;
    int n = 0;
    double x = a;
    while (x != b && n < 16) {
        x = std::nextafter(x, b);
        ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("linear schedule hits the configured endpoints") {
    const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
    CHECK(s.at(1).beta == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(s.at(1000).beta == doctest::Approx(0.02).epsilon(1e-15));
    // Deep-noise endpoint lands where the extended-precision product says.
    const auto oracle = schedule_oracle(1000, 1e-4L, 0.02L);
    CHECK(rel_err(s.at(1000).alpha_bar, oracle.alpha_bar.back()) < 1e-12);
    CHECK(s.at(1000).alpha_bar > 1e-5);
    CHECK(s.at(1000).alpha_bar < 1e-4);
}

TEST_CASE("constant-beta toy schedule has hand-checkable products") {
    const auto s = NoiseSchedule::linear(2, 0.5, 0.5);
    CHECK(s.alpha_bar()[0] == doctest::Approx(0.5));
    CHECK(s.alpha_bar()[1] == doctest::Approx(0.25));
    const auto step2 = s.at(2);
    CHECK(step2.alpha_bar == doctest::Approx(0.25));
    CHECK(step2.alpha_bar_prev == doctest::Approx(0.5));
}

TEST_CASE("every array matches the extended-precision oracle") {
    const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
    const auto o = schedule_oracle(1000, 1e-4L, 0.02L);
    for (int i = 0; i < 1000; ++i) {
        CHECK(rel_err(s.beta()[i], o.beta[i]) < 1e-12);
        CHECK(rel_err(s.alpha()[i], o.alpha[i]) < 1e-12);
        CHECK(rel_err(s.alpha_bar()[i], o.alpha_bar[i]) < 1e-12);
        CHECK(rel_err(s.posterior_variance()[i], o.posterior_variance[i]) < 1e-12);
        CHECK(rel_err(s.post_coef_x0()[i], o.coef_x0[i]) < 1e-12);
        CHECK(rel_err(s.post_coef_xt()[i], o.coef_xt[i]) < 1e-12);
    }
}

TEST_CASE("lookup at t=1 uses the alpha_bar_prev = 1 convention") {
    const auto s = NoiseSchedule::linear(50, 1e-3, 0.1);
    const auto step = s.at(1);
    CHECK(step.alpha_bar_prev == 1.0);
    CHECK(step.posterior_variance == 0.0);
    CHECK(step.post_coef_x0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(step.post_coef_xt == doctest::Approx(0.0));
}

TEST_CASE("lookup mid-schedule matches the oracle bundle") {
    const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
    const auto o = schedule_oracle(1000, 1e-4L, 0.02L);
    const auto step = s.at(500);
    CHECK(rel_err(step.beta, o.beta[499]) < 1e-12);
    CHECK(rel_err(step.alpha_bar, o.alpha_bar[499]) < 1e-12);
    CHECK(rel_err(step.alpha_bar_prev, o.alpha_bar[498]) < 1e-12);
    CHECK(rel_err(step.posterior_variance, o.posterior_variance[499]) < 1e-12);
    CHECK(rel_err(step.post_coef_x0, o.coef_x0[499]) < 1e-12);
    CHECK(rel_err(step.post_coef_xt, o.coef_xt[499]) < 1e-12);
}

TEST_CASE("schedule invariants hold across assorted builds") {
    const struct { int T; double b0, b1; } cases[] = {
        {1000, 1e-4, 0.02}, {100, 1e-3, 0.1}, {2, 0.5, 0.5}, {17, 0.007, 0.3},
    };
    for (const auto& c : cases) {
        CAPTURE(c.T);
        const auto s = NoiseSchedule::linear(c.T, c.b0, c.b1);
        for (int t = 1; t <= c.T; ++t) {
            const auto st = s.at(t);
            CHECK(st.beta > 0.0);
            CHECK(st.beta < 1.0);
            if (t > 1) {
                CHECK(s.beta()[t - 1] >= s.beta()[t - 2]);          // non-decreasing
                CHECK(s.alpha_bar()[t - 1] < s.alpha_bar()[t - 2]); // strictly decreasing
                // Recurrence at working precision.
                CHECK(ulp_distance(s.alpha_bar()[t - 1],
                                   s.alpha_bar()[t - 2] * s.alpha()[t - 1]) <= 1);
            }
            // Variance telescoping.
            CHECK(st.posterior_variance <= st.beta);
            // Noiseless-trajectory consistency: plugging x0 = c, xt = sqrt(ab)*c
            // into the posterior mean must give sqrt(ab_prev)*c.
            const double lhs = st.post_coef_x0 + st.post_coef_xt * std::sqrt(st.alpha_bar);
            CHECK(rel_err(lhs, std::sqrt(static_cast<long double>(st.alpha_bar_prev))) <
                  1e-10);
        }
        CHECK(s.at(1).posterior_variance == 0.0);
    }
}

TEST_CASE("invalid schedule parameters are rejected") {
    CHECK_THROWS_AS(NoiseSchedule::linear(1, 1e-4, 0.02), config_error);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.02), config_error);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.02, 1e-4), config_error);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 1e-4, 1.5), config_error);

    const auto s = NoiseSchedule::linear(10, 1e-4, 0.02);
    CHECK_THROWS_AS(s.at(0), std::out_of_range);
    CHECK_THROWS_AS(s.at(11), std::out_of_range);
}

TEST_CASE("csv dump carries one row per timestep") {
    const auto s = NoiseSchedule::linear(5, 0.01, 0.05);
    const std::string path = "schedule_dump_test.csv";
    s.write_csv(path);
    std::FILE* f = std::fopen(path.c_str(), "r");
    REQUIRE(f);
    int lines = 0;
    char buf[256];
    while (std::fgets(buf, sizeof buf, f)) ++lines;
    std::fclose(f);
    std::remove(path.c_str());
    CHECK(lines == 6);  // header + 5 rows
}
