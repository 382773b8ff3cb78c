#include "longdiff/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "longdiff/errors.hpp"
#include "longdiff/rng.hpp"

namespace longdiff {

double mse(const Volume& a, const Volume& b) {
    require_same_shape(a, b, "mse");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.voxels.size(); ++i) {
        const double d = static_cast<double>(a.voxels[i]) - b.voxels[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.voxels.size());
}

double psnr(const Volume& a, const Volume& b, double data_range) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / m);
}

double ssim(const Volume& a, const Volume& b, int window, double data_range) {
    require_same_shape(a, b, "ssim");
    if (window < 1 || window % 2 == 0) {
        throw std::invalid_argument("ssim window must be a positive odd integer");
    }
    const int D = static_cast<int>(a.shape.depth);
    const int H = static_cast<int>(a.shape.height);
    const int W = static_cast<int>(a.shape.width);
    if (window > D || window > H || window > W) {
        throw std::invalid_argument("ssim window " + std::to_string(window) +
                                    " larger than volume " + a.shape.str());
    }

    // Separable Gaussian weights, sigma = window/6, normalized per axis so the
    // 3D product sums to one.
    const int r = window / 2;
    const double sigma = static_cast<double>(window) / 6.0;
    std::vector<double> w1(static_cast<std::size_t>(window));
    double wsum = 0.0;
    for (int i = 0; i < window; ++i) {
        const double d = static_cast<double>(i - r);
        w1[static_cast<std::size_t>(i)] = std::exp(-0.5 * d * d / (sigma * sigma));
        wsum += w1[static_cast<std::size_t>(i)];
    }
    for (double& w : w1) w /= wsum;

    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);

    auto idx = [&](int z, int y, int x) {
        return (static_cast<std::size_t>(z) * H + y) * W + x;
    };

    double total = 0.0;
    std::int64_t count = 0;
    for (int z = r; z < D - r; ++z)
        for (int y = r; y < H - r; ++y)
            for (int x = r; x < W - r; ++x) {
                double ma = 0.0, mb = 0.0, maa = 0.0, mbb = 0.0, mab = 0.0;
                for (int kz = -r; kz <= r; ++kz) {
                    const double wz = w1[static_cast<std::size_t>(kz + r)];
                    for (int ky = -r; ky <= r; ++ky) {
                        const double wzy = wz * w1[static_cast<std::size_t>(ky + r)];
                        const std::size_t base = idx(z + kz, y + ky, x - r);
                        for (int kx = 0; kx < window; ++kx) {
                            const double wgt = wzy * w1[static_cast<std::size_t>(kx)];
                            const double va = a.voxels[base + static_cast<std::size_t>(kx)];
                            const double vb = b.voxels[base + static_cast<std::size_t>(kx)];
                            ma += wgt * va;
                            mb += wgt * vb;
                            maa += wgt * va * va;
                            mbb += wgt * vb * vb;
                            mab += wgt * va * vb;
                        }
                    }
                }
                const double var_a = maa - ma * ma;
                const double var_b = mbb - mb * mb;
                const double cov = mab - ma * mb;
                const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
                total += num / den;
                ++count;
            }
    return total / static_cast<double>(count);
}

// --- Frechet proxy -------------------------------------------------------------

std::vector<double> pool8(const Volume& v) {
    const int D = static_cast<int>(v.shape.depth);
    const int H = static_cast<int>(v.shape.height);
    const int W = static_cast<int>(v.shape.width);
    const int pd = (D + 7) / 8, ph = (H + 7) / 8, pw = (W + 7) / 8;
    std::vector<double> out(static_cast<std::size_t>(pd) * ph * pw, 0.0);
    for (int bz = 0; bz < pd; ++bz)
        for (int by = 0; by < ph; ++by)
            for (int bx = 0; bx < pw; ++bx) {
                double sum = 0.0;
                int n = 0;
                for (int z = bz * 8; z < std::min(D, bz * 8 + 8); ++z)
                    for (int y = by * 8; y < std::min(H, by * 8 + 8); ++y)
                        for (int x = bx * 8; x < std::min(W, bx * 8 + 8); ++x) {
                            sum += v.at(static_cast<std::uint32_t>(z),
                                        static_cast<std::uint32_t>(y),
                                        static_cast<std::uint32_t>(x));
                            ++n;
                        }
                out[(static_cast<std::size_t>(bz) * ph + by) * pw + bx] = sum / n;
            }
    return out;
}

std::vector<double> projection_matrix(std::uint64_t seed, int in_dim, int out_dim) {
    Rng rng(splitmix64(seed ^ 0x70726f6aULL));
    std::vector<double> m(static_cast<std::size_t>(out_dim) * in_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (double& x : m) x = rng.normal() * scale;
    return m;
}

std::vector<double> extract_features(const Volume& v, int feature_dim,
                                     std::uint64_t projection_seed) {
    const std::vector<double> pooled = pool8(v);
    const int in_dim = static_cast<int>(pooled.size());
    const std::vector<double> proj = projection_matrix(projection_seed, in_dim, feature_dim);
    std::vector<double> out(static_cast<std::size_t>(feature_dim), 0.0);
    for (int o = 0; o < feature_dim; ++o) {
        const double* row = proj.data() + static_cast<std::size_t>(o) * in_dim;
        double s = 0.0;
        for (int i = 0; i < in_dim; ++i) s += row[i] * pooled[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(o)] = s;
    }
    return out;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd psd_sqrt(const MatrixXd& m, const char* who) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success) {
        throw numerical_error(std::string(who) + ": eigendecomposition failed");
    }
    VectorXd ev = es.eigenvalues();
    const double worst = ev.minCoeff();
    if (worst < -1e-8 * std::max(1.0, std::abs(ev.maxCoeff()))) {
        throw numerical_error(std::string(who) + ": covariance not PSD, eigenvalue " +
                              std::to_string(worst));
    }
    for (int i = 0; i < ev.size(); ++i) ev[i] = std::sqrt(std::max(0.0, ev[i]));
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_gaussian(const std::vector<double>& mean_a, const std::vector<double>& cov_a,
                        const std::vector<double>& mean_b, const std::vector<double>& cov_b) {
    const int d = static_cast<int>(mean_a.size());
    if (mean_b.size() != mean_a.size() ||
        cov_a.size() != static_cast<std::size_t>(d) * d ||
        cov_b.size() != static_cast<std::size_t>(d) * d) {
        throw std::invalid_argument("frechet_gaussian: dimension mismatch");
    }
    Eigen::Map<const MatrixXd> ca(cov_a.data(), d, d);
    Eigen::Map<const MatrixXd> cb(cov_b.data(), d, d);
    Eigen::Map<const VectorXd> mu_a(mean_a.data(), d);
    Eigen::Map<const VectorXd> mu_b(mean_b.data(), d);

    const MatrixXd sa = psd_sqrt(ca, "frechet cov_a");
    const MatrixXd inner = sa * cb * sa;
    const MatrixXd root = psd_sqrt(inner, "frechet product");

    const double mean_term = (mu_a - mu_b).squaredNorm();
    return mean_term + ca.trace() + cb.trace() - 2.0 * root.trace();
}

double frechet_from_features(const std::vector<std::vector<double>>& a,
                             const std::vector<std::vector<double>>& b) {
    if (a.empty() || b.empty()) throw data_error("frechet: empty feature set");
    const int d = static_cast<int>(a.front().size());
    auto stats = [&](const std::vector<std::vector<double>>& feats,
                     std::vector<double>& mean, std::vector<double>& cov) {
        const int n = static_cast<int>(feats.size());
        if (n < d + 1) {
            throw data_error("frechet: need at least " + std::to_string(d + 1) +
                             " samples for " + std::to_string(d) + " feature dims, got " +
                             std::to_string(n));
        }
        MatrixXd x(n, d);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(feats[static_cast<std::size_t>(i)].size()) != d) {
                throw std::invalid_argument("frechet: ragged feature matrix");
            }
            for (int j = 0; j < d; ++j) {
                x(i, j) = feats[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            }
        }
        const VectorXd mu = x.colwise().mean();
        MatrixXd centered = x.rowwise() - mu.transpose();
        MatrixXd c = centered.transpose() * centered / static_cast<double>(n - 1);
        c += 1e-6 * MatrixXd::Identity(d, d);  // ridge
        mean.assign(mu.data(), mu.data() + d);
        cov.assign(c.data(), c.data() + static_cast<std::size_t>(d) * d);
    };
    std::vector<double> mu_a, cov_a, mu_b, cov_b;
    stats(a, mu_a, cov_a);
    stats(b, mu_b, cov_b);
    return frechet_gaussian(mu_a, cov_a, mu_b, cov_b);
}

double frechet_proxy(const std::vector<Volume>& set_a, const std::vector<Volume>& set_b,
                     std::uint64_t projection_seed, int feature_dim) {
    auto featurize = [&](const std::vector<Volume>& vols) {
        std::vector<std::vector<double>> feats;
        feats.reserve(vols.size());
        for (const Volume& v : vols) {
            feats.push_back(extract_features(v, feature_dim, projection_seed));
        }
        return feats;
    };
    return frechet_from_features(featurize(set_a), featurize(set_b));
}

// --- report ---------------------------------------------------------------------

double MetricReport::mean_ssim() const {
    double s = 0.0;
    for (const auto& p : pairs) s += p.ssim;
    return pairs.empty() ? 0.0 : s / static_cast<double>(pairs.size());
}

double MetricReport::mean_mse() const {
    double s = 0.0;
    for (const auto& p : pairs) s += p.mse;
    return pairs.empty() ? 0.0 : s / static_cast<double>(pairs.size());
}

double parse_delta_suffix(const std::string& name) {
    const auto pos = name.rfind("_d");
    if (pos == std::string::npos) return -1.0;
    const std::string tail = name.substr(pos + 2);
    try {
        std::size_t used = 0;
        const double v = std::stod(tail, &used);
        if (used == 0) return -1.0;
        return v;
    } catch (...) {
        return -1.0;
    }
}

std::string MetricReport::table() const {
    std::ostringstream out;
    out << "pairs evaluated: " << pairs.size() << "\n";
    out << "method            frechet_proxy(v)   ssim(^)\n";
    char line[128];
    std::snprintf(line, sizeof line, "%-16s  %16.6f  %8.4f\n", "engine", frechet,
                  mean_ssim());
    out << line;

    std::map<double, std::pair<double, int>> by_delta;
    for (const auto& p : pairs) {
        if (p.delta_years >= 0.0) {
            auto& [sum, n] = by_delta[p.delta_years];
            sum += p.ssim;
            n += 1;
        }
    }
    if (!by_delta.empty()) {
        out << "per-interval ssim:\n";
        for (const auto& [delta, acc] : by_delta) {
            std::snprintf(line, sizeof line, "  delta=%-6.3g  ssim=%8.4f  (n=%d)\n", delta,
                          acc.first / acc.second, acc.second);
            out << line;
        }
    }
    return out.str();
}

void MetricReport::write_table(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << table();
}

void MetricReport::write_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path);
    for (const auto& p : pairs) {
        nlohmann::json j{{"name", p.name}, {"ssim", p.ssim}, {"mse", p.mse}, {"psnr", p.psnr}};
        if (p.delta_years >= 0.0) j["delta_years"] = p.delta_years;
        out << j.dump() << "\n";
    }
    nlohmann::json summary{{"summary", true},
                           {"pairs", pairs.size()},
                           {"mean_ssim", mean_ssim()},
                           {"mean_mse", mean_mse()},
                           {"frechet_proxy", frechet},
                           {"feature_dim", feature_dim},
                           {"projection_seed", projection_seed}};
    out << summary.dump() << "\n";
}

}  // namespace longdiff
