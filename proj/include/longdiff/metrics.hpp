#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "longdiff/volume.hpp"

namespace longdiff {

// Mean local structural similarity over all centers where the full window
// fits, Gaussian-weighted (sigma = window/6), computed directly in 3D.
// data_range is 2 for [-1, 1] volumes.
double ssim(const Volume& a, const Volume& b, int window = 7, double data_range = 2.0);

double mse(const Volume& a, const Volume& b);
double psnr(const Volume& a, const Volume& b, double data_range = 2.0);

// --- Frechet distance proxy --------------------------------------------------
// Feature pipeline: volumes are 8x mean-pooled, flattened, and pushed through
// a fixed seeded Gaussian random projection; the Frechet (Gaussian
// 2-Wasserstein^2) formula is then applied to the per-set feature statistics.

// Mean pooling over 8x8x8 blocks; edge blocks average whatever they cover.
std::vector<double> pool8(const Volume& v);

// Row-major (out_dim x in_dim) projection, entries N(0, 1/in_dim), fixed by
// the seed.
std::vector<double> projection_matrix(std::uint64_t seed, int in_dim, int out_dim);

std::vector<double> extract_features(const Volume& v, int feature_dim,
                                     std::uint64_t projection_seed);

// Closed-form squared 2-Wasserstein distance between Gaussians:
// |mu_a - mu_b|^2 + tr(cov_a + cov_b - 2 (cov_a cov_b)^{1/2}), with the
// matrix square root taken through eigendecompositions of symmetrized
// products and negative eigenvalues clipped at zero.
double frechet_gaussian(const std::vector<double>& mean_a, const std::vector<double>& cov_a,
                        const std::vector<double>& mean_b, const std::vector<double>& cov_b);

// Sample statistics (unbiased covariance, 1e-6 ridge) -> frechet_gaussian.
// Needs more feature vectors than dimensions on each side.
double frechet_from_features(const std::vector<std::vector<double>>& a,
                             const std::vector<std::vector<double>>& b);

double frechet_proxy(const std::vector<Volume>& set_a, const std::vector<Volume>& set_b,
                     std::uint64_t projection_seed, int feature_dim = 32);

// --- evaluation report --------------------------------------------------------

struct PairMetrics {
    std::string name;
    double ssim = 0.0;
    double mse = 0.0;
    double psnr = 0.0;
    double delta_years = -1.0;  // < 0 when unknown
};

struct MetricReport {
    std::vector<PairMetrics> pairs;
    double frechet = 0.0;
    int feature_dim = 0;
    std::uint64_t projection_seed = 0;

    double mean_ssim() const;
    double mean_mse() const;

    // Overall summary plus per-interval rows where deltas are known.
    std::string table() const;
    void write_table(const std::string& path) const;
    // One JSON object per line: every pair, then a summary record.
    void write_jsonl(const std::string& path) const;
};

// Parses a trailing "_d<number>" marker in a volume name, -1 when absent.
double parse_delta_suffix(const std::string& name);

}  // namespace longdiff
