#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "longdiff/volume.hpp"

namespace longdiff {

// Affine recorded by normalize() so intensities can be mapped back:
// normalized = raw * scale + offset.
struct NormalizationAffine {
    double scale = 1.0;
    double offset = 0.0;
    double to_raw(double normalized) const { return (normalized - offset) / scale; }
};

// Min-max map of a raw volume onto [-1, 1]. Throws data_error for a constant
// volume.
std::pair<Volume, NormalizationAffine> normalize(const Volume& raw);
Volume denormalize(const Volume& v, const NormalizationAffine& affine);

// Synthetic longitudinal subject: a shrinking outer ellipsoid ("tissue")
// enclosing a growing inner one, with logistic-smoothed boundaries. Evolution
// is a deterministic function of (spec, age), which gives ground-truth
// interval dependence for end-to-end tests.
struct PhantomSpec {
    Shape3 grid{16, 16, 16};
    std::array<double, 3> center{7.5, 7.5, 7.5};           // voxels (z, y, x)
    std::array<double, 3> outer_semi_axes{6.0, 5.0, 5.5};  // voxels
    std::array<double, 3> inner_semi_axes{2.0, 1.6, 1.8};
    double atrophy_rate = 0.06;  // fractional outer shrink per year
    double growth_rate = 0.08;   // fractional inner growth per year
    double background_level = 0.0;
    double tissue_level = 1.0;
    double inner_level = 0.25;
    double smoothing_voxels = 0.7;  // logistic transition width
};

// Normalized phantom at the given age. Throws config_error once atrophy
// would drive a semi-axis to zero or below.
Volume generate_phantom(const PhantomSpec& spec, double age_years);

// Count of voxels at or above a normalized intensity threshold. With the
// default phantom levels, 0.25 separates tissue from both background and the
// inner region.
int count_voxels_at_least(const Volume& v, float threshold);
inline constexpr float kTissueThreshold = 0.25f;

// --- longitudinal dataset model --------------------------------------------

struct Subject {
    std::string id;
    std::vector<std::pair<int, Volume>> visits;  // (visit index, volume), ascending
};

struct LongitudinalPair {
    Volume source;  // first visit
    Volume target;  // one follow-up
    double delta_years = 0.0;
    std::string subject_id;
};

// One pair per (first visit, follow-up). Rejects subjects with fewer than two
// visits, naming the subject in the error.
std::vector<LongitudinalPair> build_pairs(const std::vector<Subject>& subjects);

// Deterministic id-hash split: subjects ordered by FNV-1a of their id (ties
// by id), first train_count to train. Guaranteed disjoint by construction.
struct SubjectSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> eval_ids;
};
SubjectSplit split_by_id_hash(const std::vector<std::string>& ids, std::size_t train_count);

std::uint64_t fnv1a64(const std::string& s);

// --- on-disk dataset --------------------------------------------------------

// Line-delimited dataset listing: subject_id<TAB>visit_index<TAB>path
struct DatasetRecord {
    std::string subject_id;
    int visit_index = 0;
    std::string path;
};

void write_dataset_listing(const std::string& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset_listing(const std::string& path);

// Reads every referenced volume (paths resolved relative to the listing's
// directory) and groups records into subjects.
std::vector<Subject> load_subjects(const std::string& listing_path);

// Randomized per-subject phantom population; geometry jitters with the seed,
// dynamics stay at the base values so the interval signal is shared.
std::vector<Subject> generate_phantom_subjects(const PhantomSpec& base, int n_subjects,
                                               int visits, std::uint64_t seed);

}  // namespace longdiff
