#include "longdiff/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "longdiff/errors.hpp"
#include "longdiff/rng.hpp"

namespace longdiff {

std::pair<Volume, NormalizationAffine> normalize(const Volume& raw) {
    const float lo = raw.min();
    const float hi = raw.max();
    if (!(hi > lo)) throw data_error("cannot normalize a constant volume");
    NormalizationAffine affine;
    affine.scale = 2.0 / (static_cast<double>(hi) - lo);
    affine.offset = -1.0 - affine.scale * lo;
    Volume out = raw;
    for (float& v : out.voxels) {
        v = static_cast<float>(affine.scale * v + affine.offset);
    }
    return {out, affine};
}

Volume denormalize(const Volume& v, const NormalizationAffine& affine) {
    Volume out = v;
    for (float& x : out.voxels) x = static_cast<float>(affine.to_raw(x));
    return out;
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Smooth inside-indicator of an ellipsoid: 0.5 exactly on the surface,
// approaching 1 inside and 0 outside over ~width voxels.
double soft_inside(const std::array<double, 3>& p, const std::array<double, 3>& center,
                   const std::array<double, 3>& semi_axes, double width) {
    double r2 = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double d = (p[i] - center[i]) / semi_axes[i];
        r2 += d * d;
    }
    const double r = std::sqrt(r2);
    // distance from the surface in voxels, approximated with the mean semi-axis
    const double mean_axis = (semi_axes[0] + semi_axes[1] + semi_axes[2]) / 3.0;
    return logistic((1.0 - r) * mean_axis / width);
}

}  // namespace

Volume generate_phantom(const PhantomSpec& spec, double age_years) {
    const double outer_scale = 1.0 - spec.atrophy_rate * age_years;
    const double inner_scale = 1.0 + spec.growth_rate * age_years;
    if (outer_scale <= 0.05) {
        throw config_error("phantom horizon exceeded: outer ellipsoid collapsed at age " +
                           std::to_string(age_years));
    }
    std::array<double, 3> outer = spec.outer_semi_axes;
    std::array<double, 3> inner = spec.inner_semi_axes;
    for (int i = 0; i < 3; ++i) {
        outer[i] *= outer_scale;
        inner[i] *= inner_scale;
        if (inner[i] >= outer[i]) {
            throw config_error("phantom horizon exceeded: inner ellipsoid reached the "
                               "outer surface at age " + std::to_string(age_years));
        }
    }

    Volume raw = Volume::zeros(spec.grid);
    for (std::uint32_t z = 0; z < spec.grid.depth; ++z) {
        for (std::uint32_t y = 0; y < spec.grid.height; ++y) {
            for (std::uint32_t x = 0; x < spec.grid.width; ++x) {
                const std::array<double, 3> p{static_cast<double>(z),
                                              static_cast<double>(y),
                                              static_cast<double>(x)};
                const double f_out = soft_inside(p, spec.center, outer, spec.smoothing_voxels);
                const double f_in = soft_inside(p, spec.center, inner, spec.smoothing_voxels);
                double v = spec.background_level +
                           (spec.tissue_level - spec.background_level) * f_out;
                v += (spec.inner_level - spec.tissue_level) * f_out * f_in;
                raw.at(z, y, x) = static_cast<float>(v);
            }
        }
    }
    return normalize(raw).first;
}

int count_voxels_at_least(const Volume& v, float threshold) {
    int n = 0;
    for (float x : v.voxels) {
        if (x >= threshold) ++n;
    }
    return n;
}

std::vector<LongitudinalPair> build_pairs(const std::vector<Subject>& subjects) {
    std::vector<LongitudinalPair> pairs;
    for (const Subject& s : subjects) {
        if (s.visits.size() < 2) {
            throw data_error("subject " + s.id + " has " +
                             std::to_string(s.visits.size()) +
                             " visit(s); at least two are required");
        }
        for (std::size_t i = 1; i < s.visits.size(); ++i) {
            if (s.visits[i].first <= s.visits[i - 1].first) {
                throw data_error("subject " + s.id + ": visit indices must increase");
            }
        }
        const auto& [first_index, first_volume] = s.visits.front();
        for (std::size_t i = 1; i < s.visits.size(); ++i) {
            LongitudinalPair p;
            p.source = first_volume;
            p.target = s.visits[i].second;
            p.delta_years = static_cast<double>(s.visits[i].first - first_index);
            p.subject_id = s.id;
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

SubjectSplit split_by_id_hash(const std::vector<std::string>& ids, std::size_t train_count) {
    if (train_count > ids.size()) {
        throw data_error("train_count " + std::to_string(train_count) +
                         " exceeds subject count " + std::to_string(ids.size()));
    }
    std::vector<std::string> ordered = ids;
    std::sort(ordered.begin(), ordered.end(), [](const std::string& a, const std::string& b) {
        const auto ha = fnv1a64(a), hb = fnv1a64(b);
        return ha != hb ? ha < hb : a < b;
    });
    SubjectSplit split;
    split.train_ids.assign(ordered.begin(), ordered.begin() + train_count);
    split.eval_ids.assign(ordered.begin() + train_count, ordered.end());
    return split;
}

void write_dataset_listing(const std::string& path,
                           const std::vector<DatasetRecord>& records) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path);
    for (const DatasetRecord& r : records) {
        out << r.subject_id << '\t' << r.visit_index << '\t' << r.path << '\n';
    }
    if (!out) throw data_error("write failed: " + path);
}

std::vector<DatasetRecord> read_dataset_listing(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open for reading: " + path);
    std::vector<DatasetRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        DatasetRecord r;
        if (!(std::getline(ss, r.subject_id, '\t') && (ss >> r.visit_index) &&
              ss.ignore(1) && std::getline(ss, r.path))) {
            throw data_error(path + ":" + std::to_string(line_no) + ": malformed record");
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<Subject> load_subjects(const std::string& listing_path) {
    const auto records = read_dataset_listing(listing_path);
    const auto base_dir = std::filesystem::path(listing_path).parent_path();

    std::map<std::string, Subject> by_id;
    std::vector<std::string> order;
    for (const DatasetRecord& r : records) {
        auto [it, inserted] = by_id.try_emplace(r.subject_id);
        if (inserted) {
            it->second.id = r.subject_id;
            order.push_back(r.subject_id);
        }
        std::filesystem::path p(r.path);
        if (p.is_relative()) p = base_dir / p;
        it->second.visits.push_back({r.visit_index, read_volume(p.string())});
    }

    std::vector<Subject> subjects;
    subjects.reserve(order.size());
    for (const std::string& id : order) {
        Subject& s = by_id[id];
        std::sort(s.visits.begin(), s.visits.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        subjects.push_back(std::move(s));
    }
    return subjects;
}

std::vector<Subject> generate_phantom_subjects(const PhantomSpec& base, int n_subjects,
                                               int visits, std::uint64_t seed) {
    if (visits < 2) {
        throw data_error("subjects need at least two visits, requested " +
                         std::to_string(visits));
    }
    if (n_subjects < 1) throw data_error("need at least one subject");

    std::vector<Subject> subjects;
    subjects.reserve(static_cast<std::size_t>(n_subjects));
    for (int s = 0; s < n_subjects; ++s) {
        Rng rng(splitmix64(seed ^ (0x5b17ULL + static_cast<std::uint64_t>(s))));
        PhantomSpec spec = base;
        for (int i = 0; i < 3; ++i) {
            spec.center[i] += (rng.uniform() - 0.5);                  // +-0.5 voxel
            spec.outer_semi_axes[i] *= 1.0 + 0.08 * (rng.uniform() - 0.5);
            spec.inner_semi_axes[i] *= 1.0 + 0.08 * (rng.uniform() - 0.5);
        }
        Subject subject;
        char id[32];
        std::snprintf(id, sizeof id, "subj%04d", s);
        subject.id = id;
        for (int v = 0; v < visits; ++v) {
            subject.visits.push_back({v, generate_phantom(spec, static_cast<double>(v))});
        }
        subjects.push_back(std::move(subject));
    }
    return subjects;
}

}  // namespace longdiff
