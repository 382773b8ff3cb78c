#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "longdiff/data.hpp"
#include "longdiff/errors.hpp"
#include "longdiff/rng.hpp"

using namespace longdiff;

namespace {

Volume ramp_volume(Shape3 shape, float lo, float hi) {
    Volume v = Volume::zeros(shape);
    const std::size_t n = v.voxels.size();
    for (std::size_t i = 0; i < n; ++i) {
        v.voxels[i] = lo + (hi - lo) * static_cast<float>(i) / static_cast<float>(n - 1);
    }
    return v;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("longdiff_test_" + std::to_string(Rng(std::random_device{}()).next_u64()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("normalize maps the raw range onto [-1, 1]") {
    Volume raw = Volume::zeros(Shape3{1, 1, 3});
    raw.voxels = {0.0f, 50.0f, 100.0f};
    const auto [v, affine] = normalize(raw);
    CHECK(v.voxels[0] == doctest::Approx(-1.0));
    CHECK(v.voxels[1] == doctest::Approx(0.0));
    CHECK(v.voxels[2] == doctest::Approx(1.0));
    CHECK(affine.to_raw(-1.0) == doctest::Approx(0.0));
    CHECK(affine.to_raw(1.0) == doctest::Approx(100.0));
}

TEST_CASE("normalize is the identity on an exact [-1, 1] volume") {
    const Volume raw = ramp_volume(Shape3{2, 2, 2}, -1.0f, 1.0f);
    const auto [v, affine] = normalize(raw);
    for (std::size_t i = 0; i < raw.voxels.size(); ++i) {
        CHECK(v.voxels[i] == doctest::Approx(raw.voxels[i]).epsilon(1e-7));
    }
}

TEST_CASE("denormalize undoes normalize within 1e-6") {
    const Volume raw = ramp_volume(Shape3{4, 4, 4}, 3.0f, 250.0f);
    const auto [v, affine] = normalize(raw);
    const Volume back = denormalize(v, affine);
    for (std::size_t i = 0; i < raw.voxels.size(); ++i) {
        CHECK(std::abs(back.voxels[i] - raw.voxels[i]) < 1e-6 * 250.0);
    }
}

TEST_CASE("normalize rejects constant volumes") {
    CHECK_THROWS_AS(normalize(Volume::filled(Shape3{2, 2, 2}, 0.5f)), data_error);
}

TEST_CASE("phantom voxel count tracks the analytic ellipsoid volume") {
    PhantomSpec spec;
    spec.grid = Shape3{32, 32, 32};
    spec.center = {15.5, 15.5, 15.5};
    spec.outer_semi_axes = {10.0, 8.0, 9.0};
    spec.inner_level = spec.tissue_level;  // no visible inner structure
    const Volume v = generate_phantom(spec, 0.0);
    // Inside-the-surface voxels sit above the background/tissue midpoint, 0
    // in normalized units.
    const int count = count_voxels_at_least(v, 0.0f);
    const double analytic = 4.0 / 3.0 * M_PI * 10.0 * 8.0 * 9.0;
    CHECK(std::abs(count - analytic) / analytic < 0.05);
}

TEST_CASE("static dynamics give an age-independent phantom") {
    PhantomSpec spec;
    spec.atrophy_rate = 0.0;
    spec.growth_rate = 0.0;
    const Volume a = generate_phantom(spec, 0.0);
    const Volume b = generate_phantom(spec, 3.0);
    CHECK(a.voxels == b.voxels);
}

TEST_CASE("tissue count decreases strictly with age under atrophy") {
    PhantomSpec spec;  // defaults: atrophy 0.06, growth 0.08
    int prev = -1;
    for (int age = 0; age <= 3; ++age) {
        const Volume v = generate_phantom(spec, static_cast<double>(age));
        const int count = count_voxels_at_least(v, kTissueThreshold);
        if (age > 0) CHECK(count < prev);
        prev = count;
    }
}

TEST_CASE("phantom generation is bit-deterministic") {
    PhantomSpec spec;
    const Volume a = generate_phantom(spec, 2.0);
    const Volume b = generate_phantom(spec, 2.0);
    CHECK(a.voxels == b.voxels);
}

TEST_CASE("phantom horizon violations are rejected") {
    PhantomSpec spec;
    CHECK_THROWS_AS(generate_phantom(spec, 100.0), config_error);
}

TEST_CASE("build_pairs follows the first-visit-source protocol") {
    PhantomSpec spec;
    Subject s;
    s.id = "alpha";
    for (int v : {0, 1, 2}) {
        s.visits.push_back({v, generate_phantom(spec, static_cast<double>(v))});
    }
    const auto pairs = build_pairs({s});
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].delta_years == 1.0);
    CHECK(pairs[1].delta_years == 2.0);
    for (const auto& p : pairs) {
        CHECK(p.subject_id == "alpha");
        CHECK(p.source.voxels == s.visits[0].second.voxels);
    }
}

TEST_CASE("a two-visit subject yields exactly one pair") {
    PhantomSpec spec;
    Subject s;
    s.id = "beta";
    s.visits.push_back({0, generate_phantom(spec, 0.0)});
    s.visits.push_back({1, generate_phantom(spec, 1.0)});
    CHECK(build_pairs({s}).size() == 1);
}

TEST_CASE("pair count is visits-1 per subject") {
    const auto subjects = generate_phantom_subjects(PhantomSpec{}, 5, 4, 7);
    const auto pairs = build_pairs(subjects);
    CHECK(pairs.size() == 5 * 3);
}

TEST_CASE("subjects with fewer than two visits are rejected by name") {
    Subject s;
    s.id = "lonely";
    s.visits.push_back({0, generate_phantom(PhantomSpec{}, 0.0)});
    try {
        build_pairs({s});
        FAIL("expected data_error");
    } catch (const data_error& e) {
        CHECK(std::string(e.what()).find("lonely") != std::string::npos);
    }
}

TEST_CASE("id-hash split produces exact disjoint partitions") {
    std::vector<std::string> ids;
    for (int i = 0; i < 1239; ++i) ids.push_back("participant" + std::to_string(i));
    const auto split = split_by_id_hash(ids, 1125);
    CHECK(split.train_ids.size() == 1125);
    CHECK(split.eval_ids.size() == 114);
    std::set<std::string> train(split.train_ids.begin(), split.train_ids.end());
    for (const auto& id : split.eval_ids) CHECK(train.count(id) == 0);
}

TEST_CASE("volume files round-trip exactly") {
    TempDir dir;
    Volume v = generate_phantom(PhantomSpec{}, 1.0);
    v.spacing = {1.5f, 2.0f, 2.5f};
    const std::string path = dir.file("vol.lvol");
    write_volume(path, v);
    const Volume back = read_volume(path);
    CHECK(back.shape == v.shape);
    CHECK(back.spacing == v.spacing);
    CHECK(back.voxels == v.voxels);
}

TEST_CASE("truncated volume files raise the truncation error") {
    TempDir dir;
    const std::string path = dir.file("trunc.lvol");
    write_volume(path, generate_phantom(PhantomSpec{}, 0.0));
    const auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full - 37);
    CHECK_THROWS_AS(read_volume(path), truncated_error);
}

TEST_CASE("wrong magic bytes raise the format error naming them") {
    TempDir dir;
    const std::string path = dir.file("bogus.lvol");
    std::ofstream(path, std::ios::binary) << "JUNKxxxxxxxxxxxxxxxxxxxxxxxx";
    try {
        read_volume(path);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        // 'J' 'U' 'N' 'K'
        CHECK(std::string(e.what()).find("4a 55 4e 4b") != std::string::npos);
    }
}

TEST_CASE("future format versions are rejected distinctly") {
    TempDir dir;
    const std::string path = dir.file("future.lvol");
    write_volume(path, generate_phantom(PhantomSpec{}, 0.0));
    // Bump the little-endian version field (bytes 4-5).
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char v2[2] = {2, 0};
    f.write(v2, 2);
    f.close();
    CHECK_THROWS_AS(read_volume(path), version_error);
}

TEST_CASE("dataset listings round-trip and load into subjects") {
    TempDir dir;
    const auto subjects = generate_phantom_subjects(PhantomSpec{}, 3, 2, 11);
    std::vector<DatasetRecord> records;
    for (const auto& s : subjects) {
        for (const auto& [visit, volume] : s.visits) {
            const std::string name = s.id + "_v" + std::to_string(visit) + ".lvol";
            write_volume(dir.file(name), volume);
            records.push_back({s.id, visit, name});
        }
    }
    const std::string listing = dir.file("dataset.tsv");
    write_dataset_listing(listing, records);

    const auto parsed = read_dataset_listing(listing);
    REQUIRE(parsed.size() == records.size());
    CHECK(parsed[0].subject_id == records[0].subject_id);

    const auto loaded = load_subjects(listing);
    REQUIRE(loaded.size() == subjects.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].id == subjects[i].id);
        REQUIRE(loaded[i].visits.size() == subjects[i].visits.size());
        CHECK(loaded[i].visits[1].second.voxels == subjects[i].visits[1].second.voxels);
    }
}

TEST_CASE("phantom subject generation is deterministic and validated") {
    const auto a = generate_phantom_subjects(PhantomSpec{}, 4, 3, 42);
    const auto b = generate_phantom_subjects(PhantomSpec{}, 4, 3, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t v = 0; v < a[i].visits.size(); ++v) {
            CHECK(a[i].visits[v].second.voxels == b[i].visits[v].second.voxels);
        }
    }
    CHECK_THROWS_AS(generate_phantom_subjects(PhantomSpec{}, 4, 1, 42), data_error);
}

TEST_CASE("mid-slice export writes a valid 8-bit PGM") {
    TempDir dir;
    const std::string path = dir.file("slice.pgm");
    write_mid_slice_pgm(path, generate_phantom(PhantomSpec{}, 0.0));
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    CHECK(magic == "P5");
    CHECK(w == 16);
    CHECK(h == 16);
    CHECK(maxval == 255);
    in.ignore(1);
    std::vector<char> pixels(static_cast<std::size_t>(w) * h);
    in.read(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    CHECK(in.gcount() == static_cast<std::streamsize>(pixels.size()));
}
