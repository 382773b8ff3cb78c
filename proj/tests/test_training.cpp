#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "longdiff/diffusion.hpp"
#include "longdiff/errors.hpp"
#include "longdiff/rng.hpp"
#include "longdiff/training.hpp"

using namespace longdiff;

namespace {

std::vector<LongitudinalPair> tiny_dataset(int subjects = 2, int visits = 3) {
    PhantomSpec spec;
    spec.grid = Shape3{8, 8, 8};
    spec.center = {3.5, 3.5, 3.5};
    spec.outer_semi_axes = {3.0, 2.5, 2.7};
    spec.inner_semi_axes = {1.0, 0.8, 0.9};
    return build_pairs(generate_phantom_subjects(spec, subjects, visits, 2024));
}

UNetConfig tiny_net() {
    UNetConfig c;
    c.base_channels = 4;
    c.channel_multipliers = {1, 2};
    c.attention_levels = {1};
    c.time_embed_dim = 8;
    c.delta_embed_dim = 4;
    c.norm_groups = 2;
    return c;
}

TrainConfig quick_config(std::int64_t iterations) {
    TrainConfig c;
    c.iterations = iterations;
    c.checkpoint_every = 1000000;
    c.loss_window = 16;
    return c;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("longdiff_train_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct EchoNoiseDenoiser : Denoiser {
    // Cheats by knowing the exact noise; models the perfect predictor.
    const NoiseSample* eps = nullptr;
    Volume predict_noise(const DenoiserInput&) const override { return *eps; }
};

}  // namespace

TEST_CASE("adam leaves parameters at a zero-gradient fixed point") {
    Tensor value({3});
    value.data = {1.0, -2.0, 0.5};
    Tensor grad({3});
    std::vector<ParamRef> params{{"p", &value, &grad}};
    AdamState state = AdamState::for_params(params);
    TrainConfig cfg = quick_config(0);

    // Prime the moments with one real gradient, then feed zeros.
    grad.data = {0.3, -0.1, 0.2};
    adam_step(params, state, cfg);
    const auto after_first = value.data;
    grad.data = {0.0, 0.0, 0.0};
    const double m_before = std::abs(state.m[0].data[0]);
    for (int i = 0; i < 100; ++i) adam_step(params, state, cfg);
    CHECK(std::abs(state.m[0].data[0]) < 1e-3 * m_before);  // moments decay
    // Parameter drift under pure moment decay stays negligible versus the lr.
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(value.data[static_cast<std::size_t>(i)] -
                       after_first[static_cast<std::size_t>(i)]) < 100 * cfg.learning_rate);
    }
}

TEST_CASE("adam with truly zero moments never moves parameters") {
    Tensor value({2});
    value.data = {0.7, -0.4};
    Tensor grad({2});  // zeros from the start
    std::vector<ParamRef> params{{"p", &value, &grad}};
    AdamState state = AdamState::for_params(params);
    TrainConfig cfg = quick_config(0);
    for (int i = 0; i < 10; ++i) adam_step(params, state, cfg);
    CHECK(value.data[0] == 0.7);
    CHECK(value.data[1] == -0.4);
}

TEST_CASE("adam matches a hand-computed scalar trajectory") {
    // Independent recurrence written out step by step.
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.4;
    double ref_p = 1.0, ref_m = 0.0, ref_v = 0.0;
    std::vector<double> expected;
    for (int k = 1; k <= 10; ++k) {
        ref_m = b1 * ref_m + (1 - b1) * g;
        ref_v = b2 * ref_v + (1 - b2) * g * g;
        const double mh = ref_m / (1 - std::pow(b1, k));
        const double vh = ref_v / (1 - std::pow(b2, k));
        ref_p -= lr * mh / (std::sqrt(vh) + eps);
        expected.push_back(ref_p);
    }

    Tensor value({1});
    value.data = {1.0};
    Tensor grad({1});
    grad.data = {g};
    std::vector<ParamRef> params{{"w", &value, &grad}};
    AdamState state = AdamState::for_params(params);
    TrainConfig cfg = quick_config(0);
    cfg.learning_rate = lr;
    for (int k = 0; k < 10; ++k) {
        adam_step(params, state, cfg);
        CHECK(value.data[0] == doctest::Approx(expected[static_cast<std::size_t>(k)])
                                   .epsilon(1e-12));
    }
}

TEST_CASE("adam is deterministic given identical state and gradients") {
    auto run = [] {
        Tensor value({4});
        value.data = {0.1, 0.2, 0.3, 0.4};
        Tensor grad({4});
        grad.data = {0.5, -0.5, 0.25, 0.0};
        std::vector<ParamRef> params{{"p", &value, &grad}};
        AdamState state = AdamState::for_params(params);
        TrainConfig cfg;
        for (int i = 0; i < 7; ++i) adam_step(params, state, cfg);
        return value.data;
    };
    CHECK(run() == run());
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
    Tensor value({1}), grad({1});
    grad.data = {std::nan("")};
    std::vector<ParamRef> params{{"enc0.conv1.weight", &value, &grad}};
    AdamState state = AdamState::for_params(params);
    TrainConfig cfg;
    try {
        adam_step(params, state, cfg);
        FAIL("expected numerical_error");
    } catch (const numerical_error& e) {
        CHECK(std::string(e.what()).find("enc0.conv1.weight") != std::string::npos);
    }
}

TEST_CASE("a perfect noise predictor drives the loss to zero") {
    const auto sched = NoiseSchedule::linear(100, 1e-3, 0.1);
    const auto pairs = tiny_dataset();
    const NoiseSample eps = draw_noise(pairs[0].target.shape, 5);
    EchoNoiseDenoiser perfect;
    perfect.eps = &eps;
    CHECK(loss_simple(sched, perfect, pairs[0], 30, eps) == 0.0);
}

TEST_CASE("the zero predictor sees unit expected loss") {
    const auto sched = NoiseSchedule::linear(100, 1e-3, 0.1);
    const auto pairs = tiny_dataset();
    const ZeroDenoiser zero;
    Rng trng(31);
    const int n = 200;
    double sum = 0.0;
    std::int64_t voxels = 0;
    for (int i = 0; i < n; ++i) {
        const int t = static_cast<int>(trng.uniform_int(1, 100));
        const NoiseSample eps = draw_noise(pairs[0].target.shape, 1000 + i);
        sum += loss_simple(sched, zero, pairs[0], t, eps);
        voxels += static_cast<std::int64_t>(eps.voxels.size());
    }
    const double mean = sum / n;
    // Var of a single eps^2 term is 2; the mean over n*voxels terms.
    const double se = std::sqrt(2.0 / static_cast<double>(voxels));
    CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("loss is invariant to a consistent voxel permutation") {
    const auto sched = NoiseSchedule::linear(100, 1e-3, 0.1);
    auto pairs = tiny_dataset();
    LongitudinalPair pair = pairs[0];
    const NoiseSample eps = draw_noise(pair.target.shape, 9);
    const ZeroDenoiser zero;
    const double base = loss_simple(sched, zero, pair, 40, eps);

    // Reverse every field with the same permutation.
    LongitudinalPair flipped = pair;
    std::reverse(flipped.source.voxels.begin(), flipped.source.voxels.end());
    std::reverse(flipped.target.voxels.begin(), flipped.target.voxels.end());
    NoiseSample eps_flipped = eps;
    std::reverse(eps_flipped.voxels.begin(), eps_flipped.voxels.end());
    CHECK(loss_simple(sched, zero, flipped, 40, eps_flipped) ==
          doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("zero-iteration training returns the initial parameters") {
    const auto sched = NoiseSchedule::linear(20, 1e-3, 0.1);
    const auto pairs = tiny_dataset();
    const TrainState state = train(sched, tiny_net(), quick_config(0), pairs);
    ConditionalUNet reference(tiny_net());
    reference.init_params(quick_config(0).rng_seed);
    auto got = state.net->parameters();
    auto want = reference.parameters();
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].value->data == want[i].value->data);
    }
    CHECK(state.iteration == 0);
}

TEST_CASE("training emits byte-identical checkpoints for the same seed") {
    const auto sched = NoiseSchedule::linear(20, 1e-3, 0.1);
    const auto pairs = tiny_dataset();
    TempDir dir;
    auto run = [&](const std::string& name) {
        TrainState state = train(sched, tiny_net(), quick_config(3), pairs);
        const Checkpoint ckpt = make_checkpoint(state, sched);
        write_checkpoint(dir.file(name), ckpt);
        return slurp(dir.file(name));
    };
    CHECK(run("a.ldck") == run("b.ldck"));
}

TEST_CASE("checkpoints round-trip the full training state") {
    const auto sched = NoiseSchedule::linear(20, 1e-3, 0.1);
    const auto pairs = tiny_dataset();
    TempDir dir;
    TrainState state = train(sched, tiny_net(), quick_config(4), pairs);
    write_checkpoint(dir.file("state.ldck"), make_checkpoint(state, sched));

    TrainState restored = restore_train_state(read_checkpoint(dir.file("state.ldck")));
    CHECK(restored.iteration == state.iteration);
    CHECK(restored.loss_history == state.loss_history);
    auto got = restored.net->parameters();
    auto want = state.net->parameters();
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].value->data == want[i].value->data);
        CHECK(restored.adam.m[i].data == state.adam.m[i].data);
        CHECK(restored.adam.v[i].data == state.adam.v[i].data);
    }

    // Resuming replays the same stream as a straight run.
    TrainState longer = train(sched, tiny_net(), quick_config(6), pairs);
    TrainConfig cfg = quick_config(6);
    train_steps(sched, cfg, pairs, restored, 2);
    auto a = restored.net->parameters();
    auto b = longer.net->parameters();
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].value->data == b[i].value->data);
    }
}

TEST_CASE("every timestep bucket is drawn over 10T iterations") {
    const int T = 50;
    const auto sched = NoiseSchedule::linear(T, 1e-3, 0.1);
    const auto pairs = tiny_dataset(1, 2);
    UNetConfig net = tiny_net();
    net.attention_levels = {};  // keep the probe run cheap
    TrainConfig cfg = quick_config(10 * T);
    cfg.rng_seed = 4;

    std::vector<int> hits(static_cast<std::size_t>(T) + 1, 0);
    TrainCallbacks cb;
    cb.on_draw = [&](std::int64_t, std::size_t, int t) {
        hits[static_cast<std::size_t>(t)] += 1;
    };
    train(sched, net, cfg, pairs, cb);
    for (int t = 1; t <= T; ++t) {
        CAPTURE(t);
        CHECK(hits[static_cast<std::size_t>(t)] > 0);
    }
}

TEST_CASE("training config files round-trip and validate") {
    TempDir dir;
    TrainConfig cfg;
    cfg.iterations = 1234;
    cfg.learning_rate = 0.0005;
    cfg.rng_seed = 99;
    cfg.write_file(dir.file("train.cfg"));
    const TrainConfig back = TrainConfig::from_file(dir.file("train.cfg"));
    CHECK(back.iterations == 1234);
    CHECK(back.learning_rate == doctest::Approx(0.0005));
    CHECK(back.rng_seed == 99);

    std::ofstream(dir.file("bad.cfg")) << "learning_rate = nope\n";
    CHECK_THROWS_AS(TrainConfig::from_file(dir.file("bad.cfg")), config_error);
    std::ofstream(dir.file("unknown.cfg")) << "warp_speed = 9\n";
    CHECK_THROWS_AS(TrainConfig::from_file(dir.file("unknown.cfg")), config_error);
}
