// Command line front end: phantom data generation, schedule verification,
// training, sampling, evaluation and slice export.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "longdiff/checkpoint.hpp"
#include "longdiff/data.hpp"
#include "longdiff/diffusion.hpp"
#include "longdiff/errors.hpp"
#include "longdiff/manifest.hpp"
#include "longdiff/metrics.hpp"
#include "longdiff/rng.hpp"
#include "longdiff/training.hpp"
#include "longdiff/unet.hpp"

namespace fs = std::filesystem;
using namespace longdiff;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGeneric = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// --- phantom spec files (plain key = value) -----------------------------------

std::array<double, 3> parse_triple(const std::string& value, const std::string& key) {
    std::array<double, 3> out{};
    if (std::sscanf(value.c_str(), "%lf,%lf,%lf", &out[0], &out[1], &out[2]) != 3) {
        throw config_error("expected three comma-separated numbers for " + key);
    }
    return out;
}

PhantomSpec load_phantom_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open phantom spec: " + path);
    PhantomSpec spec;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string key, eq, value;
        if (!(ss >> key)) continue;
        if (!(ss >> eq >> value) || eq != "=") {
            throw config_error(path + ":" + std::to_string(line_no) +
                               ": expected `key = value`");
        }
        if (key == "grid") {
            const auto g = parse_triple(value, key);
            spec.grid = Shape3{static_cast<std::uint32_t>(g[0]),
                               static_cast<std::uint32_t>(g[1]),
                               static_cast<std::uint32_t>(g[2])};
        } else if (key == "center") spec.center = parse_triple(value, key);
        else if (key == "outer_semi_axes") spec.outer_semi_axes = parse_triple(value, key);
        else if (key == "inner_semi_axes") spec.inner_semi_axes = parse_triple(value, key);
        else if (key == "atrophy_rate") spec.atrophy_rate = std::stod(value);
        else if (key == "growth_rate") spec.growth_rate = std::stod(value);
        else if (key == "background_level") spec.background_level = std::stod(value);
        else if (key == "tissue_level") spec.tissue_level = std::stod(value);
        else if (key == "inner_level") spec.inner_level = std::stod(value);
        else if (key == "smoothing_voxels") spec.smoothing_voxels = std::stod(value);
        else throw config_error(path + ":" + std::to_string(line_no) +
                                ": unknown key `" + key + "`");
    }
    return spec;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// --- gen-data -------------------------------------------------------------------

struct GenDataArgs {
    std::string out_dir;
    std::string spec_file;
    int subjects = 10;
    int visits = 6;
    std::uint64_t seed = 0;
};

int run_gen_data(const GenDataArgs& args) {
    RunManifest manifest;
    manifest.command = "gen-data";
    manifest.seed = args.seed;
    manifest.stamp_start();

    PhantomSpec spec;
    if (!args.spec_file.empty()) {
        spec = load_phantom_spec(args.spec_file);
        manifest.inputs.push_back(args.spec_file);
    }
    manifest.config["subjects"] = std::to_string(args.subjects);
    manifest.config["visits"] = std::to_string(args.visits);
    manifest.config["grid"] = spec.grid.str();
    manifest.config["atrophy_rate"] = format_double(spec.atrophy_rate);
    manifest.config["growth_rate"] = format_double(spec.growth_rate);

    fs::create_directories(args.out_dir);
    const auto subjects = generate_phantom_subjects(spec, args.subjects, args.visits,
                                                    args.seed);
    std::vector<DatasetRecord> records;
    for (const auto& s : subjects) {
        for (const auto& [visit, volume] : s.visits) {
            const std::string name = s.id + "_v" + std::to_string(visit) + ".lvol";
            write_volume((fs::path(args.out_dir) / name).string(), volume);
            records.push_back({s.id, visit, name});
            manifest.outputs.push_back(name);
        }
    }
    const std::string listing = (fs::path(args.out_dir) / "dataset.tsv").string();
    write_dataset_listing(listing, records);
    manifest.outputs.push_back("dataset.tsv");

    const auto pairs = build_pairs(subjects);
    std::cout << "wrote " << records.size() << " volumes, " << pairs.size()
              << " training pairs listed in " << listing << "\n";

    manifest.stamp_finish();
    manifest.write((fs::path(args.out_dir) / "manifest.json").string());
    return kExitOk;
}

// --- verify ---------------------------------------------------------------------

struct VerifyArgs {
    int steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::string csv_path;
    int samples = 4000;
    std::uint64_t seed = 0;
};

int run_verify(const VerifyArgs& args) {
    int failures = 0;
    auto report = [&](bool ok, const std::string& name, const std::string& detail = "") {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
        if (!detail.empty()) std::cout << " (" << detail << ")";
        std::cout << "\n";
        if (!ok) ++failures;
    };

    const auto sched = NoiseSchedule::linear(args.steps, args.beta_start, args.beta_end);

    // Schedule structure.
    bool monotone = true, recurrence = true, telescoping = true, consistency = true;
    for (int t = 2; t <= sched.steps(); ++t) {
        if (!(sched.alpha_bar()[t - 1] < sched.alpha_bar()[t - 2])) monotone = false;
        if (!(sched.beta()[t - 1] >= sched.beta()[t - 2])) monotone = false;
        const double recomputed = sched.alpha_bar()[t - 2] * sched.alpha()[t - 1];
        if (std::abs(recomputed - sched.alpha_bar()[t - 1]) >
            2.0 * std::abs(sched.alpha_bar()[t - 1]) * 1e-16) {
            recurrence = false;
        }
    }
    for (int t = 1; t <= sched.steps(); ++t) {
        const auto s = sched.at(t);
        if (s.posterior_variance > s.beta) telescoping = false;
        const double lhs = s.post_coef_x0 + s.post_coef_xt * std::sqrt(s.alpha_bar);
        const double rhs = std::sqrt(s.alpha_bar_prev);
        if (std::abs(lhs - rhs) > 1e-10 * rhs) consistency = false;
    }
    report(monotone, "schedule monotonicity");
    report(recurrence, "alpha_bar recurrence");
    report(telescoping, "posterior variance telescoping");
    report(consistency, "posterior-mean coefficient consistency");
    report(sched.at(1).posterior_variance == 0.0, "zero variance at t=1");

    // Noise-form / posterior-mean identity on random scalars.
    {
        Rng rng(splitmix64(args.seed ^ 0x1dULL));
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const int t = static_cast<int>(rng.uniform_int(1, sched.steps()));
            const ScheduleStep s = sched.at(t);
            const double x0 = rng.normal();
            const double eps = rng.normal();
            const double xt = forward_sample_scalar(s, x0, eps);
            const double mu_model = reverse_mean_scalar(s, xt, eps);
            const double mu_post = posterior_mean_scalar(s, x0, xt);
            worst = std::max(worst, std::abs(mu_model - mu_post) /
                                        std::max(1e-12, std::abs(mu_post)));
        }
        report(worst < 1e-8, "noise-form identity", "worst rel err " + format_double(worst));
    }

    // Oracle-denoiser chain against its closed-form law.
    {
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
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < args.samples; ++i) {
            const Volume out = sample_loop(sched, oracle, source, 1.0,
                                           splitmix64(args.seed + 1000003ULL * i));
            sum += out.voxels[0];
            sum_sq += static_cast<double>(out.voxels[0]) * out.voxels[0];
        }
        const double got_mean = sum / args.samples;
        const double got_var = sum_sq / args.samples - got_mean * got_mean;
        const double se_mean = std::sqrt(var / args.samples);
        const double se_var = var * std::sqrt(2.0 / args.samples);
        report(std::abs(got_mean - mean) < 3.0 * se_mean, "oracle chain mean",
               "got " + format_double(got_mean) + ", law " + format_double(mean));
        report(std::abs(got_var - var) < 3.0 * se_var, "oracle chain variance",
               "got " + format_double(got_var) + ", law " + format_double(var));
    }

    if (!args.csv_path.empty()) {
        sched.write_csv(args.csv_path);
        std::cout << "schedule diagnostics written to " << args.csv_path << "\n";
    }
    std::cout << (failures == 0 ? "verify: all checks passed\n"
                                : "verify: " + std::to_string(failures) + " check(s) failed\n");
    return failures == 0 ? kExitOk : kExitNumerical;
}

// --- train ----------------------------------------------------------------------

struct TrainArgs {
    std::string data_dir;
    std::string out_dir;
    std::string config_file;
    // optional flag overrides; negative/zero means "not set"
    std::int64_t iterations = -1;
    double learning_rate = -1.0;
    std::int64_t seed = -1;
    int batch_size = -1;
    std::int64_t checkpoint_every = -1;
    int schedule_steps = 100;
    double beta_start = 1e-3;
    double beta_end = 0.1;
    int base_channels = 8;
    std::string multipliers = "1,2";
    std::string attention = "1";
    int time_embed = 32;
    int delta_embed = 8;
    int norm_groups = 4;
};

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::istringstream ss(csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) out.push_back(std::stoi(token));
    }
    return out;
}

int run_train(const TrainArgs& args) {
    TrainConfig config;
    config.iterations = 2000;  // desk-scale default
    if (!args.config_file.empty()) config = TrainConfig::from_file(args.config_file);
    if (args.iterations >= 0) config.iterations = args.iterations;
    if (args.learning_rate > 0) config.learning_rate = args.learning_rate;
    if (args.seed >= 0) config.rng_seed = static_cast<std::uint64_t>(args.seed);
    if (args.batch_size > 0) config.batch_size = args.batch_size;
    if (args.checkpoint_every > 0) config.checkpoint_every = args.checkpoint_every;
    config.validate();

    UNetConfig net_config;
    net_config.base_channels = args.base_channels;
    net_config.channel_multipliers = parse_int_list(args.multipliers);
    const auto attn = parse_int_list(args.attention);
    net_config.attention_levels = std::set<int>(attn.begin(), attn.end());
    net_config.time_embed_dim = args.time_embed;
    net_config.delta_embed_dim = args.delta_embed;
    net_config.norm_groups = args.norm_groups;

    const auto sched = NoiseSchedule::linear(args.schedule_steps, args.beta_start,
                                             args.beta_end);

    const std::string listing = (fs::path(args.data_dir) / "dataset.tsv").string();
    const auto subjects = load_subjects(listing);
    const auto pairs = build_pairs(subjects);
    if (pairs.empty()) throw data_error("no training pairs in " + args.data_dir);
    net_config.validate(pairs.front().target.shape);

    fs::create_directories(args.out_dir);

    RunManifest manifest;
    manifest.command = "train";
    manifest.seed = config.rng_seed;
    manifest.inputs.push_back(listing);
    manifest.config["iterations"] = std::to_string(config.iterations);
    manifest.config["batch_size"] = std::to_string(config.batch_size);
    manifest.config["learning_rate"] = format_double(config.learning_rate);
    manifest.config["adam_beta1"] = format_double(config.adam_beta1);
    manifest.config["adam_beta2"] = format_double(config.adam_beta2);
    manifest.config["adam_epsilon"] = format_double(config.adam_epsilon);
    manifest.config["schedule_steps"] = std::to_string(args.schedule_steps);
    manifest.config["beta_start"] = format_double(args.beta_start);
    manifest.config["beta_end"] = format_double(args.beta_end);
    manifest.config["base_channels"] = std::to_string(net_config.base_channels);
    manifest.config["channel_multipliers"] = args.multipliers;
    manifest.config["attention_levels"] = args.attention;
    manifest.config["pairs"] = std::to_string(pairs.size());
    manifest.stamp_start();

    config.write_file((fs::path(args.out_dir) / "config.txt").string());

    std::ofstream loss_log((fs::path(args.out_dir) / "loss.csv").string());
    loss_log << "iteration,loss,wall_ms\n";

    TrainCallbacks callbacks;
    callbacks.on_step = [&](std::int64_t iter, double loss, double wall_ms) {
        loss_log << iter << "," << loss << "," << wall_ms << "\n";
        if (iter % 100 == 0) {
            std::cout << "iter " << iter << "  loss " << loss << "\n";
        }
    };
    callbacks.on_checkpoint = [&](std::int64_t iter, TrainState& state) {
        char name[64];
        std::snprintf(name, sizeof name, "ckpt_%08lld.ldck", static_cast<long long>(iter));
        write_checkpoint((fs::path(args.out_dir) / name).string(),
                         make_checkpoint(state, sched));
    };

    TrainState state = train(sched, net_config, config, pairs, callbacks);

    const std::string final_path = (fs::path(args.out_dir) / "checkpoint.ldck").string();
    write_checkpoint(final_path, make_checkpoint(state, sched));
    manifest.outputs.push_back("checkpoint.ldck");
    manifest.outputs.push_back("loss.csv");
    manifest.outputs.push_back("config.txt");

    manifest.stamp_finish();
    manifest.write((fs::path(args.out_dir) / "manifest.json").string());
    std::cout << "trained " << state.iteration << " iterations, checkpoint at "
              << final_path << "\n";
    return kExitOk;
}

// --- sample ---------------------------------------------------------------------

struct SampleArgs {
    std::string checkpoint;
    std::string source;
    double delta = 1.0;
    std::uint64_t seed = 0;
    std::string out;
    std::string slice;
    int trajectory_every = 0;
    std::string trajectory_dir;
};

int run_sample(const SampleArgs& args) {
    const Checkpoint ckpt = read_checkpoint(args.checkpoint);
    const auto sched = NoiseSchedule::linear(ckpt.meta.schedule_steps, ckpt.meta.beta_start,
                                             ckpt.meta.beta_end);
    TrainState state = restore_train_state(ckpt);
    const UNetDenoiser denoiser(state.net);

    const Volume source = read_volume(args.source);
    state.net->config().validate(source.shape);

    RunManifest manifest;
    manifest.command = "sample";
    manifest.seed = args.seed;
    manifest.inputs = {args.checkpoint, args.source};
    manifest.config["delta"] = format_double(args.delta);
    manifest.config["schedule_steps"] = std::to_string(sched.steps());
    manifest.stamp_start();

    std::vector<std::pair<int, Volume>> trajectory;
    SamplerTrace trace;
    if (args.trajectory_every > 0) {
        trace.every = args.trajectory_every;
        trace.sink = &trajectory;
    }

    const Volume raw = sample_loop(sched, denoiser, source, args.delta, args.seed, trace);
    const Volume out = clamp_to_data_range(raw);
    write_volume(args.out, out);
    manifest.outputs.push_back(args.out);

    if (!args.slice.empty()) {
        write_mid_slice_pgm(args.slice, out);
        manifest.outputs.push_back(args.slice);
    }
    if (!trajectory.empty()) {
        fs::create_directories(args.trajectory_dir);
        for (const auto& [t, state_volume] : trajectory) {
            char name[64];
            std::snprintf(name, sizeof name, "state_t%05d.lvol", t);
            write_volume((fs::path(args.trajectory_dir) / name).string(), state_volume);
        }
        manifest.outputs.push_back(args.trajectory_dir);
    }

    manifest.stamp_finish();
    manifest.write(args.out + ".manifest.json");
    std::cout << "sampled " << args.out << " (delta " << args.delta << ", seed "
              << args.seed << ")\n";
    return kExitOk;
}

// --- eval -----------------------------------------------------------------------

struct EvalArgs {
    std::string generated_dir;
    std::string reference_dir;
    std::string out_dir;
    int feature_dim = 32;
    std::uint64_t projection_seed = 0;
    int window = 7;
};

int run_eval(const EvalArgs& args) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(args.generated_dir)) {
        if (entry.path().extension() == ".lvol") {
            names.push_back(entry.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw data_error("no .lvol volumes in " + args.generated_dir);

    MetricReport report;
    std::vector<Volume> generated, reference;
    for (const std::string& name : names) {
        const fs::path ref_path = fs::path(args.reference_dir) / name;
        if (!fs::exists(ref_path)) {
            throw data_error("reference volume missing for " + name);
        }
        const Volume gen = read_volume((fs::path(args.generated_dir) / name).string());
        const Volume ref = read_volume(ref_path.string());
        PairMetrics pm;
        pm.name = name;
        pm.ssim = ssim(gen, ref, args.window);
        pm.mse = mse(gen, ref);
        pm.psnr = psnr(gen, ref);
        pm.delta_years = parse_delta_suffix(fs::path(name).stem().string());
        report.pairs.push_back(pm);
        generated.push_back(gen);
        reference.push_back(ref);
    }

    // The corpus statistic needs more volumes than feature dimensions; scale
    // the projection down for small corpora rather than refusing them.
    int dim = args.feature_dim;
    const int n = static_cast<int>(names.size());
    if (n < dim + 1) {
        dim = std::max(1, n - 1);
        std::cout << "note: " << n << " volumes; reducing feature_dim to " << dim << "\n";
    }
    report.feature_dim = dim;
    report.projection_seed = args.projection_seed;
    report.frechet = frechet_proxy(generated, reference, args.projection_seed, dim);

    fs::create_directories(args.out_dir);
    report.write_table((fs::path(args.out_dir) / "report.txt").string());
    report.write_jsonl((fs::path(args.out_dir) / "report.jsonl").string());

    RunManifest manifest;
    manifest.command = "eval";
    manifest.seed = args.projection_seed;
    manifest.inputs = {args.generated_dir, args.reference_dir};
    manifest.config["feature_dim"] = std::to_string(dim);
    manifest.config["window"] = std::to_string(args.window);
    manifest.config["pairs"] = std::to_string(report.pairs.size());
    manifest.stamp_start();
    manifest.stamp_finish();
    manifest.outputs = {"report.txt", "report.jsonl"};
    manifest.write((fs::path(args.out_dir) / "manifest.json").string());

    std::cout << report.table();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional volumetric diffusion engine"};
    app.require_subcommand(1);

    GenDataArgs gen_args;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic longitudinal dataset");
    gen->add_option("--out", gen_args.out_dir, "output directory")->required();
    gen->add_option("--spec", gen_args.spec_file, "phantom spec file (key = value)");
    gen->add_option("--subjects", gen_args.subjects, "number of subjects");
    gen->add_option("--visits", gen_args.visits, "visits per subject (>= 2)");
    gen->add_option("--seed", gen_args.seed, "generation seed");

    VerifyArgs verify_args;
    auto* verify = app.add_subcommand("verify", "run schedule and sampler diagnostics");
    verify->add_option("--steps", verify_args.steps, "schedule steps");
    verify->add_option("--beta-start", verify_args.beta_start, "first beta");
    verify->add_option("--beta-end", verify_args.beta_end, "last beta");
    verify->add_option("--csv", verify_args.csv_path, "write schedule diagnostics CSV");
    verify->add_option("--samples", verify_args.samples, "Monte Carlo sample count");
    verify->add_option("--seed", verify_args.seed, "Monte Carlo seed");

    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "train the conditional denoiser");
    tr->add_option("--data", train_args.data_dir, "dataset directory (with dataset.tsv)")
        ->required();
    tr->add_option("--out", train_args.out_dir, "output directory")->required();
    tr->add_option("--config", train_args.config_file, "training config file");
    tr->add_option("--iterations", train_args.iterations, "override iterations");
    tr->add_option("--lr", train_args.learning_rate, "override learning rate");
    tr->add_option("--seed", train_args.seed, "override rng seed");
    tr->add_option("--batch-size", train_args.batch_size, "override batch size");
    tr->add_option("--checkpoint-every", train_args.checkpoint_every,
                   "override checkpoint cadence");
    tr->add_option("--steps", train_args.schedule_steps, "schedule steps");
    tr->add_option("--beta-start", train_args.beta_start, "first beta");
    tr->add_option("--beta-end", train_args.beta_end, "last beta");
    tr->add_option("--base-channels", train_args.base_channels, "UNet base channels");
    tr->add_option("--multipliers", train_args.multipliers, "channel multipliers, csv");
    tr->add_option("--attention", train_args.attention, "attention levels, csv");
    tr->add_option("--time-embed", train_args.time_embed, "timestep embedding dim");
    tr->add_option("--delta-embed", train_args.delta_embed, "interval embedding dim");
    tr->add_option("--groups", train_args.norm_groups, "groupnorm groups");

    SampleArgs sample_args;
    auto* sa = app.add_subcommand("sample", "generate a follow-up volume from a source");
    sa->add_option("--checkpoint", sample_args.checkpoint, "trained checkpoint")->required();
    sa->add_option("--source", sample_args.source, "source volume (LVOL)")->required();
    sa->add_option("--delta", sample_args.delta, "interval in years")->required();
    sa->add_option("--seed", sample_args.seed, "sampling seed");
    sa->add_option("--out", sample_args.out, "output volume path")->required();
    sa->add_option("--slice", sample_args.slice, "also write a mid-slice PGM");
    sa->add_option("--trajectory-every", sample_args.trajectory_every,
                   "dump every k-th intermediate state");
    sa->add_option("--trajectory-dir", sample_args.trajectory_dir,
                   "directory for intermediate states");

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "compare generated volumes against references");
    ev->add_option("--generated", eval_args.generated_dir, "generated volumes")->required();
    ev->add_option("--reference", eval_args.reference_dir, "reference volumes")->required();
    ev->add_option("--out", eval_args.out_dir, "report directory")->required();
    ev->add_option("--feature-dim", eval_args.feature_dim, "projection feature dimension");
    ev->add_option("--projection-seed", eval_args.projection_seed, "projection seed");
    ev->add_option("--window", eval_args.window, "ssim window");

    std::string slice_volume, slice_out;
    auto* xs = app.add_subcommand("export-slice", "write the central axial slice as PGM");
    xs->add_option("--volume", slice_volume, "input volume")->required();
    xs->add_option("--out", slice_out, "output PGM path")->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return run_gen_data(gen_args);
        if (verify->parsed()) return run_verify(verify_args);
        if (tr->parsed()) return run_train(train_args);
        if (sa->parsed()) return run_sample(sample_args);
        if (ev->parsed()) return run_eval(eval_args);
        if (xs->parsed()) {
            write_mid_slice_pgm(slice_out, read_volume(slice_volume));
            RunManifest manifest;
            manifest.command = "export-slice";
            manifest.inputs = {slice_volume};
            manifest.outputs = {slice_out};
            manifest.stamp_start();
            manifest.stamp_finish();
            manifest.write(slice_out + ".manifest.json");
            return kExitOk;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitGeneric;
    }
    return kExitGeneric;
}
