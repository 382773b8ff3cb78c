#include "longdiff/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "longdiff/diffusion.hpp"
#include "longdiff/errors.hpp"
#include "longdiff/rng.hpp"

namespace longdiff {

void TrainConfig::validate() const {
    if (iterations < 0) throw config_error("iterations must be >= 0");
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw config_error("learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
        !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw config_error("adam betas must lie in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw config_error("adam_epsilon must be > 0");
    if (checkpoint_every < 1) throw config_error("checkpoint_every must be >= 1");
    if (loss_window < 1) throw config_error("loss_window must be >= 1");
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config: " + path);
    TrainConfig c;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        std::string eq, value;
        if (!(ss >> eq >> value) || eq != "=") {
            throw config_error(path + ":" + std::to_string(line_no) +
                               ": expected `key = value`");
        }
        try {
            if (key == "iterations") c.iterations = std::stoll(value);
            else if (key == "batch_size") c.batch_size = std::stoi(value);
            else if (key == "learning_rate") c.learning_rate = std::stod(value);
            else if (key == "adam_beta1") c.adam_beta1 = std::stod(value);
            else if (key == "adam_beta2") c.adam_beta2 = std::stod(value);
            else if (key == "adam_epsilon") c.adam_epsilon = std::stod(value);
            else if (key == "rng_seed") c.rng_seed = std::stoull(value);
            else if (key == "checkpoint_every") c.checkpoint_every = std::stoll(value);
            else if (key == "loss_window") c.loss_window = std::stoi(value);
            else throw config_error(path + ":" + std::to_string(line_no) +
                                    ": unknown key `" + key + "`");
        } catch (const std::invalid_argument&) {
            throw config_error(path + ":" + std::to_string(line_no) +
                               ": bad value for `" + key + "`");
        }
    }
    c.validate();
    return c;
}

void TrainConfig::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << "iterations = " << iterations << "\n"
        << "batch_size = " << batch_size << "\n"
        << "learning_rate = " << learning_rate << "\n"
        << "adam_beta1 = " << adam_beta1 << "\n"
        << "adam_beta2 = " << adam_beta2 << "\n"
        << "adam_epsilon = " << adam_epsilon << "\n"
        << "rng_seed = " << rng_seed << "\n"
        << "checkpoint_every = " << checkpoint_every << "\n"
        << "loss_window = " << loss_window << "\n";
}

AdamState AdamState::for_params(const std::vector<ParamRef>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const ParamRef& p : params) {
        s.m.push_back(Tensor(p.value->shape));
        s.v.push_back(Tensor(p.value->shape));
    }
    return s;
}

void adam_step(std::vector<ParamRef>& params, AdamState& state, const TrainConfig& config) {
    if (state.m.size() != params.size()) {
        throw std::invalid_argument("adam state does not match parameter list");
    }
    state.step += 1;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& value = *params[i].value;
        const Tensor& grad = *params[i].grad;
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t k = 0; k < value.data.size(); ++k) {
            const double g = grad.data[k];
            if (!std::isfinite(g)) {
                throw numerical_error("non-finite gradient in " + params[i].name);
            }
            m.data[k] = b1 * m.data[k] + (1.0 - b1) * g;
            v.data[k] = b2 * v.data[k] + (1.0 - b2) * g * g;
            const double m_hat = m.data[k] / bc1;
            const double v_hat = v.data[k] / bc2;
            value.data[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
        }
    }
}

double loss_simple(const NoiseSchedule& schedule, const Denoiser& denoiser,
                   const LongitudinalPair& pair, int t, const NoiseSample& eps) {
    require_same_shape(pair.target, eps, "loss_simple");
    require_same_shape(pair.target, pair.source, "loss_simple source");
    const Volume xt = forward_sample(schedule, pair.target, t, eps);
    const Volume pred = denoiser.predict_noise({xt, t, pair.source, pair.delta_years});
    require_same_shape(pred, eps, "loss_simple prediction");
    double sum = 0.0;
    for (std::size_t i = 0; i < eps.voxels.size(); ++i) {
        const double d = static_cast<double>(pred.voxels[i]) - eps.voxels[i];
        sum += d * d;
    }
    const double loss = sum / static_cast<double>(eps.voxels.size());
    if (!std::isfinite(loss)) {
        throw numerical_error("loss_simple: non-finite loss at t=" + std::to_string(t));
    }
    return loss;
}

namespace {

// Stateless per-iteration stream: resuming from a checkpoint replays the
// exact same draws a straight run would make.
Rng iteration_rng(std::uint64_t seed, std::int64_t iteration) {
    return Rng(splitmix64(seed ^ splitmix64(0x7261696eULL + static_cast<std::uint64_t>(iteration))));
}

void push_windowed(std::vector<double>& history, double loss, int window) {
    history.push_back(loss);
    if (history.size() > static_cast<std::size_t>(window)) {
        history.erase(history.begin());
    }
}

}  // namespace

void train_steps(const NoiseSchedule& schedule, const TrainConfig& config,
                 const std::vector<LongitudinalPair>& dataset, TrainState& state,
                 std::int64_t steps, const TrainCallbacks& callbacks) {
    if (dataset.empty()) throw data_error("training dataset is empty");
    config.validate();

    ConditionalUNet& net = *state.net;
    auto params = net.parameters();
    const auto t0 = std::chrono::steady_clock::now();

    for (std::int64_t s = 0; s < steps; ++s) {
        Rng rng = iteration_rng(config.rng_seed, state.iteration);
        net.zero_grad();

        double batch_loss = 0.0;
        for (int b = 0; b < config.batch_size; ++b) {
            const std::size_t pair_index = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(dataset.size()) - 1));
            const auto& pair = dataset[pair_index];
            const int t = static_cast<int>(rng.uniform_int(1, schedule.steps()));
            if (callbacks.on_draw) callbacks.on_draw(state.iteration, pair_index, t);

            NoiseSample eps = Volume::zeros(pair.target.shape);
            for (float& v : eps.voxels) v = static_cast<float>(rng.normal());

            const Volume xt = forward_sample(schedule, pair.target, t, eps);
            const Tensor pred =
                net.forward(volume_to_tensor(xt), volume_to_tensor(pair.source),
                            static_cast<double>(t), pair.delta_years);

            const std::int64_t n = pred.size();
            double sum = 0.0;
            Tensor gout(pred.shape);
            const double inv = 1.0 / static_cast<double>(n);
            for (std::int64_t i = 0; i < n; ++i) {
                const double d = pred.data[static_cast<std::size_t>(i)] -
                                 static_cast<double>(eps.voxels[static_cast<std::size_t>(i)]);
                sum += d * d;
                gout.data[static_cast<std::size_t>(i)] =
                    2.0 * d * inv / static_cast<double>(config.batch_size);
            }
            const double loss = sum * inv;
            if (!std::isfinite(loss)) {
                throw numerical_error("training loss non-finite at iteration " +
                                      std::to_string(state.iteration));
            }
            batch_loss += loss / static_cast<double>(config.batch_size);
            net.backward(gout);
        }

        adam_step(params, state.adam, config);
        state.iteration += 1;
        push_windowed(state.loss_history, batch_loss, config.loss_window);

        if (callbacks.on_step) {
            const double wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            callbacks.on_step(state.iteration, batch_loss, wall_ms);
        }
        if (callbacks.on_checkpoint && state.iteration % config.checkpoint_every == 0) {
            callbacks.on_checkpoint(state.iteration, state);
        }
    }
}

TrainState train(const NoiseSchedule& schedule, const UNetConfig& net_config,
                 const TrainConfig& config, const std::vector<LongitudinalPair>& dataset,
                 const TrainCallbacks& callbacks) {
    if (dataset.empty()) throw data_error("training dataset is empty");
    net_config.validate(dataset.front().target.shape);

    TrainState state;
    state.net = std::make_shared<ConditionalUNet>(net_config);
    state.net->init_params(config.rng_seed);
    state.adam = AdamState::for_params(state.net->parameters());
    train_steps(schedule, config, dataset, state, config.iterations, callbacks);
    return state;
}

Checkpoint make_checkpoint(TrainState& state, const NoiseSchedule& schedule) {
    Checkpoint ckpt;
    ckpt.meta.config = state.net->config();
    ckpt.meta.schedule_steps = schedule.steps();
    ckpt.meta.beta_start = schedule.beta().front();
    ckpt.meta.beta_end = schedule.beta().back();
    ckpt.meta.iteration = state.iteration;

    for (const ParamRef& p : state.net->parameters()) {
        ckpt.add("param." + p.name, *p.value);
    }
    const auto params = state.net->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        ckpt.add("adam.m." + params[i].name, state.adam.m[i]);
        ckpt.add("adam.v." + params[i].name, state.adam.v[i]);
    }
    if (!state.loss_history.empty()) {
        Tensor h({static_cast<int>(state.loss_history.size())});
        h.data = state.loss_history;
        ckpt.add("train.loss_history", h);
    }
    return ckpt;
}

TrainState restore_train_state(const Checkpoint& ckpt) {
    TrainState state;
    state.net = std::make_shared<ConditionalUNet>(ckpt.meta.config);
    state.net->init_params(0);
    state.iteration = ckpt.meta.iteration;

    auto params = state.net->parameters();
    state.adam = AdamState::for_params(params);
    state.adam.step = ckpt.meta.iteration;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& value = ckpt.get("param." + params[i].name);
        if (value.shape != params[i].value->shape) {
            throw data_error("checkpoint shape mismatch for " + params[i].name);
        }
        *params[i].value = value;
        if (ckpt.has("adam.m." + params[i].name)) {
            state.adam.m[i] = ckpt.get("adam.m." + params[i].name);
            state.adam.v[i] = ckpt.get("adam.v." + params[i].name);
        }
    }
    if (ckpt.has("train.loss_history")) {
        state.loss_history = ckpt.get("train.loss_history").data;
    }
    return state;
}

}  // namespace longdiff
