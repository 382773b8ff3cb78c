#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "longdiff/checkpoint.hpp"
#include "longdiff/data.hpp"
#include "longdiff/denoiser.hpp"
#include "longdiff/schedule.hpp"
#include "longdiff/tensor.hpp"
#include "longdiff/unet.hpp"

namespace longdiff {

struct TrainConfig {
    std::int64_t iterations = 300000;  // reference default; desk-scale runs override
    int batch_size = 1;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t rng_seed = 0;
    std::int64_t checkpoint_every = 1000;
    int loss_window = 100;

    void validate() const;

    // Plain key=value text, one per line, '#' comments.
    static TrainConfig from_file(const std::string& path);
    void write_file(const std::string& path) const;
};

// First/second moment buffers matching a parameter list, plus the step count
// driving bias correction.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t step = 0;

    static AdamState for_params(const std::vector<ParamRef>& params);
};

// One bias-corrected update over every parameter; gradients are read from
// the refs. Throws numerical_error naming the parameter if a gradient is
// non-finite.
void adam_step(std::vector<ParamRef>& params, AdamState& state, const TrainConfig& config);

// Noise-prediction training objective: noise the target volume to step t with
// eps, ask the denoiser for its estimate given (source, delta), return the
// mean squared error against eps.
double loss_simple(const NoiseSchedule& schedule, const Denoiser& denoiser,
                   const LongitudinalPair& pair, int t, const NoiseSample& eps);

struct TrainState {
    std::shared_ptr<ConditionalUNet> net;
    AdamState adam;
    std::int64_t iteration = 0;
    std::vector<double> loss_history;  // windowed tail, loss_window entries max
};

struct TrainCallbacks {
    // (iteration, loss, wall_ms)
    std::function<void(std::int64_t, double, double)> on_step;
    std::function<void(std::int64_t, TrainState&)> on_checkpoint;
    // (iteration, pair index, timestep) for every sample drawn
    std::function<void(std::int64_t, std::size_t, int)> on_draw;
};

// Seeded training loop: per iteration draw a pair uniformly, a timestep
// uniform in [1, T] and a noise field, then one loss/backward/update cycle.
// Fully deterministic given config.rng_seed.
TrainState train(const NoiseSchedule& schedule, const UNetConfig& net_config,
                 const TrainConfig& config, const std::vector<LongitudinalPair>& dataset,
                 const TrainCallbacks& callbacks = {});

// Continue a loop from an existing state (used by `train` internally; exposed
// for tests that inspect intermediate states).
void train_steps(const NoiseSchedule& schedule, const TrainConfig& config,
                 const std::vector<LongitudinalPair>& dataset, TrainState& state,
                 std::int64_t steps, const TrainCallbacks& callbacks = {});

// Checkpoint bridging: parameters (+ optimizer moments when present).
Checkpoint make_checkpoint(TrainState& state, const NoiseSchedule& schedule);
TrainState restore_train_state(const Checkpoint& ckpt);

}  // namespace longdiff
