#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "longdiff/denoiser.hpp"
#include "longdiff/nn.hpp"
#include "longdiff/tensor.hpp"
#include "longdiff/volume.hpp"

namespace longdiff {

struct UNetConfig {
    int base_channels = 16;
    std::vector<int> channel_multipliers = {1, 2};  // one entry per level
    std::set<int> attention_levels = {1};           // level indices, 0 = full res
    int time_embed_dim = 64;
    int delta_embed_dim = 16;
    int norm_groups = 8;

    int levels() const { return static_cast<int>(channel_multipliers.size()); }
    int channels_at(int level) const {
        return base_channels * channel_multipliers[static_cast<std::size_t>(level)];
    }
    // Throws config_error when the config is malformed or the shape cannot be
    // downsampled levels-1 times.
    void validate(Shape3 input_shape) const;
};

// Conditional noise-prediction network. The noisy state and the source volume
// enter through separate conv stems, the interval through a sinusoidal
// embedding projected to a per-channel bias; the three are summed and passed
// through a UNet whose residual blocks all receive the timestep embedding.
// Skip tensors from each encoder level are concatenated into the decoder at
// the matching resolution.
class ConditionalUNet {
public:
    explicit ConditionalUNet(const UNetConfig& config);

    // zero_final_conv makes the initial noise prediction exactly zero, which
    // is how training runs start; tests that need every path live from the
    // first call disable it.
    void init_params(std::uint64_t seed, bool zero_final_conv = true);

    Tensor forward(const Tensor& xt, const Tensor& source, double t_value,
                   double delta_years);
    // Gradient of the loss with respect to xt; parameter gradients accumulate
    // into the refs returned by parameters().
    Tensor backward(const Tensor& gout);

    void zero_grad();
    std::vector<ParamRef> parameters();
    std::int64_t parameter_count();
    const UNetConfig& config() const { return config_; }

    // Conditioning stems, exposed so the additive fusion is testable:
    // fused_stem == stem_state + stem_source + delta_bias (broadcast).
    Tensor stem_state(const Tensor& xt);
    Tensor stem_source(const Tensor& source);
    Tensor delta_bias(double delta_years);  // (base_channels) per-channel bias
    Tensor fused_stem(const Tensor& xt, const Tensor& source, double delta_years);

private:
    UNetConfig config_;

    nn::Conv3d stem_x_, stem_s_;
    nn::Linear delta_proj_;
    std::vector<std::unique_ptr<nn::Conv3d>> down_;      // level i>0, stride 2
    std::vector<std::unique_ptr<nn::ResBlock>> enc_;
    std::vector<std::unique_ptr<nn::SelfAttention>> enc_attn_;  // null when unused
    std::unique_ptr<nn::ResBlock> mid_;
    std::vector<std::unique_ptr<nn::ResBlock>> dec_;
    std::vector<std::unique_ptr<nn::SelfAttention>> dec_attn_;
    std::vector<std::unique_ptr<nn::Conv3d>> up_;        // level i>0, after 2x upsample
    nn::GroupNorm out_norm_;
    nn::Conv3d out_conv_;

    // forward caches for the hand-wired backward
    std::vector<Tensor> skip_grads_;
    std::vector<int> skip_channels_;
    Tensor cached_out_pre_silu_;
    Tensor cached_fused_shape_probe_;
};

// Adapter satisfying the Denoiser contract with a network and its parameters.
class UNetDenoiser : public Denoiser {
public:
    explicit UNetDenoiser(std::shared_ptr<ConditionalUNet> net) : net_(std::move(net)) {}
    Volume predict_noise(const DenoiserInput& in) const override;

    ConditionalUNet& net() { return *net_; }
    const ConditionalUNet& net() const { return *net_; }

private:
    std::shared_ptr<ConditionalUNet> net_;
};

Tensor volume_to_tensor(const Volume& v);
Volume tensor_to_volume(const Tensor& t, const Volume& like);

}  // namespace longdiff
