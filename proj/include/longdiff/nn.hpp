#pragma once

#include <string>
#include <vector>

#include "longdiff/rng.hpp"
#include "longdiff/tensor.hpp"

namespace longdiff {
namespace nn {

// Layers cache whatever their backward pass needs during forward, so the
// calling order must be forward-then-backward per step. Parameter gradients
// accumulate until zero_grad.

Tensor silu(const Tensor& x);
Tensor silu_backward(const Tensor& x, const Tensor& gout);

// Sinusoidal embedding of a continuous scalar (timestep or interval):
// first half sines, second half cosines, frequencies log-spaced from 1 down
// to 1/10000.
Tensor sinusoidal_embedding(double value, int dim);

// 3D convolution, odd kernel, zero padding k/2, stride 1 (shape preserving)
// or 2 (halves each spatial dim, which must be even).
class Conv3d {
public:
    Conv3d(std::string name, int in_ch, int out_ch, int kernel, int stride = 1);

    Tensor forward(const Tensor& x);
    // Returns the input gradient; accumulates weight/bias gradients.
    Tensor backward(const Tensor& gout);

    void init(Rng& rng);       // N(0, 1/fan_in)
    void init_zero();
    void collect(std::vector<ParamRef>& out);

    Tensor weight;  // (out_ch, in_ch * k^3)
    Tensor bias;    // (out_ch)
    Tensor gweight, gbias;

    int in_ch() const { return in_ch_; }
    int out_ch() const { return out_ch_; }

private:
    std::string name_;
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Tensor cached_input_;
};

// Fully connected layer on flat vectors.
class Linear {
public:
    Linear(std::string name, int in_dim, int out_dim);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gout);

    void init(Rng& rng);
    void collect(std::vector<ParamRef>& out);

    Tensor weight;  // (out_dim, in_dim)
    Tensor bias;    // (out_dim)
    Tensor gweight, gbias;

private:
    std::string name_;
    int in_dim_, out_dim_;
    Tensor cached_input_;
};

// Group normalization over (channels/groups, spatial) blocks with per-channel
// affine parameters.
class GroupNorm {
public:
    GroupNorm(std::string name, int channels, int groups, double eps = 1e-5);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gout);

    void init();  // scale 1, shift 0
    void collect(std::vector<ParamRef>& out);

    Tensor gamma, beta;
    Tensor ggamma, gbeta;

private:
    std::string name_;
    int channels_, groups_;
    double eps_;
    Tensor cached_xhat_;
    std::vector<double> cached_inv_std_;
    int cached_spatial_ = 0;
};

// Single-head self-attention over flattened spatial positions, with a
// leading group norm and a residual connection.
class SelfAttention {
public:
    SelfAttention(std::string name, int channels, int norm_groups);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gout);

    void init(Rng& rng);
    void collect(std::vector<ParamRef>& out);

private:
    std::string name_;
    int channels_;
    GroupNorm norm_;
    Linear q_, k_, v_, proj_;  // 1x1 projections applied per position
    Tensor cached_h_, cached_q_, cached_k_, cached_v_, cached_attn_, cached_o_;
    std::vector<int> cached_shape_;
};

// Nearest-neighbor 2x upsampling; backward sums the 2x2x2 fan-out.
Tensor upsample_nearest2x(const Tensor& x);
Tensor upsample_nearest2x_backward(const Tensor& gout);

// Channel concatenation and its split for skip connections.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& gout, int a_channels, Tensor& ga, Tensor& gb);

// Residual block: norm-silu-conv twice, a per-channel bias projected from the
// timestep embedding between the convs, and an identity or 1x1 shortcut.
class ResBlock {
public:
    ResBlock(std::string name, int in_ch, int out_ch, int time_embed_dim,
             int norm_groups);

    Tensor forward(const Tensor& x, const Tensor& time_embed);
    Tensor backward(const Tensor& gout);

    void init(Rng& rng);
    void collect(std::vector<ParamRef>& out);

private:
    std::string name_;
    int in_ch_, out_ch_;
    GroupNorm norm1_, norm2_;
    Conv3d conv1_, conv2_;
    Linear time_proj_;
    bool has_skip_conv_;
    Conv3d skip_conv_;  // used only when in_ch != out_ch
    Tensor cached_x_, cached_n1_, cached_temb_, cached_silu_temb_, cached_h3_, cached_n2_;
};

}  // namespace nn
}  // namespace longdiff
