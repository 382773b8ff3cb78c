#include "longdiff/unet.hpp"

#include <stdexcept>

#include "longdiff/errors.hpp"

namespace longdiff {

void UNetConfig::validate(Shape3 input_shape) const {
    if (base_channels < 1) throw config_error("base_channels must be positive");
    if (channel_multipliers.size() < 2) throw config_error("need at least 2 levels");
    for (int m : channel_multipliers) {
        if (m < 1) throw config_error("channel multipliers must be positive");
    }
    if (time_embed_dim < 2 || time_embed_dim % 2) {
        throw config_error("time_embed_dim must be even and >= 2");
    }
    if (delta_embed_dim < 2 || delta_embed_dim % 2) {
        throw config_error("delta_embed_dim must be even and >= 2");
    }
    for (int i = 0; i < levels(); ++i) {
        if (channels_at(i) % norm_groups != 0) {
            throw config_error("channels at level " + std::to_string(i) +
                               " not divisible by norm_groups");
        }
    }
    const int factor = 1 << (levels() - 1);
    if (input_shape.depth % factor || input_shape.height % factor ||
        input_shape.width % factor) {
        throw config_error("input shape " + input_shape.str() + " not divisible by " +
                           std::to_string(factor));
    }
    for (int level : attention_levels) {
        if (level < 0 || level >= levels()) {
            throw config_error("attention level " + std::to_string(level) +
                               " outside [0, " + std::to_string(levels() - 1) + "]");
        }
    }
}

ConditionalUNet::ConditionalUNet(const UNetConfig& config)
    : config_(config),
      stem_x_("stem.state", 1, config.base_channels, 3),
      stem_s_("stem.source", 1, config.base_channels, 3),
      delta_proj_("stem.delta", config.delta_embed_dim, config.base_channels),
      out_norm_("out.norm", config.channels_at(0), config.norm_groups),
      out_conv_("out.conv", config.channels_at(0), 1, 3) {
    const int L = config.levels();
    down_.resize(L);
    enc_.resize(L);
    enc_attn_.resize(L);
    dec_.resize(L);
    dec_attn_.resize(L);
    up_.resize(L);
    skip_channels_.assign(L, 0);

    for (int i = 0; i < L; ++i) {
        const int in_ch = (i == 0) ? config.base_channels : config.channels_at(i - 1);
        const int out_ch = config.channels_at(i);
        if (i > 0) {
            down_[i] = std::make_unique<nn::Conv3d>("down" + std::to_string(i), in_ch,
                                                    in_ch, 3, 2);
        }
        enc_[i] = std::make_unique<nn::ResBlock>("enc" + std::to_string(i), in_ch, out_ch,
                                                 config.time_embed_dim, config.norm_groups);
        dec_[i] = std::make_unique<nn::ResBlock>("dec" + std::to_string(i), 2 * out_ch,
                                                 out_ch, config.time_embed_dim,
                                                 config.norm_groups);
        if (config.attention_levels.count(i)) {
            enc_attn_[i] = std::make_unique<nn::SelfAttention>("enc" + std::to_string(i) +
                                                               ".attn", out_ch,
                                                               config.norm_groups);
            dec_attn_[i] = std::make_unique<nn::SelfAttention>("dec" + std::to_string(i) +
                                                               ".attn", out_ch,
                                                               config.norm_groups);
        }
        if (i > 0) {
            up_[i] = std::make_unique<nn::Conv3d>("up" + std::to_string(i),
                                                  config.channels_at(i),
                                                  config.channels_at(i - 1), 3);
        }
        skip_channels_[i] = out_ch;
    }
    const int last = config.channels_at(L - 1);
    mid_ = std::make_unique<nn::ResBlock>("mid", last, last, config.time_embed_dim,
                                          config.norm_groups);
}

void ConditionalUNet::init_params(std::uint64_t seed, bool zero_final_conv) {
    Rng rng(splitmix64(seed));
    stem_x_.init(rng);
    stem_s_.init(rng);
    delta_proj_.init(rng);
    for (int i = 0; i < config_.levels(); ++i) {
        if (down_[i]) down_[i]->init(rng);
        enc_[i]->init(rng);
        if (enc_attn_[i]) enc_attn_[i]->init(rng);
    }
    mid_->init(rng);
    for (int i = config_.levels() - 1; i >= 0; --i) {
        dec_[i]->init(rng);
        if (dec_attn_[i]) dec_attn_[i]->init(rng);
        if (up_[i]) up_[i]->init(rng);
    }
    out_norm_.init();
    if (zero_final_conv) {
        out_conv_.init_zero();
    } else {
        out_conv_.init(rng);
    }
}

std::vector<ParamRef> ConditionalUNet::parameters() {
    std::vector<ParamRef> refs;
    stem_x_.collect(refs);
    stem_s_.collect(refs);
    delta_proj_.collect(refs);
    for (int i = 0; i < config_.levels(); ++i) {
        if (down_[i]) down_[i]->collect(refs);
        enc_[i]->collect(refs);
        if (enc_attn_[i]) enc_attn_[i]->collect(refs);
    }
    mid_->collect(refs);
    for (int i = config_.levels() - 1; i >= 0; --i) {
        dec_[i]->collect(refs);
        if (dec_attn_[i]) dec_attn_[i]->collect(refs);
        if (up_[i]) up_[i]->collect(refs);
    }
    out_norm_.collect(refs);
    out_conv_.collect(refs);
    return refs;
}

std::int64_t ConditionalUNet::parameter_count() {
    std::int64_t n = 0;
    for (const ParamRef& p : parameters()) n += p.value->size();
    return n;
}

void ConditionalUNet::zero_grad() {
    for (ParamRef& p : parameters()) {
        std::fill(p.grad->data.begin(), p.grad->data.end(), 0.0);
    }
}

Tensor ConditionalUNet::stem_state(const Tensor& xt) { return stem_x_.forward(xt); }

Tensor ConditionalUNet::stem_source(const Tensor& source) { return stem_s_.forward(source); }

Tensor ConditionalUNet::delta_bias(double delta_years) {
    return delta_proj_.forward(nn::sinusoidal_embedding(delta_years, config_.delta_embed_dim));
}

Tensor ConditionalUNet::fused_stem(const Tensor& xt, const Tensor& source,
                                   double delta_years) {
    Tensor h = stem_state(xt);
    const Tensor hs = stem_source(source);
    const Tensor pd = delta_bias(delta_years);
    const std::int64_t spatial = h.size() / config_.base_channels;
    for (int c = 0; c < config_.base_channels; ++c) {
        double* hc = h.ptr() + c * spatial;
        const double* sc = hs.ptr() + c * spatial;
        for (std::int64_t i = 0; i < spatial; ++i) hc[i] += sc[i] + pd.data[c];
    }
    return h;
}

Tensor ConditionalUNet::forward(const Tensor& xt, const Tensor& source, double t_value,
                                double delta_years) {
    if (!xt.same_shape(source)) {
        throw std::invalid_argument("state and source shapes differ: " + xt.shape_str() +
                                    " vs " + source.shape_str());
    }
    const Tensor temb = nn::sinusoidal_embedding(t_value, config_.time_embed_dim);
    const int L = config_.levels();

    Tensor h = fused_stem(xt, source, delta_years);

    std::vector<Tensor> skips(L);
    for (int i = 0; i < L; ++i) {
        if (i > 0) h = down_[i]->forward(h);
        h = enc_[i]->forward(h, temb);
        if (enc_attn_[i]) h = enc_attn_[i]->forward(h);
        skips[i] = h;
    }

    h = mid_->forward(h, temb);

    for (int i = L - 1; i >= 0; --i) {
        h = nn::concat_channels(h, skips[i]);
        h = dec_[i]->forward(h, temb);
        if (dec_attn_[i]) h = dec_attn_[i]->forward(h);
        if (i > 0) h = up_[i]->forward(nn::upsample_nearest2x(h));
    }

    cached_out_pre_silu_ = out_norm_.forward(h);
    return out_conv_.forward(nn::silu(cached_out_pre_silu_));
}

Tensor ConditionalUNet::backward(const Tensor& gout) {
    const int L = config_.levels();

    Tensor g = out_conv_.backward(gout);
    g = out_norm_.backward(nn::silu_backward(cached_out_pre_silu_, g));

    // Decoder, unwound in reverse level order (0 .. L-1).
    skip_grads_.assign(L, Tensor());
    for (int i = 0; i < L; ++i) {
        if (i > 0) g = nn::upsample_nearest2x_backward(up_[i]->backward(g));
        if (dec_attn_[i]) g = dec_attn_[i]->backward(g);
        g = dec_[i]->backward(g);
        Tensor gh, gskip;
        nn::split_channels(g, skip_channels_[i], gh, gskip);
        skip_grads_[i] = std::move(gskip);
        g = std::move(gh);
    }

    g = mid_->backward(g);

    for (int i = L - 1; i >= 0; --i) {
        for (std::int64_t k = 0; k < g.size(); ++k) g.data[k] += skip_grads_[i].data[k];
        if (enc_attn_[i]) g = enc_attn_[i]->backward(g);
        g = enc_[i]->backward(g);
        if (i > 0) g = down_[i]->backward(g);
    }

    // Fused stem: the gradient feeds both conv stems unchanged and the delta
    // projection through per-channel sums.
    const std::int64_t spatial = g.size() / config_.base_channels;
    Tensor gpd({config_.base_channels});
    for (int c = 0; c < config_.base_channels; ++c) {
        const double* gc = g.ptr() + c * spatial;
        double s = 0.0;
        for (std::int64_t i = 0; i < spatial; ++i) s += gc[i];
        gpd.data[c] = s;
    }
    delta_proj_.backward(gpd);
    stem_s_.backward(g);
    return stem_x_.backward(g);
}

// --- volume bridging ---------------------------------------------------------

Tensor volume_to_tensor(const Volume& v) {
    Tensor t({1, static_cast<int>(v.shape.depth), static_cast<int>(v.shape.height),
              static_cast<int>(v.shape.width)});
    for (std::size_t i = 0; i < v.voxels.size(); ++i) t.data[i] = v.voxels[i];
    return t;
}

Volume tensor_to_volume(const Tensor& t, const Volume& like) {
    Volume v = Volume::zeros(like.shape);
    v.spacing = like.spacing;
    for (std::size_t i = 0; i < v.voxels.size(); ++i) {
        v.voxels[i] = static_cast<float>(t.data[i]);
    }
    return v;
}

Volume UNetDenoiser::predict_noise(const DenoiserInput& in) const {
    Tensor out = net_->forward(volume_to_tensor(in.xt), volume_to_tensor(in.source),
                               static_cast<double>(in.t), in.delta_years);
    if (!out.all_finite()) {
        throw numerical_error("denoiser produced non-finite output at t=" +
                              std::to_string(in.t));
    }
    return tensor_to_volume(out, in.xt);
}

}  // namespace longdiff
