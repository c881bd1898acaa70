#pragma once

#include <string>
#include <vector>

#include "mixergan/rng.hpp"
#include "mixergan/tensor.hpp"

namespace mixergan {

struct ConvLayer {
    Tensor w, b;
};

struct LinearLayer {
    Tensor w, b;  // w is [in, out]
};

struct LayerNormParams {
    Tensor gamma, beta;
};

struct MixerBlockParams {
    int64_t tokens = 0, channels = 0;
    LayerNormParams ln_token, ln_chan;
    LinearLayer token_fc1, token_fc2;  // [n, e_t*n], [e_t*n, n]
    LinearLayer chan_fc1, chan_fc2;    // [c, e_c*c], [e_c*c, c]

    int64_t token_param_count() const;
    int64_t channel_param_count() const;
    void collect(std::vector<Tensor>& out) const;
};

MixerBlockParams make_mixer_block(int64_t n, int64_t c, int64_t token_expansion,
                                  int64_t channel_expansion, Rng& rng,
                                  const std::string& prefix);

// Token-mixing MLP alone: acts along the token axis independently per channel.
// No normalization, no residual; used by the block and by structural tests.
Tensor token_mix_mlp(const Tensor& x, const MixerBlockParams& p);
// Channel-mixing MLP alone: acts along the channel axis independently per token.
Tensor channel_mix_mlp(const Tensor& x, const MixerBlockParams& p);

// Pre-norm token-mixing sublayer with residual: x + MLP(LN(x)) along tokens.
Tensor token_mixing(const Tensor& x, const MixerBlockParams& p, double eps);
Tensor channel_mixing(const Tensor& x, const MixerBlockParams& p, double eps);

// Full isotropic block on [b, n, c].
Tensor mixer_block(const Tensor& x, const MixerBlockParams& p, double eps,
                   bool token_first = true);

struct GeneratorGeometry {
    int64_t image_size = 32;
    int64_t patch_size = 2;
    int64_t d_token = 64;        // latent channel width of the mixer stack
    int64_t base_channels = 8;   // stem width; doubled by each downsampling conv
    int64_t mixer_blocks = 9;
    int64_t token_expansion = 2;
    int64_t channel_expansion = 2;
    bool token_first = true;
    double layernorm_eps = 1e-5;
    double instance_norm_eps = 1e-5;

    int64_t feat_channels() const { return base_channels * 4; }
    int64_t feat_size() const { return image_size / 4; }
    int64_t grid() const { return feat_size() / patch_size; }
    int64_t tokens() const { return grid() * grid(); }
};

struct GeneratorParams {
    GeneratorGeometry geom;
    ConvLayer stem, down1, down2;
    LinearLayer proj_in, proj_out;
    std::vector<MixerBlockParams> blocks;
    ConvLayer up1, up2, final_conv;

    std::vector<Tensor> parameters() const;
};

GeneratorParams make_generator(const GeneratorGeometry& geom, Rng& rng,
                               const std::string& prefix);

// Partition a feature map into p x p patches and linearly project each to a
// d_token vector: [b, c, H, W] -> [b, n, d_token].
Tensor patch_project(const Tensor& feat, const LinearLayer& proj, int64_t p);
// Inverse map back to the spatial grid: [b, n, d_token] -> [b, c, H, W].
Tensor patch_unproject(const Tensor& tokens, const LinearLayer& proj, int64_t b, int64_t c,
                       int64_t H, int64_t W, int64_t p);

Tensor generator_forward(const Tensor& x, const GeneratorParams& g);

struct DiscriminatorParams {
    int64_t base_channels = 64;
    double instance_norm_eps = 1e-5;
    ConvLayer c1, c2, c3, c4, head;

    std::vector<Tensor> parameters() const;
};

DiscriminatorParams make_discriminator(int64_t base_channels, double instance_norm_eps, Rng& rng,
                                       const std::string& prefix);

// Patch score map size after the stack (strides 2,2,2,1 and a stride-1 head,
// all 4x4 kernels with pad 1). Throws if the input is too small.
int64_t discriminator_map_size(int64_t image_size);

Tensor discriminator_forward(const Tensor& x, const DiscriminatorParams& d);

}  // namespace mixergan
