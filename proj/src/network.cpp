#include "mixergan/network.hpp"

namespace mixergan {

namespace {

Tensor init_conv_w(const Shape& s, Rng& rng, const std::string& name) {
    std::vector<double> d(numel_of(s));
    for (auto& v : d) v = rng.truncated_normal(0.0, 0.02);
    return Tensor::param(s, std::move(d), name);
}

Tensor init_linear_w(int64_t in, int64_t out, Rng& rng, const std::string& name) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> d(in * out);
    for (auto& v : d) v = rng.uniform(-bound, bound);
    return Tensor::param({in, out}, std::move(d), name);
}

Tensor zeros_param(const Shape& s, const std::string& name) {
    return Tensor::param(s, std::vector<double>(numel_of(s), 0.0), name);
}

ConvLayer make_conv(int64_t co, int64_t ci, int64_t k, Rng& rng, const std::string& name) {
    return {init_conv_w({co, ci, k, k}, rng, name + ".w"), zeros_param({co}, name + ".b")};
}

// Transposed-conv weight layout is [ci, co, k, k].
ConvLayer make_conv_t(int64_t ci, int64_t co, int64_t k, Rng& rng, const std::string& name) {
    return {init_conv_w({ci, co, k, k}, rng, name + ".w"), zeros_param({co}, name + ".b")};
}

LinearLayer make_linear(int64_t in, int64_t out, Rng& rng, const std::string& name) {
    return {init_linear_w(in, out, rng, name + ".w"), zeros_param({out}, name + ".b")};
}

LayerNormParams make_ln(int64_t c, const std::string& name) {
    return {Tensor::param({c}, std::vector<double>(c, 1.0), name + ".gamma"),
            zeros_param({c}, name + ".beta")};
}

void collect_conv(const ConvLayer& l, std::vector<Tensor>& out) {
    out.push_back(l.w);
    out.push_back(l.b);
}

void collect_linear(const LinearLayer& l, std::vector<Tensor>& out) {
    out.push_back(l.w);
    out.push_back(l.b);
}

}  // namespace

int64_t MixerBlockParams::token_param_count() const {
    return token_fc1.w.numel() + token_fc1.b.numel() + token_fc2.w.numel() + token_fc2.b.numel();
}

int64_t MixerBlockParams::channel_param_count() const {
    return chan_fc1.w.numel() + chan_fc1.b.numel() + chan_fc2.w.numel() + chan_fc2.b.numel();
}

void MixerBlockParams::collect(std::vector<Tensor>& out) const {
    out.push_back(ln_token.gamma);
    out.push_back(ln_token.beta);
    collect_linear(token_fc1, out);
    collect_linear(token_fc2, out);
    out.push_back(ln_chan.gamma);
    out.push_back(ln_chan.beta);
    collect_linear(chan_fc1, out);
    collect_linear(chan_fc2, out);
}

MixerBlockParams make_mixer_block(int64_t n, int64_t c, int64_t token_expansion,
                                  int64_t channel_expansion, Rng& rng,
                                  const std::string& prefix) {
    MixerBlockParams p;
    p.tokens = n;
    p.channels = c;
    p.ln_token = make_ln(c, prefix + ".ln_token");
    p.token_fc1 = make_linear(n, token_expansion * n, rng, prefix + ".token_fc1");
    p.token_fc2 = make_linear(token_expansion * n, n, rng, prefix + ".token_fc2");
    p.ln_chan = make_ln(c, prefix + ".ln_chan");
    p.chan_fc1 = make_linear(c, channel_expansion * c, rng, prefix + ".chan_fc1");
    p.chan_fc2 = make_linear(channel_expansion * c, c, rng, prefix + ".chan_fc2");
    return p;
}

namespace {

void check_block_input(const Tensor& x, const MixerBlockParams& p, const char* who) {
    if (x.shape().size() != 3 || x.dim(1) != p.tokens || x.dim(2) != p.channels)
        throw DimensionError(std::string(who) + ": input " + shape_str(x.shape()) +
                             " does not match block extents n=" + std::to_string(p.tokens) +
                             " c=" + std::to_string(p.channels));
}

}  // namespace

Tensor token_mix_mlp(const Tensor& x, const MixerBlockParams& p) {
    check_block_input(x, p, "token_mix_mlp");
    int64_t b = x.dim(0), n = x.dim(1), c = x.dim(2);
    Tensor t = reshape(transpose_last2(x), {b * c, n});
    t = linear(t, p.token_fc1.w, p.token_fc1.b);
    t = gelu(t);
    t = linear(t, p.token_fc2.w, p.token_fc2.b);
    return transpose_last2(reshape(t, {b, c, n}));
}

Tensor channel_mix_mlp(const Tensor& x, const MixerBlockParams& p) {
    check_block_input(x, p, "channel_mix_mlp");
    int64_t b = x.dim(0), n = x.dim(1), c = x.dim(2);
    Tensor t = reshape(x, {b * n, c});
    t = linear(t, p.chan_fc1.w, p.chan_fc1.b);
    t = gelu(t);
    t = linear(t, p.chan_fc2.w, p.chan_fc2.b);
    return reshape(t, {b, n, c});
}

Tensor token_mixing(const Tensor& x, const MixerBlockParams& p, double eps) {
    check_block_input(x, p, "token_mixing");
    int64_t b = x.dim(0), n = x.dim(1), c = x.dim(2);
    Tensor normed = reshape(layernorm(reshape(x, {b * n, c}), p.ln_token.gamma, p.ln_token.beta,
                                      eps),
                            {b, n, c});
    return add(x, token_mix_mlp(normed, p));
}

Tensor channel_mixing(const Tensor& x, const MixerBlockParams& p, double eps) {
    check_block_input(x, p, "channel_mixing");
    int64_t b = x.dim(0), n = x.dim(1), c = x.dim(2);
    Tensor normed = reshape(layernorm(reshape(x, {b * n, c}), p.ln_chan.gamma, p.ln_chan.beta,
                                      eps),
                            {b, n, c});
    return add(x, channel_mix_mlp(normed, p));
}

Tensor mixer_block(const Tensor& x, const MixerBlockParams& p, double eps, bool token_first) {
    if (token_first) return channel_mixing(token_mixing(x, p, eps), p, eps);
    return token_mixing(channel_mixing(x, p, eps), p, eps);
}

std::vector<Tensor> GeneratorParams::parameters() const {
    std::vector<Tensor> out;
    collect_conv(stem, out);
    collect_conv(down1, out);
    collect_conv(down2, out);
    collect_linear(proj_in, out);
    for (const auto& b : blocks) b.collect(out);
    collect_linear(proj_out, out);
    collect_conv(up1, out);
    collect_conv(up2, out);
    collect_conv(final_conv, out);
    return out;
}

GeneratorParams make_generator(const GeneratorGeometry& geom, Rng& rng,
                               const std::string& prefix) {
    if (geom.image_size % (4 * geom.patch_size) != 0)
        throw DimensionError("generator: image size " + std::to_string(geom.image_size) +
                             " must be divisible by 4*patch_size=" +
                             std::to_string(4 * geom.patch_size));
    GeneratorParams g;
    g.geom = geom;
    int64_t c0 = geom.base_channels;
    g.stem = make_conv(c0, 3, 7, rng, prefix + ".stem");
    g.down1 = make_conv(2 * c0, c0, 3, rng, prefix + ".down1");
    g.down2 = make_conv(4 * c0, 2 * c0, 3, rng, prefix + ".down2");
    int64_t plen = geom.patch_size * geom.patch_size * geom.feat_channels();
    g.proj_in = make_linear(plen, geom.d_token, rng, prefix + ".proj_in");
    for (int64_t i = 0; i < geom.mixer_blocks; ++i)
        g.blocks.push_back(make_mixer_block(geom.tokens(), geom.d_token, geom.token_expansion,
                                            geom.channel_expansion, rng,
                                            prefix + ".block" + std::to_string(i)));
    g.proj_out = make_linear(geom.d_token, plen, rng, prefix + ".proj_out");
    g.up1 = make_conv_t(4 * c0, 2 * c0, 3, rng, prefix + ".up1");
    g.up2 = make_conv_t(2 * c0, c0, 3, rng, prefix + ".up2");
    g.final_conv = make_conv(3, c0, 7, rng, prefix + ".final");
    return g;
}

Tensor patch_project(const Tensor& feat, const LinearLayer& proj, int64_t p) {
    int64_t b = feat.dim(0), H = feat.dim(2), W = feat.dim(3);
    int64_t n = (H / p) * (W / p);
    Tensor patches = extract_patches(feat, p);
    return reshape(linear(patches, proj.w, proj.b), {b, n, proj.w.dim(1)});
}

Tensor patch_unproject(const Tensor& tokens, const LinearLayer& proj, int64_t b, int64_t c,
                       int64_t H, int64_t W, int64_t p) {
    Tensor flat = reshape(tokens, {tokens.dim(0) * tokens.dim(1), tokens.dim(2)});
    return fold_patches(linear(flat, proj.w, proj.b), b, c, H, W, p);
}

Tensor generator_forward(const Tensor& x, const GeneratorParams& g) {
    if (x.shape().size() != 4 || x.dim(1) != 3)
        throw DimensionError("generator_forward: input must be [b,3,H,W], got " +
                             shape_str(x.shape()));
    int64_t H = x.dim(2), W = x.dim(3);
    int64_t q = 4 * g.geom.patch_size;
    if (H % q != 0 || W % q != 0 || H == 0 || W == 0)
        throw DimensionError("generator_forward: spatial extents " + shape_str(x.shape()) +
                             " must be divisible by 4*patch_size=" + std::to_string(q));
    const double ie = g.geom.instance_norm_eps;
    Tensor t = relu(instance_norm(conv2d(x, g.stem.w, g.stem.b, 1, 3), ie));
    t = relu(instance_norm(conv2d(t, g.down1.w, g.down1.b, 2, 1), ie));
    t = relu(instance_norm(conv2d(t, g.down2.w, g.down2.b, 2, 1), ie));

    int64_t b = x.dim(0), cf = g.geom.feat_channels(), Hf = H / 4, Wf = W / 4;
    Tensor tok = patch_project(t, g.proj_in, g.geom.patch_size);
    for (const auto& blk : g.blocks)
        tok = mixer_block(tok, blk, g.geom.layernorm_eps, g.geom.token_first);
    t = patch_unproject(tok, g.proj_out, b, cf, Hf, Wf, g.geom.patch_size);

    // output_pad 1 restores the even extents halved by the stride-2 convs
    t = relu(instance_norm(conv2d_transpose(t, g.up1.w, g.up1.b, 2, 1, 1), ie));
    t = relu(instance_norm(conv2d_transpose(t, g.up2.w, g.up2.b, 2, 1, 1), ie));
    return tanh_act(conv2d(t, g.final_conv.w, g.final_conv.b, 1, 3));
}

std::vector<Tensor> DiscriminatorParams::parameters() const {
    std::vector<Tensor> out;
    collect_conv(c1, out);
    collect_conv(c2, out);
    collect_conv(c3, out);
    collect_conv(c4, out);
    collect_conv(head, out);
    return out;
}

DiscriminatorParams make_discriminator(int64_t base_channels, double instance_norm_eps, Rng& rng,
                                       const std::string& prefix) {
    DiscriminatorParams d;
    d.base_channels = base_channels;
    d.instance_norm_eps = instance_norm_eps;
    int64_t c = base_channels;
    d.c1 = make_conv(c, 3, 4, rng, prefix + ".c1");
    d.c2 = make_conv(2 * c, c, 4, rng, prefix + ".c2");
    d.c3 = make_conv(4 * c, 2 * c, 4, rng, prefix + ".c3");
    d.c4 = make_conv(8 * c, 4 * c, 4, rng, prefix + ".c4");
    d.head = make_conv(1, 8 * c, 4, rng, prefix + ".head");
    return d;
}

int64_t discriminator_map_size(int64_t image_size) {
    auto step = [](int64_t s, int64_t stride) { return (s + 2 - 4) / stride + 1; };
    int64_t s = image_size;
    for (int stride : {2, 2, 2, 1, 1}) {
        if (s + 2 < 4) s = 0;
        else s = step(s, stride);
        if (s < 1)
            throw DimensionError("discriminator: input too small, " + std::to_string(image_size) +
                                 " leaves no spatial extent for the 4x4 stack");
    }
    return s;
}

Tensor discriminator_forward(const Tensor& x, const DiscriminatorParams& d) {
    if (x.shape().size() != 4 || x.dim(1) != 3)
        throw DimensionError("discriminator_forward: input must be [b,3,H,W], got " +
                             shape_str(x.shape()));
    discriminator_map_size(x.dim(2));
    discriminator_map_size(x.dim(3));
    const double ie = d.instance_norm_eps;
    Tensor t = leaky_relu(conv2d(x, d.c1.w, d.c1.b, 2, 1), 0.2);
    t = leaky_relu(instance_norm(conv2d(t, d.c2.w, d.c2.b, 2, 1), ie), 0.2);
    t = leaky_relu(instance_norm(conv2d(t, d.c3.w, d.c3.b, 2, 1), ie), 0.2);
    t = leaky_relu(instance_norm(conv2d(t, d.c4.w, d.c4.b, 1, 1), ie), 0.2);
    return conv2d(t, d.head.w, d.head.b, 1, 1);  // raw LSGAN scores, no sigmoid
}

}  // namespace mixergan
