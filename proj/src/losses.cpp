#include "mixergan/losses.hpp"

#include "mixergan/common.hpp"

namespace mixergan {

namespace {

Tensor frozen_conv_w(int64_t co, int64_t ci, int64_t k, Rng& rng) {
    double std = 1.0 / std::sqrt(static_cast<double>(ci * k * k));
    std::vector<double> d(co * ci * k * k);
    for (auto& v : d) v = rng.normal(0.0, std);
    return Tensor::from_data({co, ci, k, k}, std::move(d), false);
}

}  // namespace

FeatureExtractor::FeatureExtractor(uint64_t seed) : seed_(seed) {
    Rng rng(derive_seed(seed, "feature_extractor"));
    s1_ = {frozen_conv_w(8, 3, 3, rng), Tensor::zeros({8})};
    s2_ = {frozen_conv_w(16, 8, 3, rng), Tensor::zeros({16})};
    s3_ = {frozen_conv_w(32, 16, 3, rng), Tensor::zeros({32})};
}

int64_t FeatureExtractor::feature_dim() const { return 8 + 16 + 32; }

std::array<Tensor, 3> FeatureExtractor::taps(const Tensor& images) const {
    if (images.shape().size() != 4 || images.dim(1) != 3)
        throw DimensionError("FeatureExtractor: input must be [b,3,H,W], got " +
                             shape_str(images.shape()));
    if (images.dim(2) % 8 != 0 || images.dim(3) % 8 != 0)
        throw DimensionError("FeatureExtractor: spatial extents " + shape_str(images.shape()) +
                             " must be divisible by 8");
    Tensor t1 = tanh_act(conv2d(images, s1_.w, s1_.b, 2, 1));
    Tensor t2 = tanh_act(conv2d(t1, s2_.w, s2_.b, 2, 1));
    Tensor t3 = tanh_act(conv2d(t2, s3_.w, s3_.b, 2, 1));
    return {t1, t2, t3};
}

Tensor loss_generator(const Tensor& fake_scores) {
    return mean_all(square(add_scalar(fake_scores, -1.0)));
}

Tensor loss_discriminator(const Tensor& real_scores, const Tensor& fake_scores) {
    return add(mean_all(square(add_scalar(real_scores, -1.0))), mean_all(square(fake_scores)));
}

Tensor loss_cycle(const Tensor& x, const Tensor& x_rec, const Tensor& y, const Tensor& y_rec) {
    return add(mean_all(abs_val(sub(x_rec, x))), mean_all(abs_val(sub(y_rec, y))));
}

Tensor loss_perceptual(const Tensor& x, const Tensor& x_rec, const FeatureExtractor& ex) {
    if (x.shape() != x_rec.shape())
        throw DimensionError("loss_perceptual: shape mismatch " + shape_str(x.shape()) + " vs " +
                             shape_str(x_rec.shape()));
    auto ta = ex.taps(x);
    auto tb = ex.taps(x_rec);
    Tensor total = mean_all(square(sub(tb[0], ta[0])));
    total = add(total, mean_all(square(sub(tb[1], ta[1]))));
    total = add(total, mean_all(square(sub(tb[2], ta[2]))));
    return total;
}

Tensor loss_total(const Tensor& l_g, const Tensor& l_f, const Tensor& l_dx, const Tensor& l_dy,
                  const Tensor& l_cyc, const Tensor& l_perc, const LossWeights& w) {
    if (w.lambda_cyc < 0.0 || w.lambda_perc < 0.0)
        throw ValidationError("loss_total: lambda weights must be non-negative");
    Tensor t = add(add(l_g, l_f), add(l_dx, l_dy));
    t = add(t, scale(l_cyc, w.lambda_cyc));
    return add(t, scale(l_perc, w.lambda_perc));
}

}  // namespace mixergan
