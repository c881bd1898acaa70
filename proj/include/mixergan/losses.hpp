#pragma once

#include <array>

#include "mixergan/network.hpp"
#include "mixergan/tensor.hpp"

namespace mixergan {

struct LossWeights {
    double lambda_cyc = 10.0;
    double lambda_perc = 0.0;
};

// Fixed 3-stage strided conv pyramid with seeded weights; taps after each
// stage. Weights never train, but gradients flow through to the input, so it
// serves both the perceptual loss and (pooled) the metric features.
class FeatureExtractor {
public:
    explicit FeatureExtractor(uint64_t seed);

    uint64_t seed() const { return seed_; }
    // Dimension of the pooled per-image feature vector.
    int64_t feature_dim() const;
    // Three taps for an input [b,3,H,W]; H, W must be divisible by 8.
    std::array<Tensor, 3> taps(const Tensor& images) const;

private:
    uint64_t seed_;
    ConvLayer s1_, s2_, s3_;
};

// Generator LSGAN term: mean over patch scores of (score - 1)^2.
Tensor loss_generator(const Tensor& fake_scores);
// Discriminator LSGAN term: mean (real - 1)^2 + mean fake^2.
// Fake scores must come from a detached generator output.
Tensor loss_discriminator(const Tensor& real_scores, const Tensor& fake_scores);
// Per-pixel mean absolute error of both reconstruction directions.
Tensor loss_cycle(const Tensor& x, const Tensor& x_rec, const Tensor& y, const Tensor& y_rec);
// Sum over taps of per-tap mean squared feature differences.
Tensor loss_perceptual(const Tensor& x, const Tensor& x_rec, const FeatureExtractor& ex);
// Full objective for reporting: adversarial terms plus weighted cycle and
// perceptual components. Training optimizes the G and D halves alternately.
Tensor loss_total(const Tensor& l_g, const Tensor& l_f, const Tensor& l_dx, const Tensor& l_dy,
                  const Tensor& l_cyc, const Tensor& l_perc, const LossWeights& w);

}  // namespace mixergan
