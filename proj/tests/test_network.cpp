#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mixergan/network.hpp"
#include "testutil.hpp"

using namespace mixergan;
using testutil::grad_check_op;
using testutil::random_vec;

namespace {

Tensor random_tokens(Rng& rng, int64_t b, int64_t n, int64_t c, bool requires_grad = false) {
    return Tensor::from_data({b, n, c}, testutil::random_vec(rng, b * n * c), requires_grad);
}

void zero_linear(LinearLayer& l) {
    std::fill(l.w.mutable_data().begin(), l.w.mutable_data().end(), 0.0);
    std::fill(l.b.mutable_data().begin(), l.b.mutable_data().end(), 0.0);
}

}  // namespace

TEST_CASE("mixer block with zero weights is the identity") {
    Rng rng(1);
    auto blk = make_mixer_block(8, 6, 2, 2, rng, "blk");
    zero_linear(blk.token_fc1);
    zero_linear(blk.token_fc2);
    zero_linear(blk.chan_fc1);
    zero_linear(blk.chan_fc2);
    Tensor x = random_tokens(rng, 2, 8, 6);
    Tensor y = mixer_block(x, blk, 1e-5);
    CHECK(testutil::bytes_equal(y.data(), x.data()));
}

TEST_CASE("mixer block is isotropic across a shape grid") {
    Rng rng(2);
    for (int64_t n : {4, 16, 64}) {
        for (int64_t c : {8, 32, 128}) {
            auto blk = make_mixer_block(n, c, 2, 2, rng, "blk");
            Tensor x = random_tokens(rng, 1, n, c);
            CHECK(mixer_block(x, blk, 1e-5).shape() == x.shape());
        }
    }
}

TEST_CASE("mixer block rejects mismatched extents") {
    Rng rng(3);
    auto blk = make_mixer_block(8, 6, 2, 2, rng, "blk");
    Tensor wrong = random_tokens(rng, 1, 6, 8);
    CHECK_THROWS_AS(mixer_block(wrong, blk, 1e-5), DimensionError);
}

TEST_CASE("mixer block weight gradients match finite differences") {
    Rng rng(4);
    auto blk = make_mixer_block(16, 8, 2, 2, rng, "blk");
    Tensor x = random_tokens(rng, 1, 16, 8);
    auto make_loss = [&] { return mean_all(square(mixer_block(x, blk, 1e-5))); };
    for (Tensor w : {blk.token_fc1.w, blk.token_fc2.w, blk.chan_fc1.w, blk.chan_fc2.w})
        CHECK(grad_check_op(w, make_loss, rng, 24).max_rel_err < 1e-4);
    for (Tensor b : {blk.token_fc1.b, blk.token_fc2.b, blk.chan_fc1.b, blk.chan_fc2.b})
        CHECK(grad_check_op(b, make_loss, rng, 12).max_rel_err < 1e-4);
    CHECK(grad_check_op(blk.ln_token.gamma, make_loss, rng).max_rel_err < 1e-4);
    CHECK(grad_check_op(blk.ln_chan.beta, make_loss, rng).max_rel_err < 1e-4);
}

TEST_CASE("token-mixing locality: per-channel confinement of the token MLP") {
    Rng rng(5);
    auto blk = make_mixer_block(6, 5, 2, 2, rng, "blk");
    Tensor x = random_tokens(rng, 1, 6, 5);
    Tensor base = token_mix_mlp(x, blk);

    // perturb channel 2 of token 3: the token MLP mixes along tokens within
    // each channel, so only channel 2 may change, across any token
    std::vector<double> d = x.data();
    d[3 * 5 + 2] += 0.37;
    Tensor xp = Tensor::from_data({1, 6, 5}, d);
    Tensor pert = token_mix_mlp(xp, blk);
    for (int64_t t = 0; t < 6; ++t)
        for (int64_t c = 0; c < 5; ++c) {
            double diff = std::fabs(pert.data()[t * 5 + c] - base.data()[t * 5 + c]);
            if (c != 2) CHECK(diff == 0.0);
        }
    // and it must actually propagate across tokens within channel 2
    double spread = 0.0;
    for (int64_t t = 0; t < 6; ++t)
        spread += std::fabs(pert.data()[t * 5 + 2] - base.data()[t * 5 + 2]);
    CHECK(spread > 0.0);
}

TEST_CASE("channel-mixing locality: full block with token MLP zeroed stays per-token") {
    Rng rng(6);
    auto blk = make_mixer_block(6, 5, 2, 2, rng, "blk");
    zero_linear(blk.token_fc1);
    zero_linear(blk.token_fc2);
    Tensor x = random_tokens(rng, 1, 6, 5);
    Tensor base = mixer_block(x, blk, 1e-5);

    std::vector<double> d = x.data();
    d[3 * 5 + 2] += 0.37;  // perturb token 3
    Tensor pert = mixer_block(Tensor::from_data({1, 6, 5}, d), blk, 1e-5);
    for (int64_t t = 0; t < 6; ++t)
        for (int64_t c = 0; c < 5; ++c) {
            double diff = std::fabs(pert.data()[t * 5 + c] - base.data()[t * 5 + c]);
            if (t != 3) CHECK(diff == 0.0);
        }
}

TEST_CASE("token MLP parameter count depends only on n; channel MLP only on c") {
    Rng rng(7);
    auto b1 = make_mixer_block(16, 8, 2, 2, rng, "a");
    auto b2 = make_mixer_block(16, 64, 2, 2, rng, "b");
    auto b3 = make_mixer_block(64, 8, 2, 2, rng, "c");
    CHECK(b1.token_param_count() == b2.token_param_count());
    CHECK(b1.token_param_count() != b3.token_param_count());
    CHECK(b1.channel_param_count() == b3.channel_param_count());
    CHECK(b1.channel_param_count() != b2.channel_param_count());
}

TEST_CASE("patch projection geometry") {
    Rng rng(8);
    // 64x64 feature map, p=8 -> 64 tokens
    int64_t c_feat = 4, p = 8;
    Tensor feat = Tensor::from_data({1, c_feat, 64, 64}, random_vec(rng, c_feat * 64 * 64));
    LinearLayer proj{Tensor::from_data({p * p * c_feat, 16}, random_vec(rng, p * p * c_feat * 16)),
                     Tensor::zeros({16})};
    Tensor tok = patch_project(feat, proj, p);
    CHECK(tok.shape() == Shape{1, 64, 16});

    // p=1 with identity projection: tokens are the per-pixel channel vectors
    std::vector<double> eye(c_feat * c_feat, 0.0);
    for (int64_t i = 0; i < c_feat; ++i) eye[i * c_feat + i] = 1.0;
    LinearLayer id_proj{Tensor::from_data({c_feat, c_feat}, eye), Tensor::zeros({c_feat})};
    Tensor small = Tensor::from_data({1, c_feat, 2, 2}, random_vec(rng, c_feat * 4));
    Tensor tok1 = patch_project(small, id_proj, 1);
    REQUIRE(tok1.shape() == Shape{1, 4, c_feat});
    for (int64_t px = 0; px < 4; ++px)
        for (int64_t ch = 0; ch < c_feat; ++ch)
            CHECK(tok1.data()[px * c_feat + ch] ==
                  doctest::Approx(small.data()[ch * 4 + px]).epsilon(1e-12));

    CHECK_THROWS_AS(patch_project(Tensor::from_data({1, 1, 6, 6}, random_vec(rng, 36)), proj, 4),
                    DimensionError);
}

TEST_CASE("generator keeps shape, stays in [-1,1], and validates geometry") {
    Rng rng(9);
    GeneratorGeometry geom;
    geom.image_size = 32;
    geom.patch_size = 2;
    geom.d_token = 16;
    geom.base_channels = 4;
    geom.mixer_blocks = 2;
    auto g = make_generator(geom, rng, "g");
    Tensor x = Tensor::from_data({2, 3, 32, 32}, random_vec(rng, 2 * 3 * 32 * 32, -1.0, 1.0));
    Tensor y = generator_forward(x, g);
    CHECK(y.shape() == x.shape());
    for (double v : y.data()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }

    Tensor bad = Tensor::from_data({1, 3, 24, 24}, random_vec(rng, 3 * 24 * 24));
    CHECK_THROWS_AS(generator_forward(bad, g), DimensionError);  // 24 % 8 != 0
}

TEST_CASE("generator forward is deterministic") {
    Rng rng(10);
    GeneratorGeometry geom;
    geom.image_size = 16;
    geom.patch_size = 2;
    geom.d_token = 8;
    geom.base_channels = 2;
    geom.mixer_blocks = 2;
    auto g = make_generator(geom, rng, "g");
    Tensor x = Tensor::from_data({1, 3, 16, 16}, random_vec(rng, 3 * 256, -1.0, 1.0));
    Tensor y1 = generator_forward(x, g);
    Tensor y2 = generator_forward(x, g);
    CHECK(testutil::bytes_equal(y1.data(), y2.data()));
}

TEST_CASE("generator end-to-end gradient check on a 16x16 input") {
    Rng rng(11);
    GeneratorGeometry geom;
    geom.image_size = 16;
    geom.patch_size = 2;
    geom.d_token = 8;
    geom.base_channels = 2;
    geom.mixer_blocks = 2;
    auto g = make_generator(geom, rng, "g");
    Tensor x = Tensor::from_data({1, 3, 16, 16}, random_vec(rng, 3 * 256, -0.9, 0.9));
    auto make_loss = [&] { return mean_all(square(generator_forward(x, g))); };
    CHECK(grad_check_op(g.stem.w, make_loss, rng, 8).max_rel_err < 1e-3);
    CHECK(grad_check_op(g.proj_in.w, make_loss, rng, 8).max_rel_err < 1e-3);
    CHECK(grad_check_op(g.blocks[1].token_fc1.w, make_loss, rng, 8).max_rel_err < 1e-3);
    CHECK(grad_check_op(g.up1.w, make_loss, rng, 8).max_rel_err < 1e-3);
    CHECK(grad_check_op(g.final_conv.w, make_loss, rng, 8).max_rel_err < 1e-3);
}

TEST_CASE("discriminator map sizes follow the stack formula") {
    CHECK(discriminator_map_size(64) == 6);
    CHECK(discriminator_map_size(32) == 2);
    CHECK(discriminator_map_size(128) == 14);
    CHECK(discriminator_map_size(256) == 30);
    // doubling H approximately doubles the map extent
    CHECK(std::abs(discriminator_map_size(128) - 2 * discriminator_map_size(64)) <= 2);
    CHECK(std::abs(discriminator_map_size(256) - 2 * discriminator_map_size(128)) <= 2);
    CHECK_THROWS_AS(discriminator_map_size(8), DimensionError);
}

TEST_CASE("discriminator produces a patch score map") {
    Rng rng(12);
    auto d = make_discriminator(4, 1e-5, rng, "d");
    Tensor x = Tensor::from_data({2, 3, 64, 64}, random_vec(rng, 2 * 3 * 64 * 64, -1.0, 1.0));
    Tensor scores = discriminator_forward(x, d);
    CHECK(scores.shape() == Shape{2, 1, 6, 6});

    Tensor tiny = Tensor::from_data({1, 3, 8, 8}, random_vec(rng, 3 * 64));
    CHECK_THROWS_AS(discriminator_forward(tiny, d), DimensionError);
}

TEST_CASE("discriminator gradients match finite differences") {
    Rng rng(13);
    auto d = make_discriminator(2, 1e-5, rng, "d");
    Tensor x = Tensor::from_data({1, 3, 32, 32}, random_vec(rng, 3 * 32 * 32, -0.9, 0.9), true);
    auto make_loss = [&] { return mean_all(square(discriminator_forward(x, d))); };
    CHECK(grad_check_op(d.c1.w, make_loss, rng, 8).max_rel_err < 1e-4);
    CHECK(grad_check_op(d.c4.w, make_loss, rng, 8).max_rel_err < 1e-4);
    CHECK(grad_check_op(d.head.w, make_loss, rng, 8).max_rel_err < 1e-4);
    CHECK(grad_check_op(x, make_loss, rng, 8).max_rel_err < 1e-4);
}

TEST_CASE("mixer order flag flips the sublayer order") {
    Rng rng(14);
    auto blk = make_mixer_block(4, 4, 2, 2, rng, "blk");
    Tensor x = random_tokens(rng, 1, 4, 4);
    Tensor a = mixer_block(x, blk, 1e-5, true);
    Tensor b = mixer_block(x, blk, 1e-5, false);
    CHECK_FALSE(testutil::bytes_equal(a.data(), b.data()));
    Tensor manual = token_mixing(channel_mixing(x, blk, 1e-5), blk, 1e-5);
    CHECK(testutil::bytes_equal(b.data(), manual.data()));
}
