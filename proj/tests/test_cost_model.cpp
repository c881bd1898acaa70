#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mixergan/cost_model.hpp"
#include "mixergan/network.hpp"
#include "testutil.hpp"

using namespace mixergan;

namespace {

BlockSpec tm_spec(int64_t n, int64_t c, int64_t b, int64_t e = 2) {
    BlockSpec s;
    s.kind = BlockKind::TokenMixer;
    s.tokens = n;
    s.channels = c;
    s.batch = b;
    s.expansion = e;
    return s;
}

BlockSpec sa_spec(int64_t n, int64_t c, int64_t b, int64_t h) {
    BlockSpec s;
    s.kind = BlockKind::SelfAttention;
    s.tokens = n;
    s.channels = c;
    s.batch = b;
    s.heads = h;
    return s;
}

BlockSpec conv_spec(int64_t n, int64_t c, int64_t b, int64_t k) {
    BlockSpec s;
    s.kind = BlockKind::ConvResidual;
    s.tokens = n;
    s.channels = c;
    s.batch = b;
    s.kernel = k;
    return s;
}

}  // namespace

TEST_CASE("conv-residual parameter count: k=3, c=4 -> 296") {
    CHECK(params_of(conv_spec(16, 4, 1, 3)) == 296);
}

TEST_CASE("token-mixer parameter count: n=64, e=2 -> 16576") {
    CHECK(params_of(tm_spec(64, 128, 1, 2)) == 16576);
}

TEST_CASE("token-mixer params are invariant to c and b") {
    int64_t base = params_of(tm_spec(64, 8, 1));
    CHECK(params_of(tm_spec(64, 512, 1)) == base);
    CHECK(params_of(tm_spec(64, 8, 32)) == base);
    CHECK(params_of(tm_spec(128, 8, 1)) != base);
}

TEST_CASE("self-attention activation structure under token doubling") {
    // quadratic piece quadruples, linear piece doubles
    int64_t h = 8, b = 4, c = 128;
    auto quad = [&](int64_t n) { return 2 * h * b * n * n; };
    auto lin = [&](int64_t n) { return 5 * b * n * c; };
    CHECK(activations_of(sa_spec(64, c, b, h)) == quad(64) + lin(64));
    CHECK(activations_of(sa_spec(128, c, b, h)) == quad(128) + lin(128));
    CHECK(quad(128) == 4 * quad(64));
    CHECK(lin(128) == 2 * lin(64));
}

TEST_CASE("token-mixer growth under doubling stays in [2,4) and below self-attention") {
    for (int64_t n : {64, 128, 256}) {
        double tm_ratio = static_cast<double>(activations_of(tm_spec(2 * n, 128, 8))) /
                          static_cast<double>(activations_of(tm_spec(n, 128, 8)));
        double sa_ratio = static_cast<double>(activations_of(sa_spec(2 * n, 128, 8, 8))) /
                          static_cast<double>(activations_of(sa_spec(n, 128, 8, 8)));
        CHECK(tm_ratio >= 2.0);
        CHECK(tm_ratio < 4.0);
        CHECK(tm_ratio < sa_ratio);
    }
}

TEST_CASE("instrumented token-mixing sublayer matches the closed form exactly") {
    Rng rng(1);
    for (int64_t n : {16, 64, 256}) {
        for (int64_t c : {8, 64}) {
            for (int64_t b : {1, 4}) {
                auto blk = make_mixer_block(n, c, 2, 2, rng, "blk");
                Tensor x = Tensor::from_data({b, n, c}, testutil::random_vec(rng, b * n * c));
                ActivationCounter::start();
                Tensor y = token_mixing(x, blk, 1e-5);
                uint64_t counted = ActivationCounter::stop();
                (void)y;
                CHECK(counted == static_cast<uint64_t>(activations_of(tm_spec(n, c, b, 2))));
            }
        }
    }
}

TEST_CASE("enumerated token-MLP parameters equal the closed form exactly") {
    Rng rng(2);
    for (int64_t n : {16, 64, 256}) {
        auto blk = make_mixer_block(n, 32, 2, 2, rng, "blk");
        CHECK(blk.token_param_count() == params_of(tm_spec(n, 32, 1, 2)));
    }
}

TEST_CASE("retention ratio") {
    CHECK(retention_ratio(8, 2) == doctest::Approx(0.03125).epsilon(1e-15));
    CHECK(retention_ratio(1, 1) == doctest::Approx(1.0));
    CHECK(retention_ratio(4, 2) == doctest::Approx(0.125));
    CHECK_THROWS_AS(retention_ratio(0, 1), ValidationError);
}

TEST_CASE("counts are nondecreasing in every extent") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        int64_t n = 1 + static_cast<int64_t>(rng.next_below(64));
        int64_t c = 8 * (1 + static_cast<int64_t>(rng.next_below(8)));
        int64_t b = 1 + static_cast<int64_t>(rng.next_below(8));
        for (auto kind_fn : {+[](int64_t n2, int64_t c2, int64_t b2) {
                                 return tm_spec(n2, c2, b2);
                             },
                             +[](int64_t n2, int64_t c2, int64_t b2) {
                                 return conv_spec(n2, c2, b2, 3);
                             },
                             +[](int64_t n2, int64_t c2, int64_t b2) {
                                 return sa_spec(n2, c2, b2, 8);
                             }}) {
            BlockSpec s0 = kind_fn(n, c, b);
            CHECK(params_of(kind_fn(n + 1, c, b)) >= params_of(s0));
            CHECK(params_of(kind_fn(n, c + 8, b)) >= params_of(s0));
            CHECK(activations_of(kind_fn(n + 1, c, b)) >= activations_of(s0));
            CHECK(activations_of(kind_fn(n, c + 8, b)) >= activations_of(s0));
            CHECK(activations_of(kind_fn(n, c, b + 1)) >= activations_of(s0));
        }
    }
}

TEST_CASE("sweep emits one row per value and validates input") {
    auto rows = sweep(tm_spec(64, 128, 8), "n", {64, 128, 256, 512});
    CHECK(rows.size() == 4);
    CHECK(rows[0].value == 64);
    CHECK(rows[3].params == params_of(tm_spec(512, 128, 8)));
    std::string csv = sweep_csv(rows);
    CHECK(csv.find("kind,axis,value,params,activation_floats") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

    CHECK_THROWS_AS(sweep(tm_spec(64, 128, 8), "z", {1, 2}), ValidationError);
    CHECK_THROWS_AS(sweep(tm_spec(64, 128, 8), "n", {64, 64}), ValidationError);
}

TEST_CASE("n-sweep slopes reproduce the scaling figure") {
    std::vector<int64_t> ns = {64, 128, 256, 512, 1024};
    std::vector<int64_t> sa_act, tm_act, sa_par, tm_par;
    for (int64_t n : ns) {
        sa_act.push_back(activations_of(sa_spec(n, 128, 8, 8)));
        tm_act.push_back(activations_of(tm_spec(n, 128, 8)));
        sa_par.push_back(params_of(sa_spec(n, 128, 8, 8)));
        tm_par.push_back(params_of(tm_spec(n, 128, 8)));
    }
    // interval endpoints get a 1e-9 grace for the regression arithmetic
    double s_sa = loglog_slope(ns, sa_act);
    double s_tm = loglog_slope(ns, tm_act);
    double s_tm_par = loglog_slope(ns, tm_par);
    CHECK(s_sa >= 1.8 - 1e-9);
    CHECK(s_sa <= 2.0 + 1e-9);
    CHECK(s_tm >= 1.0 - 1e-9);
    CHECK(s_tm <= 1.2 + 1e-9);
    CHECK(s_tm_par >= 1.8 - 1e-9);
    CHECK(s_tm_par <= 2.0 + 1e-9);
    for (size_t i = 1; i < sa_par.size(); ++i) CHECK(sa_par[i] == sa_par[0]);
}

TEST_CASE("activation counts are exactly linear in batch") {
    for (int64_t b : {1, 2, 4, 8, 16}) {
        CHECK(activations_of(sa_spec(128, 64, b, 8)) ==
              b * activations_of(sa_spec(128, 64, 1, 8)));
        CHECK(activations_of(tm_spec(128, 64, b)) == b * activations_of(tm_spec(128, 64, 1)));
    }
}

TEST_CASE("self-attention validation: heads must divide channels") {
    CHECK_THROWS_AS(params_of(sa_spec(64, 100, 1, 8)), ValidationError);
}
