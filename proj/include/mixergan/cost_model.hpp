#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixergan/common.hpp"

namespace mixergan {

enum class BlockKind { SelfAttention, TokenMixer, ConvResidual };

BlockKind block_kind_from(const std::string& s);
std::string block_kind_name(BlockKind k);

// Descriptor of one isotropic block for counting purposes.
struct BlockSpec {
    BlockKind kind = BlockKind::TokenMixer;
    int64_t tokens = 64;      // n
    int64_t channels = 128;   // c
    int64_t heads = 8;        // h, self-attention only
    int64_t batch = 1;        // b
    int64_t kernel = 3;       // k, conv-residual only
    int64_t expansion = 2;    // hidden expansion e, token-mixer only

    void validate() const;
};

struct CostReport {
    int64_t parameter_count = 0;
    int64_t activation_floats = 0;
    std::string asymptotic_params;
    std::string asymptotic_activations;
};

// Exact learnable-parameter counts.
//   self-attention: per-head Q,K,V projections c x (c/h) plus biases, and a
//                   c x c output projection plus bias -> 4c^2 + 4c
//   token-mixer:    n x en + en and en x n + n                 -> 2en^2 + (e+1)n
//   conv-residual:  two k x k conv layers with biases          -> 2(k^2 c^2 + c)
int64_t params_of(const BlockSpec& spec);

// Exact activation floats retained between forward and backward, counted as
// the output buffers of every op in the block's forward graph (views free).
//   self-attention: Q, K, V, attention scores, their softmax, the attended
//                   context, and the output projection
//                   -> 2 h b n^2 + 5 b n c
//   token-mixer:    LayerNorm output, channels-major copy in, hidden
//                   pre-activation, GELU output, mix output, tokens-major
//                   copy back, residual sum -> (5 + 2e) b n c
//   conv-residual:  two feature maps -> 2 b n c
// The token-mixer form equals, float for float, the instrumented count of the
// token_mixing sublayer in the network module.
int64_t activations_of(const BlockSpec& spec);

// Fraction of activation dimensionality retained by a p x p patch projection
// whose channel count is multiplied by m: m / p^2.
double retention_ratio(int64_t patch_size, int64_t channel_multiplier);

struct SweepRow {
    BlockKind kind;
    std::string axis;
    int64_t value;
    int64_t params;
    int64_t activation_floats;
};

// One CostReport per value along the named axis (n, c, b, or h);
// values must be strictly increasing.
std::vector<SweepRow> sweep(const BlockSpec& base, const std::string& axis,
                            const std::vector<int64_t>& values);

// CSV with header kind,axis,value,params,activation_floats.
std::string sweep_csv(const std::vector<SweepRow>& rows);
// gnuplot script plotting the sweep CSV.
std::string sweep_plot_script(const std::string& csv_path);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<int64_t>& xs, const std::vector<int64_t>& ys);

}  // namespace mixergan
