#include "mixergan/cost_model.hpp"

#include <cmath>
#include <sstream>

namespace mixergan {

BlockKind block_kind_from(const std::string& s) {
    if (s == "sa" || s == "self-attention") return BlockKind::SelfAttention;
    if (s == "tm" || s == "token-mixer") return BlockKind::TokenMixer;
    if (s == "conv" || s == "conv-residual") return BlockKind::ConvResidual;
    throw ValidationError("cost model: unknown block kind '" + s +
                          "' (expected sa, tm, or conv)");
}

std::string block_kind_name(BlockKind k) {
    switch (k) {
        case BlockKind::SelfAttention: return "self-attention";
        case BlockKind::TokenMixer: return "token-mixer";
        case BlockKind::ConvResidual: return "conv-residual";
    }
    return "?";
}

void BlockSpec::validate() const {
    if (tokens < 1 || channels < 1 || heads < 0 || batch < 1 || kernel < 0 || expansion < 1)
        throw ValidationError("cost model: extents must be positive");
    if (kind == BlockKind::SelfAttention) {
        if (heads < 1) throw ValidationError("cost model: self-attention needs heads >= 1");
        if (channels % heads != 0)
            throw ValidationError("cost model: channels " + std::to_string(channels) +
                                  " not divisible by heads " + std::to_string(heads));
    }
    if (kind == BlockKind::ConvResidual && kernel < 1)
        throw ValidationError("cost model: conv-residual needs kernel >= 1");
}

int64_t params_of(const BlockSpec& spec) {
    spec.validate();
    int64_t n = spec.tokens, c = spec.channels, k = spec.kernel, e = spec.expansion;
    switch (spec.kind) {
        case BlockKind::SelfAttention:
            // h heads x 3 projections of c x (c/h) each (+ c/h biases), then
            // a c x c output projection (+ c bias): independent of n.
            return spec.heads * 3 * (c * (c / spec.heads) + c / spec.heads) + c * c + c;
        case BlockKind::TokenMixer:
            return n * (e * n) + e * n + (e * n) * n + n;
        case BlockKind::ConvResidual:
            return 2 * (k * k * c * c + c);
    }
    return 0;
}

int64_t activations_of(const BlockSpec& spec) {
    spec.validate();
    int64_t n = spec.tokens, c = spec.channels, b = spec.batch, e = spec.expansion;
    switch (spec.kind) {
        case BlockKind::SelfAttention:
            // Q, K, V projections and the final output: 4 bnc. Attended
            // context before the output projection: bnc. Raw scores and
            // their softmax, one n x n matrix per head per sample: 2 hbn^2.
            return 2 * spec.heads * b * n * n + 5 * b * n * c;
        case BlockKind::TokenMixer:
            // LayerNorm out + transpose in + hidden + GELU + mix out +
            // transpose back + residual add.
            return (5 + 2 * e) * b * n * c;
        case BlockKind::ConvResidual:
            return 2 * b * n * c;
    }
    return 0;
}

double retention_ratio(int64_t patch_size, int64_t channel_multiplier) {
    if (patch_size < 1 || channel_multiplier < 1)
        throw ValidationError("retention_ratio: arguments must be >= 1");
    return static_cast<double>(channel_multiplier) /
           static_cast<double>(patch_size * patch_size);
}

std::vector<SweepRow> sweep(const BlockSpec& base, const std::string& axis,
                            const std::vector<int64_t>& values) {
    if (axis != "n" && axis != "c" && axis != "b" && axis != "h")
        throw ValidationError("sweep: invalid axis '" + axis + "' (expected n, c, b, or h)");
    if (values.empty()) throw ValidationError("sweep: no values");
    for (size_t i = 1; i < values.size(); ++i)
        if (values[i] <= values[i - 1])
            throw ValidationError("sweep: values must be strictly increasing");
    std::vector<SweepRow> rows;
    for (int64_t v : values) {
        BlockSpec s = base;
        if (axis == "n") s.tokens = v;
        else if (axis == "c") s.channels = v;
        else if (axis == "b") s.batch = v;
        else s.heads = v;
        rows.push_back({s.kind, axis, v, params_of(s), activations_of(s)});
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "kind,axis,value,params,activation_floats\n";
    for (const auto& r : rows)
        os << block_kind_name(r.kind) << "," << r.axis << "," << r.value << "," << r.params << ","
           << r.activation_floats << "\n";
    return os.str();
}

std::string sweep_plot_script(const std::string& csv_path) {
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set logscale xy\n"
       << "set xlabel 'sweep value'\n"
       << "set ylabel 'count'\n"
       << "plot '" << csv_path << "' using 3:4 skip 1 with linespoints title 'parameters', \\\n"
       << "     '" << csv_path << "' using 3:5 skip 1 with linespoints title 'activation floats'\n";
    return os.str();
}

double loglog_slope(const std::vector<int64_t>& xs, const std::vector<int64_t>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw ValidationError("loglog_slope: need matching lists with >= 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double n = static_cast<double>(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        double lx = std::log(static_cast<double>(xs[i]));
        double ly = std::log(static_cast<double>(ys[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace mixergan
