#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "mixergan/rng.hpp"
#include "mixergan/tensor.hpp"

namespace testutil {

using mixergan::Rng;
using mixergan::Tensor;

inline std::vector<double> random_vec(Rng& rng, int64_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Relative error with an absolute floor so near-zero pairs do not explode.
inline double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

// Central finite differences against the autodiff gradient of a scalar
// function of `probe`'s data. `eval` must rebuild the graph from current
// leaf data and return the loss value. Checks the chosen coordinates; pass
// max_coords < 0 to check all. Returns the max relative error.
struct GradCheck {
    double max_rel_err = 0.0;
    int64_t coords_checked = 0;
};

inline GradCheck check_gradient(Tensor probe, const std::function<double()>& eval,
                                const std::vector<double>& autodiff_grad, Rng& rng,
                                int64_t max_coords = -1, double eps = 1e-5) {
    GradCheck res;
    auto& data = probe.mutable_data();
    int64_t n = static_cast<int64_t>(data.size());
    std::vector<int64_t> coords;
    if (max_coords < 0 || max_coords >= n) {
        coords.resize(n);
        for (int64_t i = 0; i < n; ++i) coords[i] = i;
    } else {
        coords = rng.sample_without_replacement(n, max_coords);
    }
    for (int64_t i : coords) {
        double orig = data[i];
        data[i] = orig + eps;
        double up = eval();
        data[i] = orig - eps;
        double down = eval();
        data[i] = orig;
        double fd = (up - down) / (2.0 * eps);
        res.max_rel_err = std::max(res.max_rel_err, rel_err(fd, autodiff_grad[i]));
        ++res.coords_checked;
    }
    return res;
}

// Run forward+backward once, collect grad, then finite-difference it.
inline GradCheck grad_check_op(Tensor probe, const std::function<Tensor()>& make_loss, Rng& rng,
                               int64_t max_coords = -1, double eps = 1e-5) {
    probe.zero_grad();  // clear any gradient left by an earlier sweep
    Tensor loss = make_loss();
    loss.backward();
    std::vector<double> g = probe.grad();
    return check_gradient(
        probe, [&make_loss] { return make_loss().item(); }, g, rng, max_coords, eps);
}

inline bool bytes_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace testutil
