#include "mixergan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mixergan {

void FeatureSet::validate() const {
    if (m < 2) throw ValidationError("features: need at least 2 samples, got " + std::to_string(m));
    if (d < 1) throw ValidationError("features: empty feature dimension");
    if (static_cast<int64_t>(values.size()) != m * d)
        throw DimensionError("features: value count " + std::to_string(values.size()) +
                             " != m*d = " + std::to_string(m * d));
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("features: non-finite value");
}

int64_t FeatureSet::zero_variance_features() const {
    int64_t count = 0;
    for (int64_t j = 0; j < d; ++j) {
        double first = values[j];
        bool varies = false;
        for (int64_t i = 1; i < m && !varies; ++i) varies = values[i * d + j] != first;
        if (!varies) ++count;
    }
    return count;
}

uint64_t FeatureSet::content_hash() const {
    uint64_t h = fnv1a64(&m, sizeof(m));
    h = fnv1a64(&d, sizeof(d), h);
    return fnv1a64(values.data(), values.size() * sizeof(double), h);
}

namespace {

// Polynomial KID kernel (x.y/d + 1)^3.
double poly_kernel(const double* x, const double* y, int64_t d) {
    double dot = 0.0;
    for (int64_t i = 0; i < d; ++i) dot += x[i] * y[i];
    double t = dot / static_cast<double>(d) + 1.0;
    return t * t * t;
}

double self_term(const FeatureSet& s, const std::vector<int64_t>& idx) {
    int64_t m = static_cast<int64_t>(idx.size());
    double acc = 0.0;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = i + 1; j < m; ++j)
            acc += poly_kernel(s.row(idx[i]), s.row(idx[j]), s.d);
    return 2.0 * acc / (static_cast<double>(m) * static_cast<double>(m - 1));
}

double cross_term(const FeatureSet& a, const FeatureSet& b, const std::vector<int64_t>& ia,
                  const std::vector<int64_t>& ib) {
    double acc = 0.0;
    for (int64_t i : ia)
        for (int64_t j : ib) acc += poly_kernel(a.row(i), b.row(j), a.d);
    return 2.0 * acc / (static_cast<double>(ia.size()) * static_cast<double>(ib.size()));
}

}  // namespace

double mmd2_unbiased(const FeatureSet& a, const FeatureSet& b,
                     const std::vector<int64_t>& idx_a, const std::vector<int64_t>& idx_b) {
    a.validate();
    b.validate();
    if (a.d != b.d)
        throw DimensionError("mmd2: feature dimensions disagree " + std::to_string(a.d) + " vs " +
                             std::to_string(b.d));
    if (idx_a.size() < 2 || idx_b.size() < 2)
        throw ValidationError("mmd2: need at least 2 samples per side");
    // Cross sum iterated in a canonical content order so mmd2(a,b) and
    // mmd2(b,a) are bit-identical.
    bool a_first = a.content_hash() <= b.content_hash();
    double cross = a_first ? cross_term(a, b, idx_a, idx_b) : cross_term(b, a, idx_b, idx_a);
    return self_term(a, idx_a) + self_term(b, idx_b) - cross;
}

KidResult kid(const FeatureSet& real, const FeatureSet& fake, const KidParams& params) {
    real.validate();
    fake.validate();
    if (params.subset_size < 2 || params.n_subsets < 1)
        throw ValidationError("kid: subset_size must be >= 2 and n_subsets >= 1");
    if (real.m < params.subset_size || fake.m < params.subset_size)
        throw ValidationError("kid: subset_size " + std::to_string(params.subset_size) +
                              " exceeds available samples (" + std::to_string(real.m) + ", " +
                              std::to_string(fake.m) + ")");
    uint64_t h_real = real.content_hash(), h_fake = fake.content_hash();
    bool identical = h_real == h_fake && real.m == fake.m;

    KidResult res;
    res.subset_values.reserve(params.n_subsets);
    for (int64_t t = 0; t < params.n_subsets; ++t) {
        std::vector<int64_t> ia, ib;
        if (identical) {
            // Same content on both sides: draw 2k disjoint indices so the
            // estimator compares two independent subsets of one distribution.
            Rng rng(derive_seed(params.seed, "kid.subset." + std::to_string(t) + "." +
                                                std::to_string(h_real)));
            if (real.m < 2 * params.subset_size)
                throw ValidationError(
                    "kid: identical sets need at least 2*subset_size samples, have " +
                    std::to_string(real.m));
            auto both = rng.sample_without_replacement(real.m, 2 * params.subset_size);
            ia.assign(both.begin(), both.begin() + params.subset_size);
            ib.assign(both.begin() + params.subset_size, both.end());
        } else {
            Rng ra(derive_seed(params.seed, "kid.subset." + std::to_string(t) + "." +
                                                std::to_string(h_real)));
            Rng rb(derive_seed(params.seed, "kid.subset." + std::to_string(t) + "." +
                                                std::to_string(h_fake)));
            ia = ra.sample_without_replacement(real.m, params.subset_size);
            ib = rb.sample_without_replacement(fake.m, params.subset_size);
        }
        res.subset_values.push_back(mmd2_unbiased(real, fake, ia, ib));
    }
    double s = 0.0;
    for (double v : res.subset_values) s += v;
    res.mean = s / static_cast<double>(res.subset_values.size());
    if (res.subset_values.size() > 1) {
        double ss = 0.0;
        for (double v : res.subset_values) ss += (v - res.mean) * (v - res.mean);
        res.stddev = std::sqrt(ss / static_cast<double>(res.subset_values.size() - 1));
    }
    return res;
}

void jacobi_eigen(std::vector<double> a, int64_t n, std::vector<double>& eigenvalues,
                  std::vector<double>& eigenvectors) {
    eigenvectors.assign(n * n, 0.0);
    for (int64_t i = 0; i < n; ++i) eigenvectors[i * n + i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-26) break;
        for (int64_t p = 0; p < n - 1; ++p)
            for (int64_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (apq == 0.0) continue;
                double app = a[p * n + p], aqq = a[q * n + q];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double cs = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * cs;
                for (int64_t k = 0; k < n; ++k) {
                    double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = cs * akp - sn * akq;
                    a[k * n + q] = sn * akp + cs * akq;
                }
                for (int64_t k = 0; k < n; ++k) {
                    double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = cs * apk - sn * aqk;
                    a[q * n + k] = sn * apk + cs * aqk;
                }
                for (int64_t k = 0; k < n; ++k) {
                    double vkp = eigenvectors[k * n + p], vkq = eigenvectors[k * n + q];
                    eigenvectors[k * n + p] = cs * vkp - sn * vkq;
                    eigenvectors[k * n + q] = sn * vkp + cs * vkq;
                }
            }
    }
    eigenvalues.resize(n);
    for (int64_t i = 0; i < n; ++i) eigenvalues[i] = a[i * n + i];
}

namespace {

void mean_and_cov(const FeatureSet& s, std::vector<double>& mu, std::vector<double>& cov) {
    int64_t m = s.m, d = s.d;
    mu.assign(d, 0.0);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < d; ++j) mu[j] += s.values[i * d + j];
    for (int64_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(m);
    cov.assign(d * d, 0.0);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t a = 0; a < d; ++a) {
            double va = s.values[i * d + a] - mu[a];
            for (int64_t b = a; b < d; ++b)
                cov[a * d + b] += va * (s.values[i * d + b] - mu[b]);
        }
    for (int64_t a = 0; a < d; ++a)
        for (int64_t b = a; b < d; ++b) {
            cov[a * d + b] /= static_cast<double>(m - 1);
            cov[b * d + a] = cov[a * d + b];
        }
}

// Q diag(sqrt(max(lambda, 0))) Q^T for symmetric PSD A; negative eigenvalues
// are rounding noise and get clamped.
std::vector<double> sym_sqrt(const std::vector<double>& a, int64_t n) {
    std::vector<double> evals, evecs;
    jacobi_eigen(a, n, evals, evecs);
    std::vector<double> out(n * n, 0.0);
    for (int64_t e = 0; e < n; ++e) {
        double lam = std::max(0.0, evals[e]);
        double fe = std::sqrt(lam);
        if (fe == 0.0) continue;
        for (int64_t i = 0; i < n; ++i) {
            double w = evecs[i * n + e] * fe;
            for (int64_t j = 0; j < n; ++j) out[i * n + j] += w * evecs[j * n + e];
        }
    }
    return out;
}

}  // namespace

double fid(const FeatureSet& real, const FeatureSet& fake) {
    real.validate();
    fake.validate();
    if (real.d != fake.d)
        throw DimensionError("fid: feature dimensions disagree " + std::to_string(real.d) +
                             " vs " + std::to_string(fake.d));
    int64_t d = real.d;
    std::vector<double> mu_r, mu_f, cov_r, cov_f;
    mean_and_cov(real, mu_r, cov_r);
    mean_and_cov(fake, mu_f, cov_f);

    double mean_term = 0.0;
    for (int64_t j = 0; j < d; ++j) {
        double dm = mu_r[j] - mu_f[j];
        mean_term += dm * dm;
    }

    // tr((Sr Sf)^1/2) = tr((A Sf A)^1/2) with A = Sr^1/2; the inner product
    // is symmetric PSD so one more eigendecomposition finishes it.
    std::vector<double> a = sym_sqrt(cov_r, d);
    std::vector<double> tmp(d * d, 0.0), prod(d * d, 0.0);
    for (int64_t i = 0; i < d; ++i)
        for (int64_t k = 0; k < d; ++k) {
            double v = a[i * d + k];
            if (v == 0.0) continue;
            for (int64_t j = 0; j < d; ++j) tmp[i * d + j] += v * cov_f[k * d + j];
        }
    for (int64_t i = 0; i < d; ++i)
        for (int64_t k = 0; k < d; ++k) {
            double v = tmp[i * d + k];
            if (v == 0.0) continue;
            for (int64_t j = 0; j < d; ++j) prod[i * d + j] += v * a[k * d + j];
        }
    // symmetrize against rounding drift
    for (int64_t i = 0; i < d; ++i)
        for (int64_t j = i + 1; j < d; ++j) {
            double s = 0.5 * (prod[i * d + j] + prod[j * d + i]);
            prod[i * d + j] = prod[j * d + i] = s;
        }
    std::vector<double> evals, evecs;
    jacobi_eigen(prod, d, evals, evecs);
    // Negative eigenvalues of the PSD product are rounding noise
    // (magnitude ~1e-10 of the largest); clamp to zero before the sqrt.
    double trace_sqrt = 0.0;
    for (double v : evals) trace_sqrt += std::sqrt(std::max(0.0, v));

    double tr_r = 0.0, tr_f = 0.0;
    for (int64_t i = 0; i < d; ++i) {
        tr_r += cov_r[i * d + i];
        tr_f += cov_f[i * d + i];
    }
    double val = mean_term + tr_r + tr_f - 2.0 * trace_sqrt;
    return std::max(0.0, val);
}

FeatureSet extract_features(const std::vector<ImageRecord>& images, const FeatureExtractor& ex) {
    if (images.empty()) throw ValidationError("extract_features: no images");
    FeatureSet fs;
    fs.m = static_cast<int64_t>(images.size());
    fs.d = ex.feature_dim();
    fs.extractor_id = "conv-pyramid-3";
    fs.extractor_seed = ex.seed();
    fs.values.reserve(fs.m * fs.d);
    const int64_t chunk = 16;
    for (int64_t start = 0; start < fs.m; start += chunk) {
        int64_t count = std::min(chunk, fs.m - start);
        std::vector<int64_t> idx(count);
        for (int64_t i = 0; i < count; ++i) idx[i] = start + i;
        Tensor batch = images_to_tensor(images, idx);
        auto taps = ex.taps(batch);
        for (int64_t i = 0; i < count; ++i)
            for (const Tensor& tap : taps) {
                int64_t c = tap.dim(1), hw = tap.dim(2) * tap.dim(3);
                const double* base = tap.data().data() + i * c * hw;
                for (int64_t ch = 0; ch < c; ++ch) {
                    double s = 0.0;
                    for (int64_t px = 0; px < hw; ++px) s += base[ch * hw + px];
                    fs.values.push_back(s / static_cast<double>(hw));
                }
            }
    }
    fs.validate();
    return fs;
}

std::string MetricReport::text() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "KID x100: %.2f \xC2\xB1 %.2f  (subset %lld, %lld subsets, seed %llu)\n"
                  "FID: %.6f\n",
                  kid_mean_x100, kid_std_x100, static_cast<long long>(subset_size),
                  static_cast<long long>(n_subsets), static_cast<unsigned long long>(seed),
                  fid_value);
    std::string out = buf;
    if (zero_variance_real > 0 || zero_variance_fake > 0) {
        std::snprintf(buf, sizeof(buf), "warning: zero-variance features (real %lld, fake %lld)\n",
                      static_cast<long long>(zero_variance_real),
                      static_cast<long long>(zero_variance_fake));
        out += buf;
    }
    return out;
}

std::string MetricReport::csv() const {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "kid_mean_x100,kid_std_x100,fid,subset_size,n_subsets,seed,extractor_seed\n"
                  "%.10g,%.10g,%.10g,%lld,%lld,%llu,%llu\n",
                  kid_mean_x100, kid_std_x100, fid_value, static_cast<long long>(subset_size),
                  static_cast<long long>(n_subsets), static_cast<unsigned long long>(seed),
                  static_cast<unsigned long long>(extractor_seed));
    return buf;
}

MetricReport compute_metrics(const FeatureSet& real, const FeatureSet& fake,
                             const KidParams& params) {
    MetricReport rep;
    KidResult k = kid(real, fake, params);
    rep.kid_mean_x100 = 100.0 * k.mean;
    rep.kid_std_x100 = 100.0 * k.stddev;
    rep.fid_value = fid(real, fake);
    rep.subset_size = params.subset_size;
    rep.n_subsets = params.n_subsets;
    rep.seed = params.seed;
    rep.extractor_seed = real.extractor_seed;
    rep.zero_variance_real = real.zero_variance_features();
    rep.zero_variance_fake = fake.zero_variance_features();
    return rep;
}

}  // namespace mixergan
