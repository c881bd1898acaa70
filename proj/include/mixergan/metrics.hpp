#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixergan/data_io.hpp"
#include "mixergan/losses.hpp"

namespace mixergan {

// m samples x d features.
struct FeatureSet {
    int64_t m = 0, d = 0;
    std::vector<double> values;  // row-major
    std::string extractor_id;
    uint64_t extractor_seed = 0;

    const double* row(int64_t i) const { return values.data() + i * d; }
    void validate() const;
    // Count of features with zero variance across the set.
    int64_t zero_variance_features() const;
    uint64_t content_hash() const;
};

struct KidParams {
    int64_t subset_size = 50;
    int64_t n_subsets = 10;
    uint64_t seed = 0;
};

struct KidResult {
    double mean = 0;  // raw MMD^2 scale
    double stddev = 0;
    std::vector<double> subset_values;
};

// Unbiased squared MMD with the polynomial kernel (x.y/d + 1)^3 on one pair
// of index subsets (or whole sets).
double mmd2_unbiased(const FeatureSet& a, const FeatureSet& b,
                     const std::vector<int64_t>& idx_a, const std::vector<int64_t>& idx_b);

// Subset-resampled KID. Identical inputs (by content) are split into
// disjoint subsets per draw so the estimator still sees a proper
// same-distribution null; symmetric in its arguments bit-for-bit.
KidResult kid(const FeatureSet& real, const FeatureSet& fake, const KidParams& params);

// Frechet distance between Gaussians fitted to the feature sets; sample
// covariance uses 1/(m-1), the matrix square root goes through a symmetric
// eigendecomposition, and eigenvalues below -tol are clamped to zero.
double fid(const FeatureSet& real, const FeatureSet& fake);

// Pooled deterministic features from the shared conv pyramid.
FeatureSet extract_features(const std::vector<ImageRecord>& images, const FeatureExtractor& ex);

struct MetricReport {
    double kid_mean_x100 = 0;
    double kid_std_x100 = 0;
    double fid_value = 0;
    int64_t subset_size = 0;
    int64_t n_subsets = 0;
    uint64_t seed = 0;
    uint64_t extractor_seed = 0;
    int64_t zero_variance_real = 0;
    int64_t zero_variance_fake = 0;

    // "K.KK ± S.SS" presentation plus the FID line.
    std::string text() const;
    std::string csv() const;
};

MetricReport compute_metrics(const FeatureSet& real, const FeatureSet& fake,
                             const KidParams& params);

// Symmetric eigendecomposition by cyclic Jacobi; A is n x n row-major.
// Eigenvalues ascend; eigenvectors fill the columns of V.
void jacobi_eigen(std::vector<double> a, int64_t n, std::vector<double>& eigenvalues,
                  std::vector<double>& eigenvectors);

}  // namespace mixergan
