#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixergan/rng.hpp"
#include "mixergan/tensor.hpp"

namespace mixergan {

// One 3-channel image with values in [-1, 1], plus where it came from.
struct ImageRecord {
    int64_t height = 0, width = 0;
    std::vector<double> pixels;  // [3, H, W] row-major
    std::string source;

    void validate() const;
};

enum class ShapeFamily { Circles, Squares };

struct SyntheticDomainSpec {
    std::string domain_id;
    ShapeFamily family = ShapeFamily::Circles;
    // Shape palette as RGB ranges in [-1, 1]; two specs differing only here
    // define a translation task with a known hue-swap oracle.
    double red_lo = 0.4, red_hi = 0.9;
    double green_lo = -0.7, green_hi = -0.3;
    double blue_lo = -0.9, blue_hi = -0.5;
    double texture_amplitude = 0.08;
    int64_t count = 64;
    uint64_t seed = 0;
    int64_t image_size = 32;
};

// Deterministic procedural images: shapes at random positions/sizes on a
// textured neutral background, colored from the palette.
std::vector<ImageRecord> synthesize_domain(const SyntheticDomainSpec& spec);

// Red-shapes spec ("A") and blue-shapes spec ("B") for the default task.
SyntheticDomainSpec red_domain_spec(uint64_t seed, int64_t count, int64_t image_size);
SyntheticDomainSpec blue_domain_spec(uint64_t seed, int64_t count, int64_t image_size);

// PPM P6, 8-bit, bit-exact round-trip. Float<->byte map:
// u = round((v+1)*127.5) clamped to [0,255]; v = u/127.5 - 1.
void save_image(const ImageRecord& img, const std::string& path);
ImageRecord load_image(const std::string& path);

// All *.ppm files under dir, sorted by filename.
std::vector<std::string> list_ppm_files(const std::string& dir);
std::vector<ImageRecord> load_image_dir(const std::string& dir);

// Pack images into a [b, 3, H, W] leaf tensor.
Tensor images_to_tensor(const std::vector<ImageRecord>& images,
                        const std::vector<int64_t>& indices);
std::vector<ImageRecord> tensor_to_images(const Tensor& t);

// Uniform without-replacement draws within an epoch; each domain has its own
// stream so x and y picks are uncorrelated. Epoch permutations derive from
// (seed, domain label, epoch), so any position can be reconstructed.
class UnpairedSampler {
public:
    UnpairedSampler(uint64_t master_seed, const std::string& domain_label, int64_t dataset_size,
                    int64_t batch_size);

    std::vector<int64_t> next_batch();
    // Position a fresh sampler as if `iterations` batches were already drawn.
    void seek(int64_t iterations);
    int64_t batches_per_epoch() const { return batches_per_epoch_; }

private:
    void load_epoch(int64_t epoch);

    uint64_t seed_;
    std::string label_;
    int64_t size_, batch_;
    int64_t batches_per_epoch_;
    int64_t epoch_ = -1;
    int64_t cursor_ = 0;  // batches consumed within the current epoch
    std::vector<int64_t> perm_;
};

}  // namespace mixergan
