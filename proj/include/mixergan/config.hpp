#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mixergan/network.hpp"

namespace mixergan {

// Flat run configuration. Parsed from `key = value` text plus command-line
// overrides (later wins); unknown keys are errors. Defaults are the
// desk-scale synthetic task.
struct RunConfig {
    // model geometry
    int64_t image_size = 32;
    int64_t patch_size = 2;
    int64_t channels = 64;  // latent channel width (token dimension)
    int64_t base_channels = 8;
    int64_t disc_channels = 16;
    int64_t mixer_blocks = 9;
    int64_t token_expansion = 2;
    int64_t channel_expansion = 2;
    std::string mixer_order = "token_first";  // or "channel_first"
    double layernorm_eps = 1e-5;
    double instance_norm_eps = 1e-5;

    // optimization
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int64_t iterations = 2000;
    int64_t decay_start = -1;  // -1: floor(iterations / 2)
    int64_t batch_size = 4;
    double lambda_cyc = 10.0;
    double lambda_perc = 0.0;
    uint64_t seed = 0;
    bool use_history_buffer = false;
    bool flip_augment = false;

    // reporting
    int64_t report_interval = 10;
    int64_t checkpoint_interval = 500;

    // features / metrics
    uint64_t extractor_seed = 1234;
    int64_t kid_subset_size = 50;
    int64_t kid_subsets = 10;

    // data
    bool synthetic = false;
    int64_t synthetic_count = 64;
    std::string data_root;
    std::string out_root = "runs";
    std::string resume;

    int64_t effective_decay_start() const { return decay_start < 0 ? iterations / 2 : decay_start; }
    GeneratorGeometry generator_geometry() const;
    void validate() const;
};

// All recognized keys in canonical order.
std::vector<std::string> config_keys();

// Set one key from its textual value; unknown key or bad value throws.
void config_set(RunConfig& cfg, const std::string& key, const std::string& value);

// Parse a `key = value` file into cfg (missing keys keep their values).
// Lines starting with '#' and blank lines are ignored.
void load_config_file(RunConfig& cfg, const std::string& path);

// Canonical text form: every key, sorted, one `key = value` line each.
std::string serialize_config(const RunConfig& cfg);

// Hash over the geometry-defining subset of keys; stored in checkpoints and
// checked before inference so a checkpoint is never applied to a mismatched
// architecture.
uint64_t geometry_hash(const RunConfig& cfg);

}  // namespace mixergan
