#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mixergan/checkpoint.hpp"
#include "mixergan/config.hpp"
#include "mixergan/data_io.hpp"
#include "mixergan/losses.hpp"
#include "mixergan/network.hpp"

namespace mixergan {

// Adam moment buffers for one parameter list. Moment shapes mirror the
// parameters; `step` is the shared bias-correction counter.
struct AdamState {
    std::vector<std::vector<double>> m1, m2;
    int64_t step = 0;

    static AdamState for_params(const std::vector<Tensor>& params);
};

// One Adam update from the parameters' accumulated gradients.
// Throws TrainingError naming the parameter on a non-finite gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr, double beta1,
               double beta2, double eps);

// Constant until decay_start, then linear to zero at total_iterations.
double lr_at(int64_t iteration, const RunConfig& cfg);

struct StepReport {
    int64_t iteration = 0;
    double loss_g = 0, loss_f = 0, loss_dx = 0, loss_dy = 0;
    double loss_cyc = 0, loss_perc = 0;
    double lr = 0;
};

// Seeded pool of past generator outputs (CycleGAN-style); disabled by
// default, kept behind a config flag for parity experiments.
class ImagePool {
public:
    ImagePool(uint64_t seed, int64_t capacity) : rng_(seed), capacity_(capacity) {}
    Tensor query(const Tensor& detached_fake);

private:
    Rng rng_;
    int64_t capacity_;
    std::vector<Tensor> pool_;
};

struct TrainerModels {
    GeneratorParams g_xy, g_yx;
    DiscriminatorParams d_x, d_y;

    std::vector<Tensor> generator_params() const;
    std::vector<Tensor> discriminator_params() const;
};

TrainerModels make_models(const RunConfig& cfg);

class Trainer {
public:
    Trainer(const RunConfig& cfg, std::vector<ImageRecord> dataset_x,
            std::vector<ImageRecord> dataset_y);

    // Generator phase: updates G and F on the adversarial + cycle +
    // perceptual objective with discriminators frozen.
    void generator_phase(const Tensor& bx, const Tensor& by, StepReport& rep);
    // Discriminator phase: updates D_X and D_Y on detached fakes;
    // generator parameters are untouched bit-for-bit.
    void discriminator_phase(const Tensor& bx, const Tensor& by, StepReport& rep);

    StepReport train_step(const Tensor& bx, const Tensor& by);
    // Runs cfg.iterations steps, writing loss CSV, checkpoints, and sample
    // grids under run_dir.
    void train(const std::string& run_dir);

    Checkpoint to_checkpoint() const;
    void restore(const Checkpoint& ck);

    TrainerModels& models() { return models_; }
    int64_t iteration() const { return iteration_; }
    const RunConfig& config() const { return cfg_; }
    const std::vector<ImageRecord>& dataset_x() const { return data_x_; }
    const std::vector<ImageRecord>& dataset_y() const { return data_y_; }

    Tensor sample_batch_x();
    Tensor sample_batch_y();

private:
    void write_samples(const std::string& run_dir) const;

    RunConfig cfg_;
    std::vector<ImageRecord> data_x_, data_y_;
    TrainerModels models_;
    std::vector<Tensor> g_params_, d_params_;
    AdamState g_opt_, d_opt_;
    FeatureExtractor extractor_;
    UnpairedSampler sampler_x_, sampler_y_;
    std::optional<ImagePool> pool_x_, pool_y_;
    Tensor fake_y_detached_, fake_x_detached_;  // reused by the D phase
    int64_t iteration_ = 0;
};

// Loads the datasets named by the config (synthetic or <root>/trainA, trainB).
std::pair<std::vector<ImageRecord>, std::vector<ImageRecord>> load_training_data(
    const RunConfig& cfg);

// Restores model parameters only (no optimizer state), e.g. for inference.
void load_model_params(TrainerModels& models, const Checkpoint& ck);

}  // namespace mixergan
