#include "mixergan/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace mixergan {

AdamState AdamState::for_params(const std::vector<Tensor>& params) {
    AdamState s;
    s.m1.reserve(params.size());
    s.m2.reserve(params.size());
    for (const auto& p : params) {
        s.m1.emplace_back(p.numel(), 0.0);
        s.m2.emplace_back(p.numel(), 0.0);
    }
    return s;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    if (params.size() != state.m1.size())
        throw ValidationError("adam_step: state does not match parameter list");
    if (lr <= 0.0) throw ValidationError("adam_step: lr must be positive");
    ++state.step;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        std::vector<double> g = p.grad();
        for (double v : g)
            if (!std::isfinite(v))
                throw TrainingError("adam_step: non-finite gradient for parameter '" + p.name() +
                                    "'");
        auto& data = p.mutable_data();
        auto& m1 = state.m1[pi];
        auto& m2 = state.m2[pi];
        for (size_t i = 0; i < data.size(); ++i) {
            m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
            m2[i] = beta2 * m2[i] + (1.0 - beta2) * g[i] * g[i];
            double mhat = m1[i] / bc1;
            double vhat = m2[i] / bc2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double lr_at(int64_t iteration, const RunConfig& cfg) {
    if (iteration < 0 || iteration > cfg.iterations)
        throw ValidationError("lr_at: iteration out of range");
    int64_t ds = cfg.effective_decay_start();
    if (iteration < ds || cfg.iterations == ds) return cfg.lr;
    return cfg.lr * static_cast<double>(cfg.iterations - iteration) /
           static_cast<double>(cfg.iterations - ds);
}

Tensor ImagePool::query(const Tensor& detached_fake) {
    if (capacity_ <= 0) return detached_fake;
    if (static_cast<int64_t>(pool_.size()) < capacity_) {
        pool_.push_back(detached_fake);
        return detached_fake;
    }
    if (rng_.uniform01() < 0.5) {
        size_t idx = static_cast<size_t>(rng_.next_below(pool_.size()));
        Tensor old = pool_[idx];
        pool_[idx] = detached_fake;
        return old;
    }
    return detached_fake;
}

std::vector<Tensor> TrainerModels::generator_params() const {
    std::vector<Tensor> out = g_xy.parameters();
    auto f = g_yx.parameters();
    out.insert(out.end(), f.begin(), f.end());
    return out;
}

std::vector<Tensor> TrainerModels::discriminator_params() const {
    std::vector<Tensor> out = d_x.parameters();
    auto dy = d_y.parameters();
    out.insert(out.end(), dy.begin(), dy.end());
    return out;
}

TrainerModels make_models(const RunConfig& cfg) {
    GeneratorGeometry geom = cfg.generator_geometry();
    TrainerModels m;
    {
        Rng rng(derive_seed(cfg.seed, "init.g_xy"));
        m.g_xy = make_generator(geom, rng, "g_xy");
    }
    {
        Rng rng(derive_seed(cfg.seed, "init.g_yx"));
        m.g_yx = make_generator(geom, rng, "g_yx");
    }
    {
        Rng rng(derive_seed(cfg.seed, "init.d_x"));
        m.d_x = make_discriminator(cfg.disc_channels, cfg.instance_norm_eps, rng, "d_x");
    }
    {
        Rng rng(derive_seed(cfg.seed, "init.d_y"));
        m.d_y = make_discriminator(cfg.disc_channels, cfg.instance_norm_eps, rng, "d_y");
    }
    return m;
}

Trainer::Trainer(const RunConfig& cfg, std::vector<ImageRecord> dataset_x,
                 std::vector<ImageRecord> dataset_y)
    : cfg_(cfg),
      data_x_(std::move(dataset_x)),
      data_y_(std::move(dataset_y)),
      models_(make_models(cfg)),
      g_params_(models_.generator_params()),
      d_params_(models_.discriminator_params()),
      g_opt_(AdamState::for_params(g_params_)),
      d_opt_(AdamState::for_params(d_params_)),
      extractor_(cfg.extractor_seed),
      sampler_x_(cfg.seed, "X", static_cast<int64_t>(data_x_.size()), cfg.batch_size),
      sampler_y_(cfg.seed, "Y", static_cast<int64_t>(data_y_.size()), cfg.batch_size) {
    cfg_.validate();
    if (data_x_.empty() || data_y_.empty())
        throw ValidationError("trainer: datasets must be non-empty");
    if (cfg_.use_history_buffer) {
        pool_x_.emplace(derive_seed(cfg.seed, "pool.X"), 50);
        pool_y_.emplace(derive_seed(cfg.seed, "pool.Y"), 50);
    }
}

Tensor Trainer::sample_batch_x() { return images_to_tensor(data_x_, sampler_x_.next_batch()); }
Tensor Trainer::sample_batch_y() { return images_to_tensor(data_y_, sampler_y_.next_batch()); }

namespace {

void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw TrainingError(std::string("train_step: non-finite ") + what);
    return v;
}

}  // namespace

void Trainer::generator_phase(const Tensor& bx, const Tensor& by, StepReport& rep) {
    zero_grads(g_params_);

    Tensor fake_y = generator_forward(bx, models_.g_xy);
    Tensor rec_x = generator_forward(fake_y, models_.g_yx);
    Tensor fake_x = generator_forward(by, models_.g_yx);
    Tensor rec_y = generator_forward(fake_x, models_.g_xy);

    Tensor l_g = loss_generator(discriminator_forward(fake_y, models_.d_y));
    Tensor l_f = loss_generator(discriminator_forward(fake_x, models_.d_x));
    Tensor l_cyc = loss_cycle(bx, rec_x, by, rec_y);

    Tensor objective = add(add(l_g, l_f), scale(l_cyc, cfg_.lambda_cyc));
    double perc_val = 0.0;
    if (cfg_.lambda_perc > 0.0) {
        Tensor l_perc =
            add(loss_perceptual(bx, rec_x, extractor_), loss_perceptual(by, rec_y, extractor_));
        perc_val = l_perc.item();
        objective = add(objective, scale(l_perc, cfg_.lambda_perc));
    }
    checked(objective.item(), "generator objective");
    objective.backward();

    // Discriminator parameters also accumulate gradients through D(G(x)),
    // but only the generator lists are stepped; D stays frozen here.
    double lr = lr_at(iteration_, cfg_);
    adam_step(g_params_, g_opt_, lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);

    rep.loss_g = l_g.item();
    rep.loss_f = l_f.item();
    rep.loss_cyc = l_cyc.item();
    rep.loss_perc = perc_val;
    rep.lr = lr;

    // Stash detached fakes for the discriminator phase.
    fake_y_detached_ = fake_y.detach();
    fake_x_detached_ = fake_x.detach();
}

void Trainer::discriminator_phase(const Tensor& bx, const Tensor& by, StepReport& rep) {
    zero_grads(d_params_);

    Tensor fy = fake_y_detached_.defined() ? fake_y_detached_
                                           : generator_forward(bx, models_.g_xy).detach();
    Tensor fx = fake_x_detached_.defined() ? fake_x_detached_
                                           : generator_forward(by, models_.g_yx).detach();
    if (pool_y_) fy = pool_y_->query(fy);
    if (pool_x_) fx = pool_x_->query(fx);

    Tensor l_dy = loss_discriminator(discriminator_forward(by, models_.d_y),
                                     discriminator_forward(fy, models_.d_y));
    Tensor l_dx = loss_discriminator(discriminator_forward(bx, models_.d_x),
                                     discriminator_forward(fx, models_.d_x));
    Tensor objective = add(l_dx, l_dy);
    checked(objective.item(), "discriminator objective");
    objective.backward();
    adam_step(d_params_, d_opt_, lr_at(iteration_, cfg_), cfg_.beta1, cfg_.beta2, cfg_.adam_eps);

    rep.loss_dx = l_dx.item();
    rep.loss_dy = l_dy.item();
    fake_y_detached_ = Tensor();
    fake_x_detached_ = Tensor();
}

StepReport Trainer::train_step(const Tensor& bx, const Tensor& by) {
    StepReport rep;
    rep.iteration = iteration_;
    generator_phase(bx, by, rep);
    discriminator_phase(bx, by, rep);
    ++iteration_;
    return rep;
}

Checkpoint Trainer::to_checkpoint() const {
    Checkpoint ck;
    ck.geometry_hash = geometry_hash(cfg_);
    ck.iteration = static_cast<uint64_t>(iteration_);
    for (const auto& p : g_params_) ck.add(p.name(), p.shape(), p.data());
    for (const auto& p : d_params_) ck.add(p.name(), p.shape(), p.data());
    auto add_opt = [&ck](const char* tag, const std::vector<Tensor>& params,
                         const AdamState& st) {
        for (size_t i = 0; i < params.size(); ++i) {
            ck.add(std::string("opt.") + tag + ".m1." + params[i].name(), params[i].shape(),
                   st.m1[i]);
            ck.add(std::string("opt.") + tag + ".m2." + params[i].name(), params[i].shape(),
                   st.m2[i]);
        }
        ck.add(std::string("opt.") + tag + ".step", {1},
               {static_cast<double>(st.step)});
    };
    add_opt("g", g_params_, g_opt_);
    add_opt("d", d_params_, d_opt_);
    return ck;
}

void Trainer::restore(const Checkpoint& ck) {
    if (ck.geometry_hash != geometry_hash(cfg_))
        throw ValidationError("restore: checkpoint geometry hash " +
                              std::to_string(ck.geometry_hash) + " does not match config " +
                              std::to_string(geometry_hash(cfg_)));
    auto load_into = [&ck](std::vector<Tensor>& params) {
        for (auto& p : params) {
            const auto& e = ck.get(p.name());
            if (e.shape != p.shape())
                throw DimensionError("restore: shape mismatch for '" + p.name() + "': " +
                                     shape_str(e.shape) + " vs " + shape_str(p.shape()));
            p.mutable_data() = e.data;
        }
    };
    load_into(g_params_);
    load_into(d_params_);
    auto load_opt = [&ck](const char* tag, const std::vector<Tensor>& params, AdamState& st) {
        for (size_t i = 0; i < params.size(); ++i) {
            st.m1[i] = ck.get(std::string("opt.") + tag + ".m1." + params[i].name()).data;
            st.m2[i] = ck.get(std::string("opt.") + tag + ".m2." + params[i].name()).data;
        }
        st.step = static_cast<int64_t>(ck.get(std::string("opt.") + tag + ".step").data[0]);
    };
    load_opt("g", g_params_, g_opt_);
    load_opt("d", d_params_, d_opt_);
    iteration_ = static_cast<int64_t>(ck.iteration);
    sampler_x_.seek(iteration_);
    sampler_y_.seek(iteration_);
}

void Trainer::write_samples(const std::string& run_dir) const {
    // 2x2 grid: top row x | G(x), bottom row y | F(y), first image of each set
    Tensor x = images_to_tensor(data_x_, {0});
    Tensor y = images_to_tensor(data_y_, {0});
    Tensor gx = generator_forward(x, models_.g_xy).detach();
    Tensor fy = generator_forward(y, models_.g_yx).detach();
    int64_t H = x.dim(2), W = x.dim(3);
    ImageRecord grid;
    grid.height = 2 * H;
    grid.width = 2 * W;
    grid.pixels.assign(3 * grid.height * grid.width, 0.0);
    auto blit = [&grid](const Tensor& t, int64_t oy, int64_t ox) {
        int64_t h = t.dim(2), w = t.dim(3);
        for (int c = 0; c < 3; ++c)
            for (int64_t yy = 0; yy < h; ++yy)
                for (int64_t xx = 0; xx < w; ++xx) {
                    double v = t.data()[(c * h + yy) * w + xx];
                    v = std::min(1.0, std::max(-1.0, v));
                    grid.pixels[(c * grid.height + oy + yy) * grid.width + ox + xx] = v;
                }
    };
    blit(x, 0, 0);
    blit(gx, 0, W);
    blit(y, H, 0);
    blit(fy, H, W);
    char name[64];
    std::snprintf(name, sizeof(name), "samples_%06lld.ppm", static_cast<long long>(iteration_));
    save_image(grid, run_dir + "/" + name);
}

void Trainer::train(const std::string& run_dir) {
    fs::create_directories(run_dir);
    std::ofstream csv(run_dir + "/loss.csv");
    if (!csv) throw IoError("train: cannot write " + run_dir + "/loss.csv");
    csv << "iter,loss_G,loss_F,loss_DX,loss_DY,loss_cyc,loss_perc,lr\n";

    auto checkpoint_path = [&run_dir](int64_t iter) {
        char name[64];
        std::snprintf(name, sizeof(name), "ckpt_%06lld.bin", static_cast<long long>(iter));
        return run_dir + "/" + name;
    };
    auto emit_row = [&csv](const StepReport& r) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      static_cast<long long>(r.iteration), r.loss_g, r.loss_f, r.loss_dx,
                      r.loss_dy, r.loss_cyc, r.loss_perc, r.lr);
        csv << buf;
    };

    if (cfg_.iterations == 0) {
        save_checkpoint(to_checkpoint(), checkpoint_path(0));
        return;
    }
    while (iteration_ < cfg_.iterations) {
        Tensor bx = sample_batch_x();
        Tensor by = sample_batch_y();
        StepReport rep = train_step(bx, by);
        if ((rep.iteration + 1) % cfg_.report_interval == 0 ||
            rep.iteration + 1 == cfg_.iterations)
            emit_row(rep);
        if (iteration_ % cfg_.checkpoint_interval == 0 && iteration_ < cfg_.iterations) {
            save_checkpoint(to_checkpoint(), checkpoint_path(iteration_));
            write_samples(run_dir);
        }
    }
    save_checkpoint(to_checkpoint(), checkpoint_path(iteration_));
    write_samples(run_dir);
}

void load_model_params(TrainerModels& models, const Checkpoint& ck) {
    auto load_into = [&ck](std::vector<Tensor> params) {
        for (auto& p : params) {
            const auto& e = ck.get(p.name());
            if (e.shape != p.shape())
                throw DimensionError("load_model_params: shape mismatch for '" + p.name() +
                                     "': " + shape_str(e.shape) + " vs " + shape_str(p.shape()));
            p.mutable_data() = e.data;
        }
    };
    load_into(models.generator_params());
    load_into(models.discriminator_params());
}

std::pair<std::vector<ImageRecord>, std::vector<ImageRecord>> load_training_data(
    const RunConfig& cfg) {
    if (cfg.synthetic) {
        auto a = synthesize_domain(red_domain_spec(cfg.seed, cfg.synthetic_count, cfg.image_size));
        auto b = synthesize_domain(blue_domain_spec(cfg.seed, cfg.synthetic_count, cfg.image_size));
        return {std::move(a), std::move(b)};
    }
    if (cfg.data_root.empty())
        throw ValidationError("train: no dataset: pass synthetic=true or set data_root");
    std::string ta = cfg.data_root + "/trainA", tb = cfg.data_root + "/trainB";
    if (!fs::is_directory(ta) || !fs::is_directory(tb))
        throw IoError("train: dataset root '" + cfg.data_root +
                      "' must contain trainA/ and trainB/");
    return {load_image_dir(ta), load_image_dir(tb)};
}

}  // namespace mixergan
