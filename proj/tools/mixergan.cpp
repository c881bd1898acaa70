#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mixergan/config.hpp"
#include "mixergan/cost_model.hpp"
#include "mixergan/metrics.hpp"
#include "mixergan/training.hpp"

namespace fs = std::filesystem;
using namespace mixergan;

namespace {

// Ordered overrides: file first, then MIXERGAN_SEED, then explicit flags.
struct ConfigCollector {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) load_config_file(cfg, config_path);
        if (const char* env_seed = std::getenv("MIXERGAN_SEED"))
            config_set(cfg, "seed", env_seed);
        for (const auto& [k, v] : overrides) config_set(cfg, k, v);
        return cfg;
    }
};

void add_config_options(CLI::App* cmd, ConfigCollector& col) {
    cmd->add_option("--config", col.config_path, "flat key = value config file");
    auto opt = [cmd, &col](const std::string& flag, const std::string& key,
                           const std::string& help) {
        cmd->add_option_function<std::string>(
               flag, [&col, key](const std::string& v) { col.overrides.emplace_back(key, v); },
               help)
            ->type_name("VAL");
    };
    opt("--seed", "seed", "master seed");
    opt("--iters", "iterations", "total training iterations");
    opt("--decay-start", "decay_start", "iteration where linear lr decay begins (-1: half)");
    opt("--batch", "batch_size", "batch size");
    opt("--lr", "lr", "Adam learning rate");
    opt("--channels", "channels", "latent channel width (token dimension)");
    opt("--image-size", "image_size", "square image extent");
    opt("--patch-size", "patch_size", "patch projection size");
    opt("--base-channels", "base_channels", "generator stem width");
    opt("--disc-channels", "disc_channels", "discriminator stem width");
    opt("--mixer-blocks", "mixer_blocks", "number of mixer blocks");
    opt("--mixer-order", "mixer_order", "token_first or channel_first");
    opt("--lambda-cyc", "lambda_cyc", "cycle loss weight");
    opt("--lambda-perc", "lambda_perc", "perceptual loss weight");
    opt("--data-root", "data_root", "dataset root with trainA/ trainB/");
    opt("--out", "out_root", "directory that receives run directories");
    opt("--synthetic-count", "synthetic_count", "images per synthetic domain");
    opt("--report-interval", "report_interval", "csv row interval");
    opt("--checkpoint-interval", "checkpoint_interval", "checkpoint interval");
    opt("--extractor-seed", "extractor_seed", "feature extractor seed");
    opt("--kid-subset-size", "kid_subset_size", "KID subset size");
    opt("--kid-subsets", "kid_subsets", "KID subset count");
    opt("--resume", "resume", "checkpoint to resume from");
    cmd->add_flag_callback(
        "--synthetic", [&col] { col.overrides.emplace_back("synthetic", "true"); },
        "use the built-in synthetic two-domain task");
    cmd->add_flag_callback(
        "--history-buffer",
        [&col] { col.overrides.emplace_back("use_history_buffer", "true"); },
        "enable the generated-image history pool");
}

// Fresh timestamped run directory; never reuses an existing one.
std::string make_run_dir(const std::string& root, const std::string& tag) {
    fs::create_directories(root);
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[64];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::localtime(&tt));
    std::string base = root + "/" + stamp + "-" + tag;
    std::string dir = base;
    for (int suffix = 1; fs::exists(dir); ++suffix) dir = base + "-" + std::to_string(suffix);
    fs::create_directories(dir);
    return dir;
}

void echo_config(const RunConfig& cfg, const std::string& run_dir) {
    std::ofstream os(run_dir + "/config.txt");
    if (!os) throw IoError("cannot write " + run_dir + "/config.txt");
    os << serialize_config(cfg);
}

int cmd_train(const ConfigCollector& col) {
    RunConfig cfg = col.resolve();
    cfg.validate();
    auto [dx, dy] = load_training_data(cfg);
    std::string run_dir = make_run_dir(cfg.out_root, "train");
    echo_config(cfg, run_dir);
    std::printf(
        "MixerGAN training | lr=%g batch=%lld channels=%lld image=%lld patch=%lld "
        "lambda_cyc=%g lambda_perc=%g iters=%lld seed=%llu\n",
        cfg.lr, static_cast<long long>(cfg.batch_size), static_cast<long long>(cfg.channels),
        static_cast<long long>(cfg.image_size), static_cast<long long>(cfg.patch_size),
        cfg.lambda_cyc, cfg.lambda_perc, static_cast<long long>(cfg.iterations),
        static_cast<unsigned long long>(cfg.seed));
    std::printf("run directory: %s\n", run_dir.c_str());

    Trainer trainer(cfg, std::move(dx), std::move(dy));
    if (!cfg.resume.empty()) {
        trainer.restore(load_checkpoint(cfg.resume));
        std::printf("resumed from %s at iteration %lld\n", cfg.resume.c_str(),
                    static_cast<long long>(trainer.iteration()));
    }
    trainer.train(run_dir);
    std::printf("done: %lld iterations\n", static_cast<long long>(trainer.iteration()));
    return 0;
}

int cmd_translate(const ConfigCollector& col, const std::string& checkpoint_path,
                  const std::string& input_dir, const std::string& output_dir,
                  const std::string& direction) {
    RunConfig cfg = col.resolve();
    Checkpoint ck = load_checkpoint(checkpoint_path);
    uint64_t want = geometry_hash(cfg);
    if (ck.geometry_hash != want) {
        std::fprintf(stderr,
                     "translate: checkpoint geometry hash %llu does not match current "
                     "configuration hash %llu; refusing\n",
                     static_cast<unsigned long long>(ck.geometry_hash),
                     static_cast<unsigned long long>(want));
        return 2;
    }
    TrainerModels models = make_models(cfg);
    load_model_params(models, ck);
    const GeneratorParams& gen = (direction == "X2Y") ? models.g_xy : models.g_yx;

    auto files = list_ppm_files(input_dir);
    fs::create_directories(output_dir);
    if (files.empty()) {
        std::fprintf(stderr, "translate: warning: no .ppm inputs in %s\n", input_dir.c_str());
        return 0;
    }
    for (const auto& f : files) {
        ImageRecord img = load_image(f);
        if (img.height != cfg.image_size || img.width != cfg.image_size)
            throw DimensionError("translate: " + f + " is " + std::to_string(img.width) + "x" +
                                 std::to_string(img.height) + " but the model expects " +
                                 std::to_string(cfg.image_size) + "x" +
                                 std::to_string(cfg.image_size));
        Tensor x = images_to_tensor({img}, {0});
        Tensor y = generator_forward(x, gen);
        ImageRecord out = tensor_to_images(y)[0];
        std::string name = fs::path(f).filename().string();
        save_image(out, output_dir + "/" + name);
    }
    std::printf("translated %zu images (%s)\n", files.size(), direction.c_str());
    return 0;
}

std::vector<int64_t> parse_sweep_values(const std::string& text) {
    std::vector<int64_t> values;
    size_t colon = text.find(':');
    if (colon != std::string::npos) {
        int64_t lo = std::stoll(text.substr(0, colon));
        int64_t hi = std::stoll(text.substr(colon + 1));
        if (lo < 1 || hi < lo) throw ValidationError("sweep: bad range " + text);
        for (int64_t v = lo; v <= hi; v *= 2) values.push_back(v);
        return values;
    }
    size_t pos = 0;
    while (pos < text.size()) {
        size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        values.push_back(std::stoll(text.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return values;
}

int cmd_analyze_cost(const std::string& kind, int64_t n, int64_t c, int64_t b, int64_t h,
                     int64_t k, int64_t e, const std::vector<std::string>& sweep_args,
                     int64_t patch, int64_t mult, const std::string& csv_path,
                     const std::string& plot_path) {
    BlockSpec spec;
    spec.kind = block_kind_from(kind);
    spec.tokens = n;
    spec.channels = c;
    spec.batch = b;
    spec.heads = h;
    spec.kernel = k;
    spec.expansion = e;

    std::string csv;
    if (!sweep_args.empty()) {
        auto rows = sweep(spec, sweep_args[0], parse_sweep_values(sweep_args[1]));
        csv = sweep_csv(rows);
    } else {
        csv = sweep_csv({SweepRow{spec.kind, "-", 0, params_of(spec), activations_of(spec)}});
    }
    if (csv_path.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        std::ofstream os(csv_path);
        os << csv;
        std::printf("wrote %s\n", csv_path.c_str());
    }
    if (!plot_path.empty()) {
        std::ofstream os(plot_path);
        os << sweep_plot_script(csv_path.empty() ? "sweep.csv" : csv_path);
        std::printf("wrote %s\n", plot_path.c_str());
    }
    std::printf("patch projection retention: m/p^2 = %lld/%lld^2 = %g\n",
                static_cast<long long>(mult), static_cast<long long>(patch),
                retention_ratio(patch, mult));
    return 0;
}

int cmd_metrics(const ConfigCollector& col, const std::string& real_dir,
                const std::string& fake_dir, const std::string& csv_path) {
    RunConfig cfg = col.resolve();
    FeatureExtractor ex(cfg.extractor_seed);
    FeatureSet real = extract_features(load_image_dir(real_dir), ex);
    FeatureSet fake = extract_features(load_image_dir(fake_dir), ex);
    KidParams params;
    params.subset_size = cfg.kid_subset_size;
    params.n_subsets = cfg.kid_subsets;
    params.seed = cfg.seed;
    MetricReport rep = compute_metrics(real, fake, params);
    std::fputs(rep.text().c_str(), stdout);
    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        os << rep.csv();
    }
    return 0;
}

int cmd_synth_data(uint64_t seed, int64_t count, int64_t test_count, int64_t size,
                   const std::string& out_dir) {
    for (const char* sub : {"trainA", "trainB", "testA", "testB"})
        fs::create_directories(out_dir + "/" + sub);
    auto write_domain = [&](const SyntheticDomainSpec& spec, const std::string& sub) {
        auto images = synthesize_domain(spec);
        for (size_t i = 0; i < images.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "%04zu.ppm", i);
            save_image(images[i], out_dir + "/" + sub + "/" + name);
        }
    };
    write_domain(red_domain_spec(seed, count, size), "trainA");
    write_domain(blue_domain_spec(seed, count, size), "trainB");
    write_domain(red_domain_spec(derive_seed(seed, "test"), test_count, size), "testA");
    write_domain(blue_domain_spec(derive_seed(seed, "test"), test_count, size), "testB");
    std::printf("wrote %lld+%lld images per domain under %s\n", static_cast<long long>(count),
                static_cast<long long>(test_count), out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MixerGAN: mixer-block unpaired image-to-image translation"};
    app.require_subcommand(1);

    ConfigCollector train_col;
    CLI::App* train = app.add_subcommand("train", "train the translation model");
    add_config_options(train, train_col);

    ConfigCollector tr_col;
    std::string ck_path, in_dir, out_dir, direction = "X2Y";
    CLI::App* translate = app.add_subcommand("translate", "batch inference from a checkpoint");
    add_config_options(translate, tr_col);
    translate->add_option("--checkpoint", ck_path, "checkpoint file")->required();
    translate->add_option("--input", in_dir, "directory of .ppm inputs")->required();
    translate->add_option("--output", out_dir, "output directory")->required();
    translate->add_option("--direction", direction, "X2Y or Y2X")
        ->check(CLI::IsMember({"X2Y", "Y2X"}));

    std::string kind = "tm";
    int64_t cn = 64, cc = 128, cb = 1, ch = 8, ck_kernel = 3, ce = 2, patch = 8, mult = 2;
    std::vector<std::string> sweep_args;
    std::string cost_csv, cost_plot;
    CLI::App* cost = app.add_subcommand("analyze-cost", "parameter/activation cost model");
    cost->add_option("--kind", kind, "sa | tm | conv");
    cost->add_option("--n", cn, "tokens");
    cost->add_option("--c", cc, "channels");
    cost->add_option("--b", cb, "batch");
    cost->add_option("--heads", ch, "attention heads");
    cost->add_option("--kernel", ck_kernel, "conv kernel size");
    cost->add_option("--expansion", ce, "token-mixer hidden expansion");
    cost->add_option("--sweep", sweep_args, "axis and values, e.g. n 64:512 or n 64,96,128")
        ->expected(2);
    cost->add_option("--patch-size", patch, "patch size for the retention report");
    cost->add_option("--channel-mult", mult, "channel multiplier for the retention report");
    cost->add_option("--csv", cost_csv, "write CSV here instead of stdout");
    cost->add_option("--plot", cost_plot, "write a gnuplot script here");

    ConfigCollector met_col;
    std::string real_dir, fake_dir, met_csv;
    CLI::App* metrics_cmd = app.add_subcommand("metrics", "KID/FID between two image sets");
    add_config_options(metrics_cmd, met_col);
    metrics_cmd->add_option("--real", real_dir, "directory of real .ppm images")->required();
    metrics_cmd->add_option("--fake", fake_dir, "directory of generated .ppm images")->required();
    metrics_cmd->add_option("--csv", met_csv, "write the report as CSV here");

    uint64_t sd_seed = 0;
    int64_t sd_count = 64, sd_test = 8, sd_size = 32;
    std::string sd_out = "data";
    CLI::App* synth = app.add_subcommand("synth-data", "write the synthetic dataset as PPM files");
    synth->add_option("--seed", sd_seed, "seed");
    synth->add_option("--count", sd_count, "train images per domain");
    synth->add_option("--test-count", sd_test, "test images per domain");
    synth->add_option("--size", sd_size, "image extent");
    synth->add_option("--out", sd_out, "dataset root to create");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(train_col);
        if (translate->parsed())
            return cmd_translate(tr_col, ck_path, in_dir, out_dir, direction);
        if (cost->parsed())
            return cmd_analyze_cost(kind, cn, cc, cb, ch, ck_kernel, ce, sweep_args, patch, mult,
                                    cost_csv, cost_plot);
        if (metrics_cmd->parsed()) return cmd_metrics(met_col, real_dir, fake_dir, met_csv);
        if (synth->parsed()) return cmd_synth_data(sd_seed, sd_count, sd_test, sd_size, sd_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
