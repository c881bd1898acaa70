#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mixergan/config.hpp"

using namespace mixergan;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& content) {
    static int counter = 0;
    std::string p = (fs::temp_directory_path() /
                     ("mixergan_cfg_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++) + ".txt"))
                        .string();
    std::ofstream os(p);
    os << content;
    return p;
}

}  // namespace

TEST_CASE("defaults validate and describe the desk-scale task") {
    RunConfig cfg;
    cfg.validate();
    CHECK(cfg.image_size == 32);
    CHECK(cfg.patch_size == 2);
    CHECK(cfg.channels == 64);
    CHECK(cfg.batch_size == 4);
    CHECK(cfg.lr == doctest::Approx(3e-4));
    CHECK(cfg.lambda_cyc == doctest::Approx(10.0));
    CHECK(cfg.effective_decay_start() == 1000);
}

TEST_CASE("file parsing with comments, blanks, and overrides") {
    std::string path = write_temp(
        "# comment\n"
        "\n"
        "lr = 0.001\n"
        "channels = 128\n"
        "mixer_order = channel_first\n"
        "synthetic = true\n");
    RunConfig cfg;
    load_config_file(cfg, path);
    CHECK(cfg.lr == doctest::Approx(0.001));
    CHECK(cfg.channels == 128);
    CHECK(cfg.mixer_order == "channel_first");
    CHECK(cfg.synthetic);

    config_set(cfg, "lr", "0.0003");  // later wins
    CHECK(cfg.lr == doctest::Approx(3e-4));
}

TEST_CASE("unknown keys and malformed values are errors") {
    RunConfig cfg;
    CHECK_THROWS_WITH_AS(config_set(cfg, "learning_rate", "0.1"),
                         doctest::Contains("learning_rate"), ValidationError);
    CHECK_THROWS_AS(config_set(cfg, "iterations", "ten"), ValidationError);
    CHECK_THROWS_AS(config_set(cfg, "synthetic", "maybe"), ValidationError);
    std::string bad = write_temp("lr 0.001\n");
    CHECK_THROWS_AS(load_config_file(cfg, bad), ValidationError);
    CHECK_THROWS_AS(load_config_file(cfg, "/definitely/missing/file.txt"), IoError);
}

TEST_CASE("serialization is canonical and reparses to the same config") {
    RunConfig cfg;
    cfg.lr = 0.0007;
    cfg.seed = 99;
    cfg.data_root = "/tmp/data";
    std::string text = serialize_config(cfg);
    CHECK(serialize_config(cfg) == text);

    RunConfig back;
    load_config_file(back, write_temp(text));
    CHECK(serialize_config(back) == text);
    // every declared key appears
    for (const auto& key : config_keys())
        CHECK(text.find(key + " = ") != std::string::npos);
}

TEST_CASE("geometry hash tracks architecture keys only") {
    RunConfig a;
    RunConfig b = a;
    b.lr = 0.123;  // optimization detail: same geometry
    CHECK(geometry_hash(a) == geometry_hash(b));
    b.patch_size = 4;
    b.image_size = 48;
    CHECK(geometry_hash(a) != geometry_hash(b));
    RunConfig c = a;
    c.channels = 128;
    CHECK(geometry_hash(a) != geometry_hash(c));
}

TEST_CASE("validation catches bad combinations") {
    RunConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = RunConfig{};
    cfg.image_size = 30;  // not divisible by 4p
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = RunConfig{};
    cfg.decay_start = 5000;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = RunConfig{};
    cfg.mixer_order = "sideways";
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
