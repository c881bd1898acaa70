#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "mixergan/data_io.hpp"

using namespace mixergan;
namespace fs = std::filesystem;

namespace {

std::string temp_dir() {
    static int counter = 0;
    std::string d = (fs::temp_directory_path() / ("mixergan_test_" + std::to_string(::getpid()) +
                                                  "_" + std::to_string(counter++)))
                        .string();
    fs::create_directories(d);
    return d;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("synthesize_domain is deterministic and respects the palette") {
    auto spec_a = red_domain_spec(5, 6, 32);
    auto a1 = synthesize_domain(spec_a);
    auto a2 = synthesize_domain(spec_a);
    REQUIRE(a1.size() == 6);
    for (size_t i = 0; i < a1.size(); ++i) CHECK(a1[i].pixels == a2[i].pixels);

    auto b = synthesize_domain(blue_domain_spec(5, 6, 32));
    auto channel_mean = [](const ImageRecord& img, int c) {
        double s = 0;
        int64_t hw = img.height * img.width;
        for (int64_t i = 0; i < hw; ++i) s += img.pixels[c * hw + i];
        return s / hw;
    };
    for (const auto& img : a1) CHECK(channel_mean(img, 0) > channel_mean(img, 2));
    for (const auto& img : b) CHECK(channel_mean(img, 2) > channel_mean(img, 0));

    auto bad = spec_a;
    bad.count = 0;
    CHECK_THROWS_AS(synthesize_domain(bad), ValidationError);
}

TEST_CASE("synthesized images satisfy the record invariants") {
    for (const auto& img : synthesize_domain(red_domain_spec(1, 4, 32))) {
        img.validate();
        for (double v : img.pixels) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("ppm round-trip is bit-exact at the 8-bit level") {
    std::string dir = temp_dir();
    auto images = synthesize_domain(red_domain_spec(9, 2, 32));
    std::string p1 = dir + "/img.ppm", p2 = dir + "/img2.ppm";
    save_image(images[0], p1);
    ImageRecord loaded = load_image(p1);
    save_image(loaded, p2);
    CHECK(read_file(p1) == read_file(p2));
    ImageRecord again = load_image(p2);
    CHECK(again.pixels == loaded.pixels);
}

TEST_CASE("all-black image writes zero payload bytes") {
    std::string dir = temp_dir();
    ImageRecord img;
    img.height = img.width = 4;
    img.pixels.assign(3 * 16, -1.0);
    save_image(img, dir + "/black.ppm");
    std::string bytes = read_file(dir + "/black.ppm");
    std::string header = "P6\n4 4\n255\n";
    REQUIRE(bytes.substr(0, header.size()) == header);
    for (size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == '\0');
    CHECK(bytes.size() == header.size() + 48);
}

TEST_CASE("minimal P6 header parses to a 2x2 image") {
    std::string dir = temp_dir();
    std::string path = dir + "/min.ppm";
    {
        std::ofstream os(path, std::ios::binary);
        os << "P6\n2 2\n255\n";
        for (int i = 0; i < 12; ++i) os.put(static_cast<char>(i * 20));
    }
    ImageRecord img = load_image(path);
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.pixels[0 * 4 + 0] == doctest::Approx(0.0 / 127.5 - 1.0));
}

TEST_CASE("malformed or truncated ppm files raise ParseError with an offset") {
    std::string dir = temp_dir();
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream os(dir + "/" + name, std::ios::binary);
        os << content;
        return dir + "/" + name;
    };
    CHECK_THROWS_AS(load_image(write("notp6.ppm", "P5\n2 2\n255\n")), ParseError);
    CHECK_THROWS_AS(load_image(write("badw.ppm", "P6\nxx 2\n255\n")), ParseError);
    std::string truncated = "P6\n2 2\n255\n";
    truncated += std::string(5, '\0');  // needs 12 payload bytes
    CHECK_THROWS_AS(load_image(write("trunc.ppm", truncated)), ParseError);
    std::string overlong = "P6\n2 2\n255\n";
    overlong += std::string(20, '\0');
    CHECK_THROWS_AS(load_image(write("long.ppm", overlong)), ParseError);
    try {
        load_image(write("t2.ppm", truncated));
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
}

TEST_CASE("sampler draws each image exactly once per epoch") {
    UnpairedSampler s(0, "X", 12, 4);
    std::set<int64_t> seen;
    for (int b = 0; b < 3; ++b)
        for (int64_t idx : s.next_batch()) seen.insert(idx);
    CHECK(seen.size() == 12);
}

TEST_CASE("sampler sequences are reproducible and domain streams independent") {
    auto collect = [](UnpairedSampler& s, int batches) {
        std::vector<int64_t> out;
        for (int b = 0; b < batches; ++b)
            for (int64_t i : s.next_batch()) out.push_back(i);
        return out;
    };
    UnpairedSampler a1(42, "X", 16, 4), a2(42, "X", 16, 4);
    CHECK(collect(a1, 6) == collect(a2, 6));

    UnpairedSampler x(42, "X", 16, 4), y(42, "Y", 16, 4);
    CHECK(collect(x, 4) != collect(y, 4));
}

TEST_CASE("sampler seek reconstructs mid-stream state") {
    UnpairedSampler cont(7, "X", 10, 3);
    for (int i = 0; i < 5; ++i) cont.next_batch();
    UnpairedSampler jumped(7, "X", 10, 3);
    jumped.seek(5);
    for (int i = 0; i < 7; ++i) CHECK(cont.next_batch() == jumped.next_batch());
}

TEST_CASE("sampler validates sizes") {
    CHECK_THROWS_AS(UnpairedSampler(0, "X", 0, 1), ValidationError);
    CHECK_THROWS_AS(UnpairedSampler(0, "X", 4, 8), ValidationError);
}

TEST_CASE("image/tensor round trip") {
    auto images = synthesize_domain(red_domain_spec(11, 3, 32));
    Tensor t = images_to_tensor(images, {1, 2});
    CHECK(t.shape() == Shape{2, 3, 32, 32});
    auto back = tensor_to_images(t);
    CHECK(back[0].pixels == images[1].pixels);
    CHECK(back[1].pixels == images[2].pixels);
}

TEST_CASE("list_ppm_files sorts and load_image_dir loads") {
    std::string dir = temp_dir();
    auto images = synthesize_domain(red_domain_spec(13, 3, 32));
    save_image(images[0], dir + "/b.ppm");
    save_image(images[1], dir + "/a.ppm");
    save_image(images[2], dir + "/c.ppm");
    auto files = list_ppm_files(dir);
    REQUIRE(files.size() == 3);
    CHECK(files[0].ends_with("a.ppm"));
    CHECK(load_image_dir(dir).size() == 3);
    CHECK_THROWS_AS(list_ppm_files(dir + "/missing"), IoError);
}
