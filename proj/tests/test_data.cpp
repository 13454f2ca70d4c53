#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vnn/dataset.hpp"
#include "vnn/error.hpp"

using namespace vnn;

namespace {

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> idx_images(std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<std::uint8_t>& pixels) {
    std::vector<std::uint8_t> out;
    put32(out, 0x00000803);
    put32(out, n);
    put32(out, rows);
    put32(out, cols);
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> out;
    put32(out, 0x00000801);
    put32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

}  // namespace

TEST_CASE("IDX parsing") {
    SUBCASE("two 2x2 images scale to [0,1]") {
        auto images = idx_images(2, 2, 2, {0, 255, 255, 0, 0, 0, 255, 255});
        auto labels = idx_labels({7, 3});
        Dataset d = parse_mnist(images, labels);
        REQUIRE(d.size() == 2);
        CHECK(d.input_dim() == 4);
        CHECK(d.samples()[0].input == std::vector<double>{0.0, 1.0, 1.0, 0.0});
        CHECK(d.samples()[1].input == std::vector<double>{0.0, 0.0, 1.0, 1.0});
        CHECK(d.samples()[0].label == 7);
        CHECK(d.samples()[1].label == 3);
        CHECK(d.count(Split::Test) == 2);
    }
    SUBCASE("count mismatch") {
        auto images = idx_images(3, 1, 1, {1, 2, 3});
        auto labels = idx_labels({1, 2});
        CHECK_THROWS_AS(parse_mnist(images, labels), FormatError);
    }
    SUBCASE("wrong magic") {
        auto images = idx_images(1, 1, 1, {1});
        images[3] = 0x01;
        CHECK_THROWS_AS(parse_mnist(images, idx_labels({1})), FormatError);
    }
    SUBCASE("truncated payload names the offset") {
        auto images = idx_images(2, 2, 2, {0, 1, 2});
        try {
            parse_mnist(images, idx_labels({1, 2}));
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("offset 19") != std::string::npos);
        }
    }
    SUBCASE("first-400 protocol keeps 400 items, half validation half test") {
        std::vector<std::uint8_t> px(450);
        std::vector<std::uint8_t> lab(450);
        for (std::size_t i = 0; i < 450; ++i) {
            px[i] = static_cast<std::uint8_t>(i % 256);
            lab[i] = static_cast<std::uint8_t>(i % 10);
        }
        MnistOptions opts;
        opts.paper_split = true;
        Dataset d = parse_mnist(idx_images(450, 1, 1, px), idx_labels(lab), opts);
        CHECK(d.size() == 400);
        CHECK(d.count(Split::Validation) == 200);
        CHECK(d.count(Split::Test) == 200);
        CHECK(d.splits()[199] == Split::Validation);
        CHECK(d.splits()[200] == Split::Test);
    }
    SUBCASE("normalisation keeps the brightest pixel") {
        auto images = idx_images(1, 1, 4, {10, 200, 30, 199});
        Dataset d = parse_mnist(images, idx_labels({0}));
        const auto& v = d.samples()[0].input;
        CHECK(std::max_element(v.begin(), v.end()) - v.begin() == 1);
    }
}

TEST_CASE("synth_blobs") {
    SUBCASE("60/20/20 split") {
        Dataset d = synth_blobs(10, 3, 2, 5);
        CHECK(d.count(Split::Train) == 6);
        CHECK(d.count(Split::Validation) == 2);
        CHECK(d.count(Split::Test) == 2);
        CHECK(d.size() == 10);
    }
    SUBCASE("deterministic per seed") {
        CHECK(synth_blobs(50, 4, 3, 9) == synth_blobs(50, 4, 3, 9));
        CHECK(!(synth_blobs(50, 4, 3, 9) == synth_blobs(50, 4, 3, 10)));
    }
    SUBCASE("clipped to the unit box") {
        Dataset d = synth_blobs(500, 2, 2, 1, 0.5);
        for (const auto& s : d.samples()) {
            for (double v : s.input) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
    SUBCASE("n < classes") { CHECK_THROWS_AS(synth_blobs(2, 2, 3, 1), ConfigError); }
}

TEST_CASE("CSV export and import") {
    Dataset d = synth_blobs(20, 3, 2, 4);
    auto path = std::filesystem::temp_directory_path() / "vnn_data.csv";
    export_csv(d.subset(Split::Test), path);
    CHECK(import_csv(path) == d.subset(Split::Test));
    std::filesystem::remove(path);
}
