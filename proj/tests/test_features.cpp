#include "dcf/error.hpp"
#include "dcf/features.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace dcf;
using namespace dcf::testing;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::vector<std::uint32_t> dims, double scale = 1.0) {
    Tensor t{std::move(dims), {}};
    t.data.resize(t.element_count());
    for (auto& v : t.data) v = static_cast<float>(uniform(rng, -scale, scale));
    return t;
}

FeatureMap random_map(std::mt19937_64& rng, int h, int w, int c) {
    FeatureMap f(h, w, c);
    for (auto& v : f.data) v = static_cast<float>(uniform(rng, -1, 1));
    return f;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("dcf_test_" + name)).string();
}

}  // namespace

TEST_CASE("weight container round trip and errors") {
    std::mt19937_64 rng(1);
    WeightStore store;
    store.insert("a", random_tensor(rng, {2, 3}));
    store.insert("b.weight", random_tensor(rng, {3, 3, 2, 4}));
    store.insert("scalar", random_tensor(rng, {1}));
    const std::string path = temp_path("roundtrip.dcfw");
    save_weight_container(store, path);
    const WeightStore back = load_weight_container(path);
    REQUIRE(back.tensors().size() == 3);
    for (const auto& [name, t] : store.tensors()) {
        CHECK(back.get(name).dims == t.dims);
        CHECK(std::memcmp(back.get(name).data.data(), t.data.data(), t.data.size() * 4) == 0);
    }

    std::string bytes = encode_weight_container(store);
    std::string bad = bytes;
    bad.replace(0, 4, "XXXX");
    try {
        decode_weight_container(bad);
        FAIL("expected bad magic");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadMagic);
        CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
    }
    std::string version = bytes;
    version[4] = 2;
    CHECK_THROWS_AS(decode_weight_container(version), Error);
    try {
        decode_weight_container(bytes.substr(0, bytes.size() - 3));
        FAIL("expected truncation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Truncated);
    }

    WeightStore vgg = random_vgg16_weights(3);
    CHECK_NOTHROW(validate_vgg16(vgg));
    WeightStore missing;
    for (const auto& [name, t] : vgg.tensors())
        if (name != "block3.conv2.weight") missing.insert(name, t);
    try {
        validate_vgg16(missing);
        FAIL("expected missing tensor");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingTensor);
        CHECK(std::string(e.what()).find("block3.conv2.weight") != std::string::npos);
    }
    WeightStore wrong;
    for (const auto& [name, t] : vgg.tensors()) wrong.insert(name, name == "block1.conv1.bias" ? Tensor{{3}, {0, 0, 0}} : t);
    try {
        validate_vgg16(wrong);
        FAIL("expected shape mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShapeMismatch);
        CHECK(std::string(e.what()).find("block1.conv1.bias") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("conv3x3") {
    SUBCASE("identity kernel") {
        std::mt19937_64 rng(2);
        const FeatureMap in = random_map(rng, 5, 7, 1);
        Tensor k{{3, 3, 1, 1}, std::vector<float>(9, 0.0f)};
        k.data[4] = 1.0f;
        const Tensor b{{1}, {0.0f}};
        CHECK(conv3x3(in, k, b, false).data == in.data);
    }
    SUBCASE("zero padding arithmetic") {
        const FeatureMap ones(4, 4, 1, 1.0f);
        const Tensor k{{3, 3, 1, 1}, std::vector<float>(9, 1.0f)};
        const FeatureMap out = conv3x3(ones, k, Tensor{{1}, {0.0f}}, false);
        CHECK(out.at(0, 0, 0) == 4.0f);
        CHECK(out.at(0, 3, 0) == 4.0f);
        CHECK(out.at(0, 1, 0) == 6.0f);
        CHECK(out.at(1, 1, 0) == 9.0f);
        CHECK(out.at(2, 2, 0) == 9.0f);
    }
    SUBCASE("naive oracle") {
        std::mt19937_64 rng(4);
        const FeatureMap in = random_map(rng, 8, 8, 3);
        const Tensor k = random_tensor(rng, {3, 3, 3, 5});
        const Tensor b = random_tensor(rng, {5});
        const std::vector<double> in_d(in.data.begin(), in.data.end());
        CHECK(relative_error(conv3x3(in, k, b, false), naive_conv(in_d, 8, 8, 3, k, b, 5, false)) < 1e-5);
        CHECK(relative_error(conv3x3(in, k, b, true), naive_conv(in_d, 8, 8, 3, k, b, 5, true)) < 1e-5);
    }
    SUBCASE("linearity up to the bias term") {
        std::mt19937_64 rng(5);
        const FeatureMap in = random_map(rng, 6, 6, 4);
        const Tensor k = random_tensor(rng, {3, 3, 4, 3});
        const Tensor b = random_tensor(rng, {3});
        const double alpha = 2.5;
        FeatureMap scaled = in;
        for (auto& v : scaled.data) v *= static_cast<float>(alpha);
        const FeatureMap y1 = conv3x3(in, k, b, false);
        const FeatureMap ya = conv3x3(scaled, k, b, false);
        for (std::size_t p = 0; p < in.pixels(); ++p)
            for (int c = 0; c < 3; ++c) {
                const double want = alpha * y1.data[p * 3 + c] - (alpha - 1) * b.data[c];
                CHECK(std::abs(ya.data[p * 3 + c] - want) < 1e-5);
            }
    }
    SUBCASE("channel mismatch") {
        const FeatureMap in(4, 4, 2);
        CHECK_THROWS_AS(conv3x3(in, Tensor{{3, 3, 3, 1}, std::vector<float>(27)}, Tensor{{1}, {0}}, false), Error);
    }
}

TEST_CASE("maxpool2") {
    FeatureMap block(2, 2, 1);
    block.data = {1, 2, 3, 4};
    CHECK(maxpool2(block).data == std::vector<float>{4});
    const FeatureMap c = maxpool2(FeatureMap(6, 4, 2, 0.3f));
    CHECK(c.height == 3);
    CHECK(c.width == 2);
    for (float v : c.data) CHECK(v == 0.3f);
    std::mt19937_64 rng(6);
    const FeatureMap r = random_map(rng, 16, 16, 3);
    const auto want = naive_pool(std::vector<double>(r.data.begin(), r.data.end()), 16, 16, 3);
    CHECK(relative_error(maxpool2(r), want) == 0.0);
    CHECK_THROWS_AS(maxpool2(FeatureMap(5, 4, 1)), Error);
}

TEST_CASE("identity pyramid") {
    SUBCASE("constant image") {
        const Image img(40, 50, 3, 0.6f);
        const FeaturePyramid p = extract_pyramid_identity(img);
        for (int s = 0; s < kPyramidScales; ++s) {
            CHECK(p[s].height == (48 >> s));
            CHECK(p[s].width == (64 >> s));
            CHECK(p.channels(s) == 3);
            for (float v : p[s].data) CHECK(v == doctest::Approx(0.6f));
        }
    }
    SUBCASE("f_0 is the input, checkerboard halves to 0.5") {
        std::mt19937_64 rng(7);
        const Image img = random_map(rng, 32, 32, 3);
        CHECK(extract_pyramid_identity(img)[0].data == img.data);
        Image board(32, 32, 3);
        for (int i = 0; i < 32; ++i)
            for (int j = 0; j < 32; ++j)
                for (int c = 0; c < 3; ++c) board.at(i, j, c) = static_cast<float>((i + j) % 2);
        const FeaturePyramid pb = extract_pyramid_identity(board);
        for (float v : pb[1].data) CHECK(v == 0.5f);
    }
    SUBCASE("norms cached") {
        std::mt19937_64 rng(8);
        const FeaturePyramid p = extract_pyramid_identity(random_map(rng, 16, 16, 3));
        for (int s = 0; s < kPyramidScales; ++s) {
            double sum = 0;
            for (float v : p[s].data) sum += double(v) * v;
            CHECK(p.norms[s] == doctest::Approx(std::sqrt(sum)));
        }
    }
}

TEST_CASE("conv pyramid") {
    SUBCASE("zero weights give the rectified bias pattern") {
        WeightStore zero;
        const WeightStore base = random_vgg16_weights(1);
        for (const auto& [name, t] : base.tensors()) {
            Tensor z = t;
            if (name.find("weight") != std::string::npos) std::fill(z.data.begin(), z.data.end(), 0.0f);
            zero.insert(name, z);
        }
        std::mt19937_64 rng(9);
        const FeaturePyramid p = extract_pyramid_conv(random_map(rng, 32, 32, 3), zero);
        const int last_conv[kPyramidScales][2] = {{1, 2}, {2, 2}, {3, 3}, {4, 3}, {5, 3}};
        for (int s = 0; s < kPyramidScales; ++s) {
            const std::string name = "block" + std::to_string(last_conv[s][0]) + ".conv" +
                                     std::to_string(last_conv[s][1]) + ".bias";
            const Tensor& b = zero.get(name);
            for (std::size_t px = 0; px < p[s].pixels(); ++px)
                for (int c = 0; c < p.channels(s); ++c)
                    REQUIRE(p[s].data[px * p.channels(s) + c] == std::max(b.data[c], 0.0f));
        }
    }
    SUBCASE("topology arithmetic") {
        const auto layers = vgg16_layers();
        CHECK(layers.size() == 13);
        int sizes[kPyramidScales] = {224, 112, 56, 28, 14};
        const int widths[kPyramidScales] = {64, 128, 256, 512, 512};
        for (int s = 0; s < kPyramidScales; ++s) {
            int last_width = 0;
            for (const auto& l : layers)
                if (l.block == s) last_width = l.c_out;
            CHECK(last_width == widths[s]);
            CHECK((224 >> s) == sizes[s]);
        }
    }
    SUBCASE("matches a straight-line forward pass") {
        const WeightStore w = random_vgg16_weights(11);
        std::mt19937_64 rng(12);
        Image img(32, 32, 3);
        for (auto& v : img.data) v = static_cast<float>(uniform(rng));
        const FeaturePyramid p = extract_pyramid_conv(img, w);

        const double mean[3] = {0.485, 0.456, 0.406}, sd[3] = {0.229, 0.224, 0.225};
        std::vector<double> x(img.data.size());
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = (img.data[k] - mean[k % 3]) / sd[k % 3];
        int h = 32, c = 3;
        const int convs[5] = {2, 2, 3, 3, 3}, widths[5] = {64, 128, 256, 512, 512};
        for (int b = 0; b < 5; ++b) {
            for (int k = 0; k < convs[b]; ++k) {
                const std::string base = "block" + std::to_string(b + 1) + ".conv" + std::to_string(k + 1);
                x = naive_conv(x, h, h, c, w.get(base + ".weight"), w.get(base + ".bias"), widths[b], true);
                c = widths[b];
            }
            REQUIRE(p[b].height == h);
            REQUIRE(p.channels(b) == c);
            CHECK(relative_error(p[b], x) < 1e-4);
            if (b < 4) {
                x = naive_pool(x, h, h, c);
                h /= 2;
            }
        }
    }
    SUBCASE("deterministic") {
        const WeightStore w = random_vgg16_weights(2);
        const Image img(16, 16, 3, 0.4f);
        const auto a = extract_pyramid_conv(img, w);
        const auto b = extract_pyramid_conv(img, w);
        for (int s = 0; s < kPyramidScales; ++s) CHECK(a[s].data == b[s].data);
    }
}
