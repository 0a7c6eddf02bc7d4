#include "dcf/features.hpp"

#include "dcf/error.hpp"
#include "dcf/file_io.hpp"
#include "dcf/resample.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>

namespace dcf {

static_assert(std::endian::native == std::endian::little, "DCFW I/O assumes a little-endian host");

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

void WeightStore::insert(const std::string& name, Tensor t) {
    if (t.data.size() != t.element_count()) {
        throw Error(ErrorCode::ShapeMismatch, "tensor '" + name + "': data size does not match dims");
    }
    tensors_[name] = std::move(t);
}

const Tensor& WeightStore::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw Error(ErrorCode::MissingTensor, "missing tensor '" + name + "'");
    return it->second;
}

namespace {

constexpr std::uint32_t kContainerVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    void take(void* dst, std::size_t n, const std::string& what) {
        if (bytes_.size() - pos_ < n) throw Error(ErrorCode::Truncated, "truncated payload while reading " + what);
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32(const std::string& what) {
        std::uint32_t v;
        take(&v, 4, what);
        return v;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_weight_container(const WeightStore& store) {
    std::string out = "DCFW";
    put_u32(out, kContainerVersion);
    put_u32(out, static_cast<std::uint32_t>(store.tensors().size()));
    for (const auto& [name, t] : store.tensors()) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) put_u32(out, d);
        out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
    }
    return out;
}

WeightStore decode_weight_container(const std::string& bytes) {
    Reader r(bytes);
    char magic[4];
    r.take(magic, 4, "magic");
    if (std::memcmp(magic, "DCFW", 4) != 0) throw Error(ErrorCode::BadMagic, "bad magic");
    const auto version = r.u32("version");
    if (version != kContainerVersion) {
        throw Error(ErrorCode::BadVersion, "unsupported container version " + std::to_string(version));
    }
    const auto count = r.u32("tensor count");
    WeightStore store;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto name_len = r.u32("name length");
        if (name_len > r.remaining()) throw Error(ErrorCode::Truncated, "truncated payload while reading tensor name");
        std::string name(name_len, '\0');
        r.take(name.data(), name_len, "tensor name");
        Tensor t;
        const auto ndim = r.u32("'" + name + "' rank");
        if (ndim > 8) throw Error(ErrorCode::ShapeMismatch, "tensor '" + name + "': rank " + std::to_string(ndim));
        t.dims.resize(ndim);
        for (auto& d : t.dims) d = r.u32("'" + name + "' dims");
        const std::size_t n = t.element_count();
        if (n > r.remaining() / sizeof(float)) {
            throw Error(ErrorCode::Truncated, "truncated payload in tensor '" + name + "'");
        }
        t.data.resize(n);
        r.take(t.data.data(), n * sizeof(float), "'" + name + "' data");
        store.insert(name, std::move(t));
    }
    return store;
}

WeightStore load_weight_container(const std::string& path) {
    return decode_weight_container(read_text_file(path));
}

void save_weight_container(const WeightStore& store, const std::string& path) {
    write_file_atomic(path, encode_weight_container(store));
}

std::vector<ConvLayerSpec> vgg16_layers() {
    constexpr int convs[kPyramidScales] = {2, 2, 3, 3, 3};
    constexpr int widths[kPyramidScales] = {64, 128, 256, 512, 512};
    std::vector<ConvLayerSpec> layers;
    int c_in = 3;
    for (int b = 0; b < kPyramidScales; ++b) {
        for (int c = 0; c < convs[b]; ++c) {
            const std::string base = "block" + std::to_string(b + 1) + ".conv" + std::to_string(c + 1);
            layers.push_back({base + ".weight", base + ".bias", b, c_in, widths[b]});
            c_in = widths[b];
        }
    }
    return layers;
}

void validate_vgg16(const WeightStore& store) {
    auto expect = [&](const std::string& name, std::vector<std::uint32_t> dims) {
        const Tensor& t = store.get(name);
        if (t.dims != dims) throw Error(ErrorCode::ShapeMismatch, "shape mismatch for tensor '" + name + "'");
    };
    for (const auto& l : vgg16_layers()) {
        expect(l.weight_name, {3, 3, static_cast<std::uint32_t>(l.c_in), static_cast<std::uint32_t>(l.c_out)});
        expect(l.bias_name, {static_cast<std::uint32_t>(l.c_out)});
    }
}

WeightStore random_vgg16_weights(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    WeightStore store;
    for (const auto& l : vgg16_layers()) {
        std::normal_distribution<float> w(0.0f, std::sqrt(2.0f / (9.0f * static_cast<float>(l.c_in))));
        std::normal_distribution<float> b(0.0f, 0.01f);
        Tensor k{{3, 3, static_cast<std::uint32_t>(l.c_in), static_cast<std::uint32_t>(l.c_out)}, {}};
        k.data.resize(k.element_count());
        for (auto& v : k.data) v = w(rng);
        Tensor bias{{static_cast<std::uint32_t>(l.c_out)}, std::vector<float>(l.c_out)};
        for (auto& v : bias.data) v = b(rng);
        store.insert(l.weight_name, std::move(k));
        store.insert(l.bias_name, std::move(bias));
    }
    return store;
}

FeatureMap conv3x3(const FeatureMap& input, const Tensor& kernel, const Tensor& bias, bool relu) {
    if (kernel.dims.size() != 4 || kernel.dims[0] != 3 || kernel.dims[1] != 3) {
        throw Error(ErrorCode::ShapeMismatch, "conv3x3: kernel must be 3x3xC_inxC_out");
    }
    const int c_in = static_cast<int>(kernel.dims[2]);
    const int c_out = static_cast<int>(kernel.dims[3]);
    if (c_in != input.channels) throw Error(ErrorCode::ShapeMismatch, "conv3x3: channel mismatch");
    if (bias.dims.size() != 1 || static_cast<int>(bias.dims[0]) != c_out) {
        throw Error(ErrorCode::ShapeMismatch, "conv3x3: bias length mismatch");
    }
    const int h = input.height;
    const int w = input.width;
    FeatureMap out(h, w, c_out);
    std::vector<float> acc(c_out);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            std::copy(bias.data.begin(), bias.data.end(), acc.begin());
            for (int dy = -1; dy <= 1; ++dy) {
                const int y = i + dy;
                if (y < 0 || y >= h) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x = j + dx;
                    if (x < 0 || x >= w) continue;
                    const float* in = input.pixel(y, x);
                    const float* tap = kernel.data.data() +
                                       static_cast<std::size_t>((dy + 1) * 3 + (dx + 1)) * c_in * c_out;
                    for (int ci = 0; ci < c_in; ++ci) {
                        const float v = in[ci];
                        if (v == 0.0f) continue;
                        const float* wr = tap + static_cast<std::size_t>(ci) * c_out;
                        for (int co = 0; co < c_out; ++co) acc[co] += v * wr[co];
                    }
                }
            }
            float* dst = &out.at(i, j, 0);
            for (int co = 0; co < c_out; ++co) dst[co] = relu ? std::max(acc[co], 0.0f) : acc[co];
        }
    }
    return out;
}

FeatureMap maxpool2(const FeatureMap& input) {
    if (input.height % 2 != 0 || input.width % 2 != 0) {
        throw Error(ErrorCode::InvalidArgument, "maxpool2: extents must be even");
    }
    FeatureMap out(input.height / 2, input.width / 2, input.channels);
    for (int i = 0; i < out.height; ++i) {
        for (int j = 0; j < out.width; ++j) {
            for (int c = 0; c < input.channels; ++c) {
                out.at(i, j, c) = std::max({input.at(2 * i, 2 * j, c), input.at(2 * i, 2 * j + 1, c),
                                            input.at(2 * i + 1, 2 * j, c), input.at(2 * i + 1, 2 * j + 1, c)});
            }
        }
    }
    return out;
}

double frobenius_norm(const FeatureMap& f) {
    double s = 0.0;
    for (float v : f.data) s += static_cast<double>(v) * v;
    return std::sqrt(s);
}

namespace {

FeatureMap padded_input(const Image& image) {
    if (image.channels != 3) throw Error(ErrorCode::InvalidArgument, "image must have 3 channels");
    if (image.height < 1 || image.width < 1) throw Error(ErrorCode::InvalidArgument, "empty image");
    return pad_edge(image, padded_extent(image.height), padded_extent(image.width));
}

void finish(FeaturePyramid& p, const Image& image) {
    p.image_height = image.height;
    p.image_width = image.width;
    for (int s = 0; s < kPyramidScales; ++s) p.norms[s] = frobenius_norm(p.levels[s]);
}

}  // namespace

FeaturePyramid extract_pyramid_identity(const Image& image) {
    FeaturePyramid p;
    p.levels[0] = padded_input(image);
    for (int s = 1; s < kPyramidScales; ++s) {
        p.levels[s] = resize_bilinear(p.levels[0], scale_extent(p.levels[0].height, s),
                                      scale_extent(p.levels[0].width, s));
    }
    finish(p, image);
    return p;
}

FeaturePyramid extract_pyramid_conv(const Image& image, const WeightStore& weights,
                                    const Standardization& standardization) {
    validate_vgg16(weights);
    FeatureMap x = padded_input(image);
    for (std::size_t px = 0; px < x.pixels(); ++px) {
        for (int c = 0; c < 3; ++c) {
            float& v = x.data[px * 3 + c];
            v = (v - standardization.mean[c]) / standardization.std[c];
        }
    }
    FeaturePyramid p;
    const auto layers = vgg16_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& spec = layers[l];
        x = conv3x3(x, weights.get(spec.weight_name), weights.get(spec.bias_name), true);
        const bool last_in_block = l + 1 == layers.size() || layers[l + 1].block != spec.block;
        if (last_in_block) {
            p.levels[spec.block] = x;
            if (spec.block + 1 < kPyramidScales) x = maxpool2(x);
        }
    }
    finish(p, image);
    return p;
}

FeaturePyramid Extractor::operator()(const Image& image) const {
    if (kind == ExtractorKind::Identity) return extract_pyramid_identity(image);
    if (weights == nullptr) throw Error(ErrorCode::InvalidArgument, "conv extractor needs a weight store");
    return extract_pyramid_conv(image, *weights, standardization);
}

}  // namespace dcf
