/**
 * @file features.hpp
 * @brief Five-scale feature pyramids: an RGB identity extractor and a forward-only
 *        VGG16-topology convolutional extractor driven by an external weight file.
 *
 * Both extractors pad the image by edge replication to a multiple of 16, so scale s
 * has extent (Hp >> s, Wp >> s).
 */

#pragma once

#include "dcf/field.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dcf {

inline constexpr int kPyramidScales = 5;

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t element_count() const;
};

/// Named float32 tensors, immutable once loaded.
class WeightStore {
public:
    void insert(const std::string& name, Tensor t);
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    /// Throws MissingTensor naming the tensor.
    const Tensor& get(const std::string& name) const;
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

private:
    std::map<std::string, Tensor> tensors_;
};

// DCFW container: "DCFW", u32 version = 1, u32 tensor_count, then per tensor
// u32 name_len, name bytes, u32 ndim, u32 dims[ndim], f32 data. Little-endian.
std::string encode_weight_container(const WeightStore& store);
WeightStore decode_weight_container(const std::string& bytes);
WeightStore load_weight_container(const std::string& path);
void save_weight_container(const WeightStore& store, const std::string& path);

/// Conv layer layout of the VGG16 feature blocks.
struct ConvLayerSpec {
    std::string weight_name;  // "block{b}.conv{c}.weight", dims (3, 3, c_in, c_out)
    std::string bias_name;    // "block{b}.conv{c}.bias", dims (c_out)
    int block;                // 0-based block index; the block's output is f_block
    int c_in;
    int c_out;
};

std::vector<ConvLayerSpec> vgg16_layers();

/// Throws MissingTensor or ShapeMismatch naming the first offending tensor.
void validate_vgg16(const WeightStore& store);

/// Random weights with the VGG16 shapes (He-scaled normal, zero-mean small biases).
WeightStore random_vgg16_weights(std::uint64_t seed);

/// 3x3 cross-correlation, stride 1, zero padding 1. `kernel` is (3, 3, c_in, c_out).
FeatureMap conv3x3(const FeatureMap& input, const Tensor& kernel, const Tensor& bias, bool relu);

/// 2x2 max pooling with stride 2; requires even extents.
FeatureMap maxpool2(const FeatureMap& input);

struct FeaturePyramid {
    std::array<FeatureMap, kPyramidScales> levels;
    /// Frobenius norm of each level.
    std::array<double, kPyramidScales> norms{};
    int image_height = 0;  // unpadded
    int image_width = 0;

    const FeatureMap& operator[](int s) const { return levels[static_cast<std::size_t>(s)]; }
    int channels(int s) const { return levels[static_cast<std::size_t>(s)].channels; }
};

struct Standardization {
    std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
    std::array<float, 3> std{0.229f, 0.224f, 0.225f};
};

double frobenius_norm(const FeatureMap& f);

FeaturePyramid extract_pyramid_identity(const Image& image);
FeaturePyramid extract_pyramid_conv(const Image& image, const WeightStore& weights,
                                    const Standardization& standardization = {});

enum class ExtractorKind { Identity, Conv };

/// Extractor selection; `weights` must outlive the extractor when kind is Conv.
struct Extractor {
    ExtractorKind kind = ExtractorKind::Identity;
    const WeightStore* weights = nullptr;
    Standardization standardization;

    FeaturePyramid operator()(const Image& image) const;
};

}  // namespace dcf
