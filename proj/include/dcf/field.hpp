/**
 * @file field.hpp
 * @brief Dense 2-D scalar fields and multi-channel feature maps (row-major, channels last).
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dcf {

/// H x W scalar field in double precision.
struct ScalarField {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    ScalarField() = default;
    ScalarField(int h, int w, double fill = 0.0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    double& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
    std::size_t size() const { return data.size(); }
};

/// H x W x C feature map stored channels-last in single precision.
struct FeatureMap {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    FeatureMap() = default;
    FeatureMap(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int row, int col, int ch) {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    float at(int row, int col, int ch) const {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    const float* pixel(int row, int col) const {
        return data.data() + (static_cast<std::size_t>(row) * width + col) * channels;
    }
    std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

/// RGB image with values in [0,1].
using Image = FeatureMap;

/// Binary mask with values in {0,1}.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t at(int row, int col) const {
        return data[static_cast<std::size_t>(row) * width + col];
    }
    std::size_t count() const;
};

}  // namespace dcf
