#include "png_io.hpp"

#include "dcf/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

namespace dcf::tools {

namespace {

std::vector<std::uint8_t> read_raw(const std::string& path, std::uint32_t format, int& h, int& w) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw Error(ErrorCode::Io, "cannot read PNG '" + path + "': " + img.message);
    }
    img.format = format;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw Error(ErrorCode::Io, "cannot decode PNG '" + path + "': " + msg);
    }
    h = static_cast<int>(img.height);
    w = static_cast<int>(img.width);
    return buf;
}

void write_raw(const std::string& path, const std::vector<std::uint8_t>& buf, int h, int w, std::uint32_t format) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = format;
    const std::string tmp = path + ".tmp";
    if (!png_image_write_to_file(&img, tmp.c_str(), 0, buf.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, "cannot write PNG '" + path + "': " + img.message);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

Image read_png_rgb(const std::string& path) {
    int h = 0, w = 0;
    const auto buf = read_raw(path, PNG_FORMAT_RGB, h, w);
    Image out(h, w, 3);
    for (std::size_t i = 0; i < buf.size(); ++i) out.data[i] = buf[i] / 255.0f;
    return out;
}

BinaryMask read_png_mask(const std::string& path) {
    int h = 0, w = 0;
    const auto buf = read_raw(path, PNG_FORMAT_GRAY, h, w);
    BinaryMask out(h, w);
    for (std::size_t i = 0; i < buf.size(); ++i) out.data[i] = buf[i] >= 128;
    return out;
}

void write_png_rgb(const std::string& path, const Image& image) {
    if (image.channels != 3) throw Error(ErrorCode::InvalidArgument, "write_png_rgb needs 3 channels");
    std::vector<std::uint8_t> buf(image.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));
    write_raw(path, buf, image.height, image.width, PNG_FORMAT_RGB);
}

void write_png_mask(const std::string& path, const BinaryMask& mask) {
    std::vector<std::uint8_t> buf(mask.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask.data[i] ? 255 : 0;
    write_raw(path, buf, mask.height, mask.width, PNG_FORMAT_GRAY);
}

}  // namespace dcf::tools
