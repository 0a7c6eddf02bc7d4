#include "dcf/file_io.hpp"

#include "dcf/error.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dcf {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid argument";
        case ErrorCode::EmptyRegion: return "empty region";
        case ErrorCode::ContourCollapsed: return "contour collapsed";
        case ErrorCode::DegenerateContour: return "degenerate contour";
        case ErrorCode::BadMagic: return "bad magic";
        case ErrorCode::BadVersion: return "bad version";
        case ErrorCode::Truncated: return "truncated";
        case ErrorCode::MissingTensor: return "missing tensor";
        case ErrorCode::ShapeMismatch: return "shape mismatch";
        case ErrorCode::InsufficientTissue: return "insufficient tissue";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::Io, "write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp + ": " + ec.message());
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string hash_file(const std::string& path) { return fnv1a_hex(read_text_file(path)); }

}  // namespace dcf
