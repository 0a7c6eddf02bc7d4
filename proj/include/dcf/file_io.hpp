/**
 * @file file_io.hpp
 * @brief Small file helpers: whole-file reads, atomic writes, content hashing.
 */

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dcf {

std::string read_text_file(const std::string& path);
/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view bytes);
/// 64-bit FNV-1a, hex-encoded.
std::string fnv1a_hex(std::string_view bytes);
std::string hash_file(const std::string& path);

}  // namespace dcf
