#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace emcomm {

// printf-style formatting into a std::string.
std::string strf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

// FNV-1a over raw bytes; used for config hashes and parameter checksums.
std::uint64_t fnv1a64(const void* data, std::size_t bytes);
std::uint64_t fnv1a64(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

}  // namespace emcomm
