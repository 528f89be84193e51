#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace oncopipe {

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

// Stable non-cryptographic hash used for deterministic scripted choices.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace oncopipe
