#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace lgap {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256.
Digest sha256(std::string_view bytes);
Digest sha256_file(const std::filesystem::path& path);

std::string to_hex(const Digest& digest);
/// Inverse of to_hex; FormatError on anything but 64 hex digits.
Digest from_hex(std::string_view hex);

}  // namespace lgap
