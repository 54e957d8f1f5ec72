#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace mcnn {

uint32_t crc32(std::span<const uint8_t> bytes, uint32_t seed = 0);

std::string sha256_hex(std::span<const uint8_t> bytes);
std::string sha256_file_hex(const std::string& path);

}  // namespace mcnn
