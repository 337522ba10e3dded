#pragma once

#include <cstddef>
#include <cstdint>

namespace dvae {

// CRC-32 (IEEE 802.3 polynomial), used for checkpoint integrity and dataset
// manifest checksums.
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace dvae
