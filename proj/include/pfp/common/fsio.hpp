// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace pfp {

std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temp file + rename so readers never observe a
// partially written file.
void atomic_write_file(const std::filesystem::path& path, std::string_view contents);

uint64_t fnv1a64(std::span<const unsigned char> bytes, uint64_t h = 0xcbf29ce484222325ull);
uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull);

std::string to_hex(uint64_t v);

}  // namespace pfp
