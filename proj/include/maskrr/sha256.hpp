#pragma once

#include <string>

namespace maskrr {

// SHA-256 (FIPS 180-4) of a byte string, returned as lowercase hex.
std::string sha256_hex(const std::string& data);

// SHA-256 of a file's contents.
std::string sha256_file(const std::string& path);

}  // namespace maskrr
