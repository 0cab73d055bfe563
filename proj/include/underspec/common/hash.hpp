#pragma once

#include <string>

namespace underspec {

// Lowercase hex SHA-256 of a file's bytes. Throws UsageError if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace underspec
