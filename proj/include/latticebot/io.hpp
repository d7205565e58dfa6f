#pragma once

#include "latticebot/common.hpp"

#include <filesystem>
#include <string>

namespace latticebot {

Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& doc);

/// Parses a JSON file; throws std::invalid_argument on unreadable or malformed input.
Json read_json_file(const std::filesystem::path& path);

/// Writes through a temporary file and renames, so readers never see a partial file.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Hex SHA-256 of a byte buffer.
std::string sha256_hex(const void* data, std::size_t size);

template <typename Derived>
std::string sha256_hex(const Eigen::DenseBase<Derived>& m) {
  const typename Derived::PlainObject plain = m;
  return sha256_hex(plain.data(), static_cast<std::size_t>(plain.size()) * sizeof(typename Derived::Scalar));
}

}  // namespace latticebot
