#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json_io.hpp"

namespace tmfm::io {

/// Hex SHA-256 of a file's bytes. Errors: IoError.
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  ordered_json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;
  double wall_seconds = 0.0;

  void add_input(const std::filesystem::path& path) { input_digests[path.string()] = sha256_file(path); }
  ordered_json to_json() const;
};

const char* tool_version();

}  // namespace tmfm::io
