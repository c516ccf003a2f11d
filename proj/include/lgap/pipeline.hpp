#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lgap/config.hpp"
#include "lgap/error.hpp"

namespace lgap {

struct ArtifactEntry {
  /// Relative to the output directory, '/' separated.
  std::string path;
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct Manifest {
  std::vector<ArtifactEntry> artifacts;

  nlohmann::ordered_json to_json() const;
};

/// Raised when a pipeline stage fails. kind() is the underlying cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// gen, encode, geometry, project, probe, gap, in that order. Writes
/// config.json and manifest.json last.
Manifest run_pipeline(const RunConfig& config);

}  // namespace lgap
