#pragma once

#include <string>
#include <vector>

#include "rigmotion/types.hpp"

namespace rigmotion {

/// One dataset motion: a BVH file plus its three-level captions and a
/// species tag.
struct ManifestEntry {
  std::string bvh_path;  // as written in the manifest (usually relative)
  std::string caption_short;
  std::string caption_mid;
  std::string caption_long;
  std::string species_tag;
};

/// A dataset manifest: JSON array of entries. Relative bvh_path values are
/// resolved against the manifest file's directory.
struct Manifest {
  std::vector<ManifestEntry> entries;
  std::string directory;  // base for resolving relative paths

  int size() const { return static_cast<int>(entries.size()); }
  std::string resolve(int index) const;
};

// Throws IoError when the file is unreadable, ConfigError on schema
// violations (not an array, missing bvh_path, wrong value types).
Manifest load_manifest(const std::string& path);

void save_manifest(const Manifest& manifest, const std::string& path);

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text, const std::string& directory);

}  // namespace rigmotion
