#include "rigmotion/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rigmotion {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Manifest::resolve(int index) const {
  const fs::path p(entries[index].bvh_path);
  if (p.is_absolute() || directory.empty()) return p.string();
  return (fs::path(directory) / p).string();
}

Manifest manifest_from_json(const std::string& text, const std::string& directory) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw RigError(ErrorCode::ConfigError, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) {
    throw RigError(ErrorCode::ConfigError, "manifest root must be a JSON array");
  }

  Manifest manifest;
  manifest.directory = directory;
  for (size_t i = 0; i < doc.size(); ++i) {
    const json& item = doc[i];
    if (!item.is_object() || !item.contains("bvh_path") || !item["bvh_path"].is_string()) {
      throw RigError(ErrorCode::ConfigError,
                     "manifest entry " + std::to_string(i) + " needs a string bvh_path");
    }
    ManifestEntry entry;
    entry.bvh_path = item["bvh_path"].get<std::string>();
    if (item.contains("captions")) {
      const json& caps = item["captions"];
      if (!caps.is_object()) {
        throw RigError(ErrorCode::ConfigError,
                       "manifest entry " + std::to_string(i) + " captions must be an object");
      }
      entry.caption_short = caps.value("short", "");
      entry.caption_mid = caps.value("mid", "");
      entry.caption_long = caps.value("long", "");
    }
    entry.species_tag = item.value("species_tag", "");
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

std::string manifest_to_json(const Manifest& manifest) {
  json doc = json::array();
  for (const ManifestEntry& entry : manifest.entries) {
    json item;
    item["bvh_path"] = entry.bvh_path;
    item["captions"] = {{"short", entry.caption_short},
                        {"mid", entry.caption_mid},
                        {"long", entry.caption_long}};
    item["species_tag"] = entry.species_tag;
    doc.push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RigError(ErrorCode::IoError, "cannot open manifest '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return manifest_from_json(buf.str(), fs::path(path).parent_path().string());
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RigError(ErrorCode::IoError, "cannot write manifest '" + path + "'");
  out << manifest_to_json(manifest);
}

}  // namespace rigmotion
