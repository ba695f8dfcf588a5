#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rigmotion/skeleton.hpp"

namespace rigmotion {

enum class BvhChannel { Xposition, Yposition, Zposition, Xrotation, Yrotation, Zrotation };

const char* bvh_channel_name(BvhChannel c);

/// A parsed BVH file: the rig, its motion (already remapped to local Z-X-Y
/// rotations), and the channel layout as declared in the source file.
struct BvhDocument {
  Rig rig;
  std::vector<std::vector<BvhChannel>> channel_layout;  // per joint, declared order
  Motion motion;
  double source_frame_time = 1.0 / 30.0;
  std::vector<std::string> warnings;  // dropped translations, converted orders
};

// Parses HIERARCHY + MOTION. End Sites become leaf joints with zero rotation
// channels; position channels are dropped with a warning; rotation channels in
// any declared order are converted to Z-X-Y via matrix round-trip.
// Throws BvhParseError (with line), or RigError with UnsupportedChannel /
// EmptyMotion.
BvhDocument parse_bvh(const std::string& text);
BvhDocument parse_bvh_stream(std::istream& in);
BvhDocument load_bvh_file(const std::string& path);

// Emits LF line endings and fixed 6-decimal floats so parse(write(doc))
// reproduces offsets and rotations within 1e-5. Rejects empty motion.
std::string write_bvh(const BvhDocument& doc);
void save_bvh_file(const BvhDocument& doc, const std::string& path);

// Wraps a motion in a document with canonical Z-X-Y channel declarations.
BvhDocument make_document(Motion motion);

}  // namespace rigmotion
