#include <cstdio>
#include <fstream>
#include <string>

#include "rigmotion/bvh.hpp"

namespace rigmotion {

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void indent(std::string& out, int depth) {
  out.append(static_cast<size_t>(depth) * 2, ' ');
}

// An End Site block stores only an offset, so a joint may be emitted as one
// only when nothing else about it would be lost.
bool emit_as_end_site(const BvhDocument& doc, int j) {
  if (!doc.rig.topology.end_site[j] || !doc.rig.topology.is_leaf(j)) return false;
  for (const auto& frame : doc.motion.rotations) {
    if (frame.row(j).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

void write_joint(const BvhDocument& doc, int j, int depth, std::string& out,
                 std::vector<int>& channel_order) {
  const auto& topo = doc.rig.topology;
  const bool end_site = emit_as_end_site(doc, j);

  indent(out, depth);
  if (end_site) {
    out += "End Site\n";
  } else if (topo.parents[j] == kNoParent) {
    out += "ROOT " + topo.joint_names[j] + "\n";
  } else {
    out += "JOINT " + topo.joint_names[j] + "\n";
  }
  indent(out, depth);
  out += "{\n";

  indent(out, depth + 1);
  out += "OFFSET " + fmt6(doc.rig.rest_offsets(j, 0)) + " " + fmt6(doc.rig.rest_offsets(j, 1)) +
         " " + fmt6(doc.rig.rest_offsets(j, 2)) + "\n";
  if (!end_site) {
    indent(out, depth + 1);
    out += "CHANNELS 3 Zrotation Xrotation Yrotation\n";
    channel_order.push_back(j);
    for (const int child : topo.child_lists[j]) {
      write_joint(doc, child, depth + 1, out, channel_order);
    }
  }

  indent(out, depth);
  out += "}\n";
}

}  // namespace

std::string write_bvh(const BvhDocument& doc) {
  if (doc.motion.frame_count() < 1) {
    throw RigError(ErrorCode::EmptyMotion, "refusing to write a document with zero frames");
  }
  const int root = doc.rig.topology.root();
  if (root < 0) throw RigError(ErrorCode::OrphanJoint, "document rig has no root");

  std::string out = "HIERARCHY\n";
  std::vector<int> channel_order;
  write_joint(doc, root, 0, out, channel_order);

  out += "MOTION\n";
  out += "Frames: " + std::to_string(doc.motion.frame_count()) + "\n";
  out += "Frame Time: " + fmt6(doc.motion.frame_time) + "\n";
  for (const auto& frame : doc.motion.rotations) {
    std::string line;
    for (const int j : channel_order) {
      if (!line.empty()) line += ' ';
      line += fmt6(frame(j, 0)) + " " + fmt6(frame(j, 1)) + " " + fmt6(frame(j, 2));
    }
    out += line;
    out += '\n';
  }
  return out;
}

void save_bvh_file(const BvhDocument& doc, const std::string& path) {
  const std::string text = write_bvh(doc);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RigError(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw RigError(ErrorCode::IoError, "short write to '" + path + "'");
}

BvhDocument make_document(Motion motion) {
  BvhDocument doc;
  doc.rig = motion.rig;
  doc.source_frame_time = motion.frame_time;
  doc.channel_layout.resize(doc.rig.joint_count());
  for (int j = 0; j < doc.rig.joint_count(); ++j) {
    if (doc.rig.topology.end_site[j] && doc.rig.topology.is_leaf(j)) continue;
    doc.channel_layout[j] = {BvhChannel::Zrotation, BvhChannel::Xrotation, BvhChannel::Yrotation};
  }
  doc.motion = std::move(motion);
  return doc;
}

}  // namespace rigmotion
