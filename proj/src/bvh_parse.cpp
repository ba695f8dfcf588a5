#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "rigmotion/bvh.hpp"
#include "rigmotion/euler.hpp"

namespace rigmotion {

const char* bvh_channel_name(BvhChannel c) {
  switch (c) {
    case BvhChannel::Xposition: return "Xposition";
    case BvhChannel::Yposition: return "Yposition";
    case BvhChannel::Zposition: return "Zposition";
    case BvhChannel::Xrotation: return "Xrotation";
    case BvhChannel::Yrotation: return "Yrotation";
    case BvhChannel::Zrotation: return "Zrotation";
  }
  return "?";
}

namespace {

struct Token {
  std::string text;
  int line = 0;
};

class Tokenizer {
 public:
  explicit Tokenizer(const std::string& text) : text_(text) {}

  bool next(Token& out) {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (c == '\r' || c == ' ' || c == '\t') {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= text_.size()) return false;
    const size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    out.text = text_.substr(start, pos_ - start);
    out.line = line_;
    return true;
  }

  int line() const { return line_; }

  // Bytes not yet consumed; bounds how many values can still appear.
  size_t remaining() const { return text_.size() - pos_; }

 private:
  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : tok_(text) {}

  BvhDocument parse() {
    expect_keyword("HIERARCHY");
    Token t = expect_any("ROOT");
    if (t.text != "ROOT") fail(t, "expected ROOT");
    parse_joint(kNoParent, /*is_end_site=*/false);

    expect_keyword("MOTION");
    expect_keyword("Frames:");
    const int frames = expect_int();
    expect_keyword("Frame");
    expect_keyword("Time:");
    const double frame_time = expect_double();
    if (frames < 1) throw RigError(ErrorCode::EmptyMotion, "file declares zero frames");

    return assemble(frames, frame_time);
  }

 private:
  Tokenizer tok_;
  std::vector<std::string> names_;
  std::vector<int> parents_;
  std::vector<bool> end_sites_;
  std::vector<Eigen::Vector3d> offsets_;
  std::vector<std::vector<BvhChannel>> channels_;
  std::unordered_set<std::string> used_names_;

  [[noreturn]] void fail(const Token& t, const std::string& message) {
    throw BvhParseError(t.line, t.text, message);
  }

  Token expect_any(const char* what) {
    Token t;
    if (!tok_.next(t)) throw BvhParseError(tok_.line(), "<eof>", std::string("expected ") + what);
    return t;
  }

  void expect_keyword(const char* kw) {
    Token t = expect_any(kw);
    if (t.text != kw) fail(t, std::string("expected '") + kw + "'");
  }

  int expect_int() {
    Token t = expect_any("integer");
    char* end = nullptr;
    const long v = std::strtol(t.text.c_str(), &end, 10);
    if (end == t.text.c_str() || *end != '\0') fail(t, "expected integer");
    return static_cast<int>(v);
  }

  double expect_double() {
    Token t = expect_any("number");
    char* end = nullptr;
    const double v = std::strtod(t.text.c_str(), &end);
    if (end == t.text.c_str() || *end != '\0') fail(t, "expected number");
    if (!std::isfinite(v)) fail(t, "non-finite number");
    return v;
  }

  std::string unique_name(const std::string& base, const Token& at) {
    if (base.empty()) fail(at, "empty joint name");
    std::string name = base;
    int suffix = 1;
    while (!used_names_.insert(name).second) {
      name = base + "_" + std::to_string(++suffix);
    }
    return name;
  }

  // Parses one ROOT/JOINT/End Site block; on entry the introducing keyword is
  // consumed. Returns the new joint index.
  int parse_joint(int parent, bool is_end_site) {
    Token t;
    std::string name;
    if (is_end_site) {
      expect_keyword("Site");
      name = unique_name(names_[parent] + "_end", Token{"Site", tok_.line()});
    } else {
      t = expect_any("joint name");
      name = unique_name(t.text, t);
    }

    const int index = static_cast<int>(names_.size());
    names_.push_back(name);
    parents_.push_back(parent);
    end_sites_.push_back(is_end_site);
    offsets_.emplace_back(Eigen::Vector3d::Zero());
    channels_.emplace_back();

    expect_keyword("{");
    bool saw_offset = false;
    for (;;) {
      t = expect_any("joint body");
      if (t.text == "}") break;
      if (t.text == "OFFSET") {
        offsets_[index][0] = expect_double();
        offsets_[index][1] = expect_double();
        offsets_[index][2] = expect_double();
        saw_offset = true;
      } else if (t.text == "CHANNELS") {
        if (is_end_site) fail(t, "End Site cannot declare channels");
        const int n = expect_int();
        if (n < 0 || n > 6) fail(t, "channel count out of range");
        for (int i = 0; i < n; ++i) {
          Token ct = expect_any("channel name");
          channels_[index].push_back(parse_channel(ct));
        }
      } else if (t.text == "JOINT") {
        parse_joint(index, false);
      } else if (t.text == "End") {
        parse_joint(index, true);
      } else {
        fail(t, "unexpected token in joint body");
      }
    }
    if (!saw_offset) {
      throw BvhParseError(tok_.line(), name, "joint block missing OFFSET");
    }
    return index;
  }

  BvhChannel parse_channel(const Token& t) {
    if (t.text == "Xposition") return BvhChannel::Xposition;
    if (t.text == "Yposition") return BvhChannel::Yposition;
    if (t.text == "Zposition") return BvhChannel::Zposition;
    if (t.text == "Xrotation") return BvhChannel::Xrotation;
    if (t.text == "Yrotation") return BvhChannel::Yrotation;
    if (t.text == "Zrotation") return BvhChannel::Zrotation;
    throw RigError(ErrorCode::UnsupportedChannel,
                   "channel '" + t.text + "' at line " + std::to_string(t.line));
  }

  BvhDocument assemble(int frames, double frame_time) {
    BvhDocument doc;
    const int joints = static_cast<int>(names_.size());

    doc.rig.topology = SkeletonTopology::build(names_, parents_, end_sites_);
    doc.rig.rest_offsets.resize(joints, 3);
    for (int j = 0; j < joints; ++j) doc.rig.rest_offsets.row(j) = offsets_[j].transpose();
    doc.channel_layout = channels_;

    int per_frame = 0;
    for (const auto& ch : channels_) per_frame += static_cast<int>(ch.size());

    // Rotation channel axis order per joint, as declared (0=X,1=Y,2=Z).
    std::vector<std::vector<int>> rot_axes(joints);
    bool dropped_positions = false;
    for (int j = 0; j < joints; ++j) {
      for (const BvhChannel ch : channels_[j]) {
        switch (ch) {
          case BvhChannel::Xrotation: rot_axes[j].push_back(0); break;
          case BvhChannel::Yrotation: rot_axes[j].push_back(1); break;
          case BvhChannel::Zrotation: rot_axes[j].push_back(2); break;
          default: dropped_positions = true; break;
        }
      }
      if (rot_axes[j].size() > 3) {
        throw RigError(ErrorCode::UnsupportedChannel,
                       "joint '" + names_[j] + "' declares more than three rotation channels");
      }
    }
    if (dropped_positions) {
      doc.warnings.push_back("position channels dropped; joint translations are not modeled");
    }

    // Each declared frame needs at least one byte per channel value in the
    // remaining input, so a count beyond that is unsatisfiable; rejecting it
    // here keeps a corrupt header from driving a huge allocation.
    const long long needed = static_cast<long long>(frames) * std::max(per_frame, 1);
    if (needed > static_cast<long long>(tok_.remaining())) {
      throw BvhParseError(tok_.line(), "Frames",
                          "declared frame count exceeds the remaining motion data");
    }

    doc.motion.rig = doc.rig;
    doc.motion.frame_time = frame_time;
    doc.source_frame_time = frame_time;
    doc.motion.rotations.assign(frames, OffsetMatrix::Zero(joints, 3));

    bool converted_order = false;
    for (int f = 0; f < frames; ++f) {
      std::vector<double> values(per_frame);
      for (int i = 0; i < per_frame; ++i) values[i] = expect_double();

      int cursor = 0;
      for (int j = 0; j < joints; ++j) {
        Eigen::Vector3d declared = Eigen::Vector3d::Zero();
        int rot_seen = 0;
        for (const BvhChannel ch : channels_[j]) {
          const double v = values[cursor++];
          if (ch == BvhChannel::Xrotation || ch == BvhChannel::Yrotation ||
              ch == BvhChannel::Zrotation) {
            declared[rot_seen++] = v;
          }
        }
        if (rot_seen == 0) continue;

        const auto& axes = rot_axes[j];
        if (rot_seen == 3 && axes[0] == 2 && axes[1] == 0 && axes[2] == 1) {
          // Native Z-X-Y declaration passes through untouched.
          doc.motion.rotations[f](j, 0) = declared[0];
          doc.motion.rotations[f](j, 1) = declared[1];
          doc.motion.rotations[f](j, 2) = declared[2];
        } else {
          // Trailing entries keep a zero angle, so their axis choice is inert.
          std::array<int, 3> order = {2, 0, 1};
          Eigen::Vector3d padded = Eigen::Vector3d::Zero();
          for (int i = 0; i < rot_seen; ++i) {
            order[i] = axes[i];
            padded[i] = declared[i];
          }
          const Eigen::Matrix3d m = euler_to_matrix(order, padded);
          doc.motion.rotations[f].row(j) = matrix_to_euler_zxy(m).transpose();
          converted_order = true;
        }
      }
    }
    if (converted_order) {
      doc.warnings.push_back("rotation channels remapped to ZXY order");
    }

    Token trailing;
    if (tok_.next(trailing)) fail(trailing, "trailing data after motion frames");

    // The grammar guarantees a single root, tree-shaped parents, and unique
    // names; zero-length bones are legal here and only rejected downstream
    // where a normalized rig is required.
    return doc;
  }
};

}  // namespace

BvhDocument parse_bvh(const std::string& text) {
  Parser parser(text);
  return parser.parse();
}

BvhDocument parse_bvh_stream(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_bvh(buf.str());
}

BvhDocument load_bvh_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RigError(ErrorCode::IoError, "cannot open '" + path + "'");
  return parse_bvh_stream(in);
}

}  // namespace rigmotion
