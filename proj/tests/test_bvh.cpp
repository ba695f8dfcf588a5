#include <doctest.h>

#include <Eigen/Geometry>
#include <string>
#include <vector>

#include "rigmotion/bvh.hpp"
#include "rigmotion/euler.hpp"
#include "rigmotion/skeleton.hpp"
#include "test_support.hpp"

using namespace rigmotion;
using testsupport::fixture_path;
using testsupport::random_motion;
using testsupport::random_rig;
using testsupport::read_file;

TEST_SUITE("bvh") {

TEST_CASE("chain fixture parses with the declared structure and values") {
  const BvhDocument doc = parse_bvh(read_file(fixture_path("chain3.bvh")));
  // hip, spine, head, plus the End Site leaf.
  REQUIRE(doc.motion.joint_count() == 4);
  CHECK(doc.motion.rig.topology.joint_names[0] == "hip");
  CHECK(doc.motion.rig.topology.joint_names[1] == "spine");
  CHECK(doc.motion.rig.topology.joint_names[2] == "head");
  CHECK(doc.motion.rig.topology.parents[0] == -1);
  CHECK(doc.motion.rig.topology.parents[1] == 0);
  CHECK(doc.motion.rig.topology.parents[2] == 1);
  CHECK(doc.motion.rig.topology.parents[3] == 2);
  CHECK(doc.motion.rig.topology.end_site[3]);
  CHECK_FALSE(doc.motion.rig.topology.end_site[2]);

  CHECK(doc.motion.rig.rest_offsets(1, 1) == doctest::Approx(10.0));
  CHECK(doc.motion.rig.rest_offsets(2, 1) == doctest::Approx(8.0));
  CHECK(doc.motion.rig.rest_offsets(3, 1) == doctest::Approx(4.0));

  REQUIRE(doc.motion.frame_count() == 4);
  CHECK(doc.motion.frame_time == doctest::Approx(0.033333));
  // Frame 1, hip: 10 5 -3 in ZXY file order -> stored as (z, x, y).
  CHECK(doc.motion.rotations[1](0, 0) == doctest::Approx(10.0));
  CHECK(doc.motion.rotations[1](0, 1) == doctest::Approx(5.0));
  CHECK(doc.motion.rotations[1](0, 2) == doctest::Approx(-3.0));
  // End Site rows carry zero rotations.
  CHECK(doc.motion.rotations[1].row(3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quadruped fixture exposes branching topology") {
  const BvhDocument doc = load_bvh_file(fixture_path("quadruped.bvh"));
  CHECK(doc.motion.joint_count() == 16);  // 11 named + 5 end sites
  const auto& topo = doc.motion.rig.topology;
  const int pelvis = topo.find("pelvis");
  REQUIRE(pelvis >= 0);
  CHECK(topo.child_lists[pelvis].size() == 3);  // spine + two hind legs
  const int spine = topo.find("spine");
  REQUIRE(spine >= 0);
  CHECK(topo.child_lists[spine].size() == 3);  // neck + two front legs
  CHECK(validate_rig(doc.motion.rig).ok);
}

TEST_CASE("foreign rotation orders are converted to equivalent zxy") {
  const BvhDocument doc = parse_bvh(read_file(fixture_path("xyzorder.bvh")));
  // Conversion must preserve the composed rotation matrix of every joint.
  // Frame 1 arm: file declares Xrotation Yrotation Zrotation = -15 25 -5.
  const int arm = doc.motion.rig.topology.find("arm");
  REQUIRE(arm >= 0);
  const Eigen::Matrix3d expected =
      testsupport::oracle_axis_rotation(0, deg2rad(-15.0)) *
      testsupport::oracle_axis_rotation(1, deg2rad(25.0)) *
      testsupport::oracle_axis_rotation(2, deg2rad(-5.0));
  const Eigen::Matrix3d stored =
      euler_zxy_to_matrix(doc.motion.rotations[1].row(arm).transpose());
  CHECK((stored - expected).cwiseAbs().maxCoeff() < 1e-9);

  // hand declares Yrotation Zrotation Xrotation = 40 -20 10.
  const int hand = doc.motion.rig.topology.find("hand");
  REQUIRE(hand >= 0);
  const Eigen::Matrix3d expected_hand =
      testsupport::oracle_axis_rotation(1, deg2rad(40.0)) *
      testsupport::oracle_axis_rotation(2, deg2rad(-20.0)) *
      testsupport::oracle_axis_rotation(0, deg2rad(10.0));
  const Eigen::Matrix3d stored_hand =
      euler_zxy_to_matrix(doc.motion.rotations[1].row(hand).transpose());
  CHECK((stored_hand - expected_hand).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("position channels are dropped with a warning") {
  const BvhDocument doc = parse_bvh(read_file(fixture_path("xyzorder.bvh")));
  bool mentions_positions = false;
  for (const std::string& w : doc.warnings) {
    if (w.find("position") != std::string::npos) mentions_positions = true;
  }
  CHECK(mentions_positions);
}

TEST_CASE("write -> parse round trip preserves offsets and rotations within 1e-5") {
  for (const char* name : {"chain3.bvh", "quadruped.bvh", "xyzorder.bvh", "minimal.bvh"}) {
    const BvhDocument doc = parse_bvh(read_file(fixture_path(name)));
    const BvhDocument back = parse_bvh(write_bvh(doc));
    REQUIRE(back.motion.joint_count() == doc.motion.joint_count());
    REQUIRE(back.motion.frame_count() == doc.motion.frame_count());
    CHECK(back.motion.rig.topology.joint_names == doc.motion.rig.topology.joint_names);
    CHECK(back.motion.rig.topology.parents == doc.motion.rig.topology.parents);
    CHECK((back.motion.rig.rest_offsets - doc.motion.rig.rest_offsets).cwiseAbs().maxCoeff() <
          1e-5);
    for (int f = 0; f < doc.motion.frame_count(); ++f) {
      CHECK((back.motion.rotations[f] - doc.motion.rotations[f]).cwiseAbs().maxCoeff() < 1e-5);
    }
    CHECK(back.motion.frame_time == doctest::Approx(doc.motion.frame_time).epsilon(1e-6));
  }
}

TEST_CASE("round trip holds for randomly generated motions") {
  // The writer renders the hierarchy depth-first, so joints may come back in
  // a different index order than the generator produced; compare by name.
  Rng rng(404);
  for (int trial = 0; trial < 25; ++trial) {
    Motion motion =
        random_motion(rng, random_rig(rng, rng.uniform_int(2, 12)), rng.uniform_int(1, 8), 170.0);
    const BvhDocument doc = make_document(motion);
    const BvhDocument back = parse_bvh(write_bvh(doc));
    const SkeletonTopology& topo = motion.rig.topology;
    REQUIRE(back.motion.joint_count() == motion.joint_count());
    REQUIRE(back.motion.frame_count() == motion.frame_count());
    for (int j = 0; j < motion.joint_count(); ++j) {
      const int b = back.motion.rig.topology.find(topo.joint_names[j]);
      REQUIRE(b >= 0);
      const int parent = topo.parents[j];
      const int back_parent = back.motion.rig.topology.parents[b];
      if (parent < 0) {
        CHECK(back_parent < 0);
      } else {
        REQUIRE(back_parent >= 0);
        CHECK(back.motion.rig.topology.joint_names[back_parent] == topo.joint_names[parent]);
      }
      CHECK((back.motion.rig.rest_offsets.row(b) - motion.rig.rest_offsets.row(j))
                .cwiseAbs()
                .maxCoeff() < 1e-5);
      for (int f = 0; f < motion.frame_count(); ++f) {
        CHECK((back.motion.rotations[f].row(b) - motion.rotations[f].row(j))
                  .cwiseAbs()
                  .maxCoeff() < 1e-5);
      }
    }
  }
}

TEST_CASE("writer emits LF-only canonical text") {
  const BvhDocument doc = parse_bvh(read_file(fixture_path("minimal.bvh")));
  const std::string text = write_bvh(doc);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.rfind("HIERARCHY", 0) == 0);
  CHECK(text.find("CHANNELS 3 Zrotation Xrotation Yrotation") != std::string::npos);
}

TEST_CASE("structural errors carry line numbers") {
  SUBCASE("missing hierarchy keyword") {
    CHECK_THROWS_AS(parse_bvh("NOT_A_BVH\n"), BvhParseError);
  }
  SUBCASE("unbalanced braces") {
    const std::string text =
        "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 3 Zrotation Xrotation Yrotation\n";
    CHECK_THROWS_AS(parse_bvh(text), BvhParseError);
  }
  SUBCASE("bad channel count line is reported") {
    const std::string text =
        "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS banana\n}\nMOTION\nFrames: 1\nFrame "
        "Time: 0.1\n0 0 0\n";
    try {
      parse_bvh(text);
      FAIL("expected a parse error");
    } catch (const BvhParseError& e) {
      CHECK(e.line() == 5);
    }
  }
  SUBCASE("unknown channel name") {
    const std::string text =
        "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 3 Zrotation Xrotation Wrotation\n}\n"
        "MOTION\nFrames: 1\nFrame Time: 0.1\n0 0 0\n";
    CHECK_THROWS(parse_bvh(text));
  }
  SUBCASE("frame row with too few values") {
    const std::string text =
        "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 3 Zrotation Xrotation Yrotation\n}\n"
        "MOTION\nFrames: 2\nFrame Time: 0.1\n0 0 0\n0 0\n";
    CHECK_THROWS_AS(parse_bvh(text), BvhParseError);
  }
  SUBCASE("zero frames") {
    const std::string text =
        "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 3 Zrotation Xrotation Yrotation\n}\n"
        "MOTION\nFrames: 0\nFrame Time: 0.1\n";
    try {
      parse_bvh(text);
      FAIL("expected an error");
    } catch (const RigError& e) {
      CHECK(e.code() == ErrorCode::EmptyMotion);
    }
  }
}

TEST_CASE("missing file raises an io error") {
  CHECK_THROWS_AS(load_bvh_file("/definitely/not/here.bvh"), RigError);
}

TEST_CASE("mutation fuzzing never crashes the parser") {
  // The full 10k-input fuzz runs in the acceptance harness; this keeps a
  // smaller always-on net in the unit suite.
  const std::string base = read_file(fixture_path("chain3.bvh"));
  Rng rng(31337);
  int parsed_ok = 0;
  for (int i = 0; i < 800; ++i) {
    std::string text = base;
    const int edits = rng.uniform_int(1, 8);
    for (int e = 0; e < edits; ++e) {
      const int pos = rng.uniform_int(0, static_cast<int>(text.size()) - 1);
      switch (rng.uniform_int(0, 3)) {
        case 0: text[pos] = static_cast<char>(rng.uniform_int(32, 126)); break;
        case 1: text.erase(pos, rng.uniform_int(1, 5)); break;
        case 2: text.insert(pos, std::string(rng.uniform_int(1, 4), '}')); break;
        default: text.insert(pos, "\t-1e99 "); break;
      }
      if (text.empty()) text = "x";
    }
    try {
      const BvhDocument doc = parse_bvh(text);
      ++parsed_ok;
      // Whatever survives mutation must still satisfy basic invariants.
      CHECK(doc.motion.frame_count() >= 1);
      CHECK(doc.motion.joint_count() >= 1);
    } catch (const RigError&) {
      // rejected input: fine
    }
  }
  // Sanity: some mutations (e.g. digits in the motion block) still parse.
  CHECK(parsed_ok > 0);
}

}  // TEST_SUITE
