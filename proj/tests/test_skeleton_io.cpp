#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "skelclip/error.hpp"
#include "skelclip/skeleton_io.hpp"
#include "skelclip/tensor_io.hpp"
#include "test_support.hpp"

using namespace skelclip;

namespace {

// NTU-style text: frame count, then per frame the bodies with a metadata
// line, a joint count and one line per joint (x y z plus extra fields).
struct NtuBody {
  std::string id;
  std::vector<Vec3> joints;
};

std::string ntu_text(const std::vector<std::vector<NtuBody>>& frames) {
  std::ostringstream out;
  out.precision(17);
  out << frames.size() << "\n";
  for (const auto& bodies : frames) {
    out << bodies.size() << "\n";
    for (const auto& b : bodies) {
      out << b.id << " 0 1 1 1 1 0 0.1 0.2 2\n" << b.joints.size() << "\n";
      for (const auto& p : b.joints) out << p.x << " " << p.y << " " << p.z << " 250.1 120.4 900 500 0.1 0.2 0.3 0.9 2\n";
    }
  }
  return out.str();
}

std::vector<Vec3> joints(std::size_t m, double base) {
  std::vector<Vec3> out;
  for (std::size_t j = 0; j < m; ++j) out.push_back({base + j, base - 0.5 * j, 0.25 * j});
  return out;
}

}  // namespace

TEST(Layout, Figure2ReferenceJoints) {
  const auto layout = builtin_layout("figure2-16");
  EXPECT_EQ(layout.joint_count, 16u);
  EXPECT_EQ(layout.reference_joints, (std::array<std::size_t, 4>{4, 7, 10, 13}));
  std::vector<std::size_t> chain(16);
  std::iota(chain.begin(), chain.end(), std::size_t{0});
  EXPECT_EQ(layout.chain_order, chain);
}

TEST(Layout, BuiltinsAreValidPermutations) {
  for (const auto& name : builtin_layout_names()) {
    const auto layout = builtin_layout(name);
    EXPECT_NO_THROW(validate(layout)) << name;
    auto chain = layout.chain_order;
    std::sort(chain.begin(), chain.end());
    for (std::size_t i = 0; i < chain.size(); ++i) EXPECT_EQ(chain[i], i) << name;
  }
  EXPECT_EQ(builtin_layout("ntu-25").joint_count, 25u);
  EXPECT_EQ(builtin_layout("sbu-15").joint_count, 15u);
  EXPECT_EQ(builtin_layout("cmu-31").joint_count, 31u);
  EXPECT_THROW(builtin_layout("nope"), ConfigError);
}

TEST(Layout, ConfigRoundTrip) {
  const auto layout = builtin_layout("ntu-25");
  EXPECT_EQ(load_layout(write_layout(layout)), layout);
}

TEST(Layout, ConfigErrors) {
  EXPECT_THROW(load_layout("name = x\njoint_count = 5\nchain = 0,1,2,3,4\nreference_joints = 0,1,2\n"), Error);
  EXPECT_THROW(load_layout("name = x\njoint_count = 5\nchain = 0,1,2,3,3\nreference_joints = 0,1,2,3\n"), Error);
  EXPECT_THROW(load_layout("name = x\njoint_count = 5\nchain = 0,1,2,3,4\nreference_joints = 0,1,2,9\n"), Error);
  EXPECT_THROW(load_layout("name = x\njoint_count = 4\nchain = 0,1,2,3\nreference_joints = 0,1,2,3\n"), Error);
  EXPECT_THROW(load_layout("name = x\njoint_count = 5\nchain = 0,1,2,3,4\nreference_joints = 0,1,1,2\n"), Error);
  EXPECT_NO_THROW(load_layout("name = x\njoint_count = 5\nchain = 4,3,2,1,0\nreference_joints = 0,1,2,3\n"));
}

TEST(Layout, CorruptedPermutationsAreRejected) {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    JointLayout layout = builtin_layout("ntu-25");
    std::span<std::size_t> chain(layout.chain_order);
    shuffle(chain, rng);
    ASSERT_NO_THROW(validate(layout));
    switch (rng.below(3)) {
      case 0: {  // duplicate an entry
        const auto i = rng.below(chain.size());
        auto j = rng.below(chain.size() - 1);
        if (j >= i) ++j;
        chain[i] = chain[j];
        break;
      }
      case 1:  // out of range
        chain[rng.below(chain.size())] = layout.joint_count + rng.below(10);
        break;
      default:  // dropped entry
        layout.chain_order.pop_back();
        break;
    }
    EXPECT_THROW(validate(layout), Error);
  }
}

TEST(Ntu, TwoFramesOneBody) {
  const auto layout = builtin_layout("ntu-25");
  std::istringstream in(ntu_text({{{"72057594037931101", joints(25, 0.0)}}, {{"72057594037931101", joints(25, 1.0)}}}));
  const auto seqs = parse_ntu_skeleton(in, layout);
  ASSERT_EQ(seqs.size(), 1u);
  EXPECT_EQ(seqs[0].frame_count, 2u);
  EXPECT_EQ(seqs[0].joint_count(), 25u);
}

TEST(Ntu, ExactCoordinates) {
  const auto layout = builtin_layout("ntu-25");
  const std::vector<std::vector<Vec3>> frames = {joints(25, 0.125), joints(25, -3.5), joints(25, 1e-3)};
  std::istringstream in(ntu_text({{{"1", frames[0]}}, {{"1", frames[1]}}, {{"1", frames[2]}}}));
  const auto seq = parse_ntu_skeleton(in, layout).at(0);
  ASSERT_EQ(seq.frame_count, 3u);
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t j = 0; j < 25; ++j) EXPECT_EQ(seq.at(f, j), frames[f][j]);
}

TEST(Ntu, SplitsBodiesAndDropsAbsentFrames) {
  const auto layout = builtin_layout("ntu-25");
  std::istringstream in(ntu_text({{{"a", joints(25, 0)}, {"b", joints(25, 10)}},
                                  {{"b", joints(25, 11)}},
                                  {{"a", joints(25, 2)}, {"b", joints(25, 12)}}}));
  const auto seqs = parse_ntu_skeleton(in, layout);
  ASSERT_EQ(seqs.size(), 2u);
  EXPECT_EQ(seqs[0].frame_count, 2u);
  EXPECT_EQ(seqs[1].frame_count, 3u);
  EXPECT_EQ(seqs[0].at(1, 0).x, 2.0);
  EXPECT_EQ(seqs[1].at(1, 0).x, 11.0);
}

TEST(Ntu, Errors) {
  const auto layout = builtin_layout("ntu-25");
  auto parse = [&](const std::string& text) {
    std::istringstream in(text);
    return parse_ntu_skeleton(in, layout);
  };
  EXPECT_THROW(parse("0\n"), ParseError);
  EXPECT_THROW(parse(ntu_text({{{"1", joints(24, 0)}}})), ParseError);
  EXPECT_THROW(parse(ntu_text({{{"1", joints(25, 0)}, {"1", joints(25, 0)}}})), ParseError);
  EXPECT_THROW(parse(ntu_text({{}})), ParseError);
  EXPECT_THROW(parse(ntu_text({{{"1", joints(25, 0)}}}) + "junk\n"), ParseError);

  std::string text = ntu_text({{{"1", joints(25, 0)}}});
  text.replace(text.find("0 0 0 250.1"), 1, "x");
  try {
    parse(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5u);
  }
  EXPECT_THROW(parse("2\n1\n"), ParseError);
}

TEST(Ntu, FileName) {
  const auto info = parse_ntu_filename("data/S001C002P003R002A013.skeleton");
  ASSERT_TRUE(info);
  EXPECT_EQ(info->setup, 1);
  EXPECT_EQ(info->camera, 2);
  EXPECT_EQ(info->subject, 3);
  EXPECT_EQ(info->replication, 2);
  EXPECT_EQ(info->action, 13);
  EXPECT_FALSE(parse_ntu_filename("walk.json"));
}

TEST(Canonical, RoundTripRandomSequences) {
  SplitMix64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto& names = builtin_layout_names();
    auto seq = testkit::random_sequence(rng, builtin_layout(names[rng.below(names.size())]), 1 + rng.below(6), 1e3);
    if (rng.below(2)) seq.label = static_cast<int>(rng.below(10));
    if (rng.below(2)) seq.subject_id = static_cast<int>(rng.below(40));
    EXPECT_EQ(parse_canonical(write_canonical(seq)), seq);
  }
}

TEST(Canonical, CustomLayoutRoundTrip) {
  SplitMix64 rng(9);
  JointLayout layout = load_layout("name = tiny\njoint_count = 5\nchain = 4,3,2,1,0\nreference_joints = 0,1,2,3\n");
  const auto seq = testkit::random_sequence(rng, layout, 5);
  EXPECT_EQ(parse_canonical(write_canonical(seq)), seq);
}

TEST(Canonical, WriteAfterParseIsIdentity) {
  SplitMix64 rng(10);
  const auto text = write_canonical(testkit::random_sequence(rng, builtin_layout("ntu-25"), 5));
  EXPECT_EQ(write_canonical(parse_canonical(text)), text);
}

TEST(Canonical, Errors) {
  const std::string row = "[[0,0,0],[1,1,1],[2,2,2],[3,3,3],[4,4,4],[5,5,5],[6,6,6],[7,7,7],[8,8,8],[9,9,9],"
                          "[10,10,10],[11,11,11],[12,12,12],[13,13,13],[14,14,14],[15,15,15]]";
  EXPECT_NO_THROW(parse_canonical(R"({"layout":"figure2-16","label":1,"frames":[)" + row + "]}"));
  EXPECT_THROW(parse_canonical(R"({"layout":"figure2-16","label":1,"frames":[]})"), ParseError);
  EXPECT_THROW(parse_canonical(R"({"layout":"figure2-16","label":1})"), ParseError);
  EXPECT_THROW(parse_canonical(R"({"label":1,"frames":[)" + row + "]}"), ParseError);
  EXPECT_THROW(parse_canonical(R"({"layout":"figure2-16","label":1,"frames":[)" + row + ",[[0,0,0]]]}"), ParseError);
  EXPECT_THROW(parse_canonical(R"({"layout":"figure2-16","label":1,"frames":[[[0,0]]]})"), ParseError);
  EXPECT_THROW(parse_canonical("{not json"), ParseError);
}

TEST(Manifest, RoundTripAndMetadata) {
  const std::string text =
      "class_count = 3\nlayout = figure2-16\n# comment\na.json,0,1,2\nb.json,2,-,3\nc.json,1,4,5,0\n";
  const auto m = parse_manifest(text);
  ASSERT_EQ(m.records.size(), 3u);
  EXPECT_EQ(m.records[1].label, 2);
  EXPECT_FALSE(m.records[1].subject_id);
  EXPECT_EQ(m.records[1].camera_id, 3);
  EXPECT_EQ(m.records[2].fold, 0);
  EXPECT_EQ(parse_manifest(write_manifest(m)).records, m.records);
}

TEST(Manifest, Errors) {
  EXPECT_THROW(parse_manifest("class_count = 2\nlayout = figure2-16\na.json,2\n"), Error);
  EXPECT_THROW(parse_manifest("class_count = 2\nlayout = figure2-16\na.json,0\na.json,1\n"), Error);
  EXPECT_THROW(parse_manifest("class_count = 2\nlayout = figure2-16\na.json\n"), ParseError);
  EXPECT_THROW(parse_manifest("layout = figure2-16\na.json,0\n"), Error);
}

TEST(Manifest, LoadRecordOverridesMetadata) {
  testkit::TempDir dir("manifest");
  SplitMix64 rng(12);
  auto seq = testkit::random_sequence(rng, builtin_layout("figure2-16"), 4);
  seq.label = 0;
  write_file(dir.path() / "s.json", write_canonical(seq));
  ManifestRecord rec{"s.json", 1, 7, 2, std::nullopt};
  const auto loaded = load_record(rec, builtin_layout("figure2-16"), dir.path());
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].label, 1);
  EXPECT_EQ(loaded[0].subject_id, 7);
  EXPECT_EQ(loaded[0].positions, seq.positions);
  EXPECT_THROW(load_record(rec, builtin_layout("ntu-25"), dir.path()), Error);
}

TEST(Manifest, RecordWithSeveralFiles) {
  testkit::TempDir dir("pair");
  SplitMix64 rng(13);
  const auto a = testkit::random_sequence(rng, builtin_layout("sbu-15"), 5);
  const auto b = testkit::random_sequence(rng, builtin_layout("sbu-15"), 5);
  write_file(dir.path() / "a.json", write_canonical(a));
  write_file(dir.path() / "b.json", write_canonical(b));
  const auto manifest = parse_manifest("class_count = 8\nlayout = sbu-15\na.json | b.json, 3, 1, -\n");
  const auto loaded = load_record(manifest.records[0], manifest.layout, dir.path());
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].positions, a.positions);
  EXPECT_EQ(loaded[1].positions, b.positions);
  EXPECT_EQ(loaded[1].label, 3);
  ManifestRecord broken{"a.json|", 0, std::nullopt, std::nullopt, std::nullopt};
  EXPECT_THROW(load_record(broken, manifest.layout, dir.path()), ConfigError);
}
