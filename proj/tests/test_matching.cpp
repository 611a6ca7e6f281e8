#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "linekit/matching.hpp"
#include "oracles.hpp"

using namespace linekit;

namespace {

struct FramePair {
  GrayImage image_a;
  GrayImage image_b;
  std::vector<LineSegment2D> segs_a;
  std::vector<LineSegment2D> segs_b;  // jittered + permuted copy of segs_a
  std::vector<int> perm;              // segs_b[perm[i]] corresponds to segs_a[i]
};

// Two frames of the same textured scene: frame B re-renders the segments
// with bounded endpoint jitter and shuffles their order.
FramePair make_frame_pair(int count, double jitter, std::uint64_t seed) {
  oracles::SegmentSceneConfig cfg;
  cfg.count = count;
  cfg.min_length = 80.0;
  cfg.max_length = 220.0;
  cfg.min_separation = 30.0;
  cfg.margin = 40.0;
  cfg.textured = true;
  const auto scene = oracles::make_segment_scene(cfg, seed);

  FramePair pair;
  pair.segs_a = scene.truth;
  pair.image_a = scene.image;

  std::mt19937_64 rng(seed ^ 0xabcdefULL);
  std::uniform_real_distribution<double> uj(-jitter, jitter);
  std::vector<LineSegment2D> jittered;
  for (const auto& s : pair.segs_a) {
    jittered.push_back(make_segment(s.p1 + Eigen::Vector2d(uj(rng), uj(rng)),
                                    s.p2 + Eigen::Vector2d(uj(rng), uj(rng))));
  }
  pair.perm.resize(jittered.size());
  std::iota(pair.perm.begin(), pair.perm.end(), 0);
  std::shuffle(pair.perm.begin(), pair.perm.end(), rng);
  pair.segs_b.resize(jittered.size());
  for (std::size_t i = 0; i < jittered.size(); ++i) pair.segs_b[pair.perm[i]] = jittered[i];

  pair.image_b = oracles::textured_background(cfg.width, cfg.height, seed ^ 0x9e3779b97f4a7c15ULL);
  oracles::draw_segments(pair.image_b, pair.segs_b, cfg.foreground, cfg.stroke_width);
  return pair;
}

}  // namespace

TEST_CASE("describe is deterministic") {
  const auto scene = oracles::make_segment_scene({}, 11);
  const auto& seg = scene.truth.front();
  REQUIRE(describe(scene.image, seg) == describe(scene.image, seg));
}

TEST_CASE("describe is invariant to a constant intensity offset") {
  oracles::SegmentSceneConfig cfg;
  cfg.textured = true;
  cfg.texture_lo = 20.0;
  cfg.texture_hi = 150.0;
  const auto scene = oracles::make_segment_scene(cfg, 13);
  GrayImage shifted = scene.image;
  for (double& v : shifted.data) v += 60.0;

  for (int i = 0; i < 5; ++i)
    REQUIRE(describe(scene.image, scene.truth[i]) == describe(shifted, scene.truth[i]));
}

TEST_CASE("describe separates parallel segments over different textures") {
  GrayImage img = oracles::textured_background(400, 300, 77);
  const auto a = make_segment({60.0, 80.0}, {300.0, 80.0});
  const auto b = make_segment({60.0, 200.0}, {300.0, 200.0});
  oracles::draw_segments(img, {a, b}, 230.0, 1.5);
  REQUIRE(describe(img, a).hamming(describe(img, b)) > 0);
}

TEST_CASE("describe rejects out-of-bounds segments") {
  const GrayImage img(64, 64, 0.0);
  REQUIRE_THROWS_AS(describe(img, make_segment({-2.0, 5.0}, {30.0, 5.0})), std::invalid_argument);
  REQUIRE_THROWS_AS(describe(img, make_segment({2.0, 5.0}, {70.0, 5.0})), std::invalid_argument);
}

TEST_CASE("a 180 degree rotation permutes descriptor bits by XOR 1") {
  // Quarter-pixel coordinates keep the mirrored bilinear sampling exact.
  GrayImage img = oracles::textured_background(256, 192, 123);
  const auto seg = make_segment({60.25, 50.75}, {190.5, 140.25});
  oracles::draw_segments(img, {seg}, 220.0, 1.5);

  GrayImage rotated(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      rotated(x, y) = img(img.width - 1 - x, img.height - 1 - y);
  const auto rot_seg = make_segment(
      {img.width - 1 - seg.p1.x(), img.height - 1 - seg.p1.y()},
      {img.width - 1 - seg.p2.x(), img.height - 1 - seg.p2.y()});

  const BandDescriptor original = describe(img, seg);
  const BandDescriptor rotated_desc = describe(rotated, rot_seg);
  for (int k = 0; k < BandDescriptor::kBits; ++k)
    REQUIRE(rotated_desc.get(k) == original.get(k ^ 1));
}

TEST_CASE("match_lines on identical frames is the identity") {
  const auto pair = make_frame_pair(12, 0.0, 21);
  const auto desc = describe_all(pair.image_a, pair.segs_a);
  const auto matches = match_lines(desc, desc, pair.segs_a, pair.segs_a);
  REQUIRE(matches.size() == pair.segs_a.size());
  for (const auto& m : matches) {
    REQUIRE(m.index_a == m.index_b);
    REQUIRE(m.hamming == 0);
    REQUIRE(m.angle_diff == 0.0);
  }
}

TEST_CASE("match_lines rejects pairs rotated past the angle gate") {
  GrayImage img = oracles::textured_background(400, 300, 31);
  const auto a = make_segment({100.0, 150.0}, {300.0, 150.0});
  oracles::draw_segments(img, {a}, 230.0, 1.5);

  // Same center, rotated by 0.2 rad.
  const Eigen::Vector2d c = a.midpoint();
  const Eigen::Vector2d half = 0.5 * (a.p2 - a.p1);
  const Eigen::Vector2d r(std::cos(0.2) * half.x() - std::sin(0.2) * half.y(),
                          std::sin(0.2) * half.x() + std::cos(0.2) * half.y());
  const auto b = make_segment(c - r, c + r);
  GrayImage img_b = oracles::textured_background(400, 300, 31);
  oracles::draw_segments(img_b, {b}, 230.0, 1.5);

  const auto matches = match_lines({describe(img, a)}, {describe(img_b, b)}, {a}, {b},
                                   BandDescriptor::kBits, 0.1);
  REQUIRE(matches.empty());
}

TEST_CASE("match_lines recovers a known permutation under 2 px jitter") {
  int correct = 0, wrong = 0, total = 0;
  for (std::uint64_t seed : {501ULL, 502ULL, 503ULL}) {
    const auto pair = make_frame_pair(20, 2.0, seed);
    REQUIRE(pair.segs_a.size() == 20);
    const auto desc_a = describe_all(pair.image_a, pair.segs_a);
    const auto desc_b = describe_all(pair.image_b, pair.segs_b);
    const auto matches = match_lines(desc_a, desc_b, pair.segs_a, pair.segs_b);
    for (const auto& m : matches) {
      if (pair.perm[m.index_a] == m.index_b)
        ++correct;
      else
        ++wrong;
    }
    total += 20;
  }
  INFO("correct " << correct << " wrong " << wrong << " of " << total);
  REQUIRE(wrong == 0);
  REQUIRE(correct >= total * 18 / 20);
}

TEST_CASE("match_lines output is one-to-one and satisfies both gates") {
  const auto pair = make_frame_pair(15, 2.0, 61);
  const auto desc_a = describe_all(pair.image_a, pair.segs_a);
  const auto desc_b = describe_all(pair.image_b, pair.segs_b);
  const int hamming_gate = 30;
  const double angle_gate = 0.1;
  const auto matches =
      match_lines(desc_a, desc_b, pair.segs_a, pair.segs_b, hamming_gate, angle_gate);

  std::set<int> seen_a, seen_b;
  int prev_a = -1;
  for (const auto& m : matches) {
    REQUIRE(m.hamming <= hamming_gate);
    REQUIRE(m.angle_diff <= angle_gate);
    REQUIRE(m.hamming == desc_a[m.index_a].hamming(desc_b[m.index_b]));
    REQUIRE(seen_a.insert(m.index_a).second);
    REQUIRE(seen_b.insert(m.index_b).second);
    REQUIRE(m.index_a > prev_a);  // sorted by index_a
    prev_a = m.index_a;
  }
}

TEST_CASE("match_lines is symmetric under argument swap") {
  const auto pair = make_frame_pair(15, 2.0, 71);
  const auto desc_a = describe_all(pair.image_a, pair.segs_a);
  const auto desc_b = describe_all(pair.image_b, pair.segs_b);
  const auto ab = match_lines(desc_a, desc_b, pair.segs_a, pair.segs_b);
  const auto ba = match_lines(desc_b, desc_a, pair.segs_b, pair.segs_a);

  std::set<std::pair<int, int>> set_ab, set_ba;
  for (const auto& m : ab) set_ab.insert({m.index_a, m.index_b});
  for (const auto& m : ba) set_ba.insert({m.index_b, m.index_a});
  REQUIRE(set_ab == set_ba);
}

TEST_CASE("match_lines validates aligned list lengths") {
  const auto pair = make_frame_pair(5, 0.0, 81);
  const auto desc = describe_all(pair.image_a, pair.segs_a);
  auto short_segs = pair.segs_a;
  short_segs.pop_back();
  REQUIRE_THROWS_AS(match_lines(desc, desc, short_segs, pair.segs_a), std::invalid_argument);
}
