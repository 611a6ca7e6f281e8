#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "linekit/errors.hpp"
#include "linekit/image.hpp"
#include "linekit/segment.hpp"

namespace linekit {

/// 256-bit binary descriptor of the gradient statistics in bands parallel
/// to a segment.
struct BandDescriptor {
  static constexpr int kBits = 256;
  std::array<std::uint64_t, 4> words{};

  bool get(int i) const { return (words[i >> 6] >> (i & 63)) & 1u; }
  void set(int i) { words[i >> 6] |= std::uint64_t{1} << (i & 63); }

  int hamming(const BandDescriptor& other) const {
    int d = 0;
    for (int w = 0; w < 4; ++w) d += std::popcount(words[w] ^ other.words[w]);
    return d;
  }

  bool operator==(const BandDescriptor&) const = default;
};

namespace detail {

constexpr int kBands = 8;        // bands parallel to the segment
constexpr double kBandWidth = 3.0;
constexpr int kSamples = 16;     // samples along the segment per band
constexpr int kStats = 4 * kBands;

// Mirror map under a 180 degree image rotation: band b goes to band
// kBands-1-b, the statistic kind is unchanged.
inline int mirror_stat(int s) {
  const int kind = s / kBands;
  const int band = s % kBands;
  return kind * kBands + (kBands - 1 - band);
}

// Fixed comparison pairs, stored so that the mirrored pair of index 2k sits
// at index 2k+1. A 180 degree rotation therefore permutes descriptor bits
// by XOR with 1.
inline const std::array<std::pair<std::uint8_t, std::uint8_t>, BandDescriptor::kBits>&
bit_pairs() {
  static const auto pairs = [] {
    std::array<std::pair<std::uint8_t, std::uint8_t>, BandDescriptor::kBits> out{};
    std::uint32_t state = 0x9d2c5680u;
    auto next = [&state] {
      state = state * 1664525u + 1013904223u;
      return state >> 16;
    };
    for (int k = 0; k < BandDescriptor::kBits / 2; ++k) {
      int i = 0, j = 0;
      do {
        i = static_cast<int>(next() % kStats);
        j = static_cast<int>(next() % kStats);
      } while (i == j);
      out[2 * k] = {static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(j)};
      out[2 * k + 1] = {static_cast<std::uint8_t>(mirror_stat(i)),
                        static_cast<std::uint8_t>(mirror_stat(j))};
    }
    return out;
  }();
  return pairs;
}

// Bilinear sample of the gradient vector. The 2x2 scheme samples at pixel
// corners, hence the -0.5 grid offset.
inline Eigen::Vector2d sample_gradient(const GradientField& g, const Eigen::Vector2d& p) {
  const double u = std::clamp(p.x() - 0.5, 0.0, g.width - 2.000001);
  const double v = std::clamp(p.y() - 0.5, 0.0, g.height - 2.000001);
  const int x0 = static_cast<int>(u);
  const int y0 = static_cast<int>(v);
  const double fx = u - x0;
  const double fy = v - y0;
  auto grad = [&g](int x, int y) -> Eigen::Vector2d {
    const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
    // Reconstructed from the cached level-line direction: gx = dir_y*mag,
    // gy = -dir_x*mag.
    return {g.dir_y[i] * g.magnitude[i], -g.dir_x[i] * g.magnitude[i]};
  };
  return (1 - fx) * (1 - fy) * grad(x0, y0) + fx * (1 - fy) * grad(x0 + 1, y0) +
         (1 - fx) * fy * grad(x0, y0 + 1) + fx * fy * grad(x0 + 1, y0 + 1);
}

}  // namespace detail

/// Core descriptor computation on a precomputed gradient field.
inline BandDescriptor describe(const GradientField& grad, const LineSegment2D& seg) {
  const Eigen::Vector2d dir = (seg.p2 - seg.p1).normalized();
  const Eigen::Vector2d normal(-dir.y(), dir.x());

  // Per-band sums of the gradient in the segment frame.
  std::array<double, detail::kStats> stats{};
  for (int b = 0; b < detail::kBands; ++b) {
    const double offset = (b - 0.5 * (detail::kBands - 1)) * detail::kBandWidth;
    double sum_abs_u = 0.0, sum_abs_v = 0.0, sum_u = 0.0, sum_v = 0.0;
    for (int s = 0; s < detail::kSamples; ++s) {
      const double t = (s + 0.5) / detail::kSamples;
      const Eigen::Vector2d p = seg.p1 + t * (seg.p2 - seg.p1) + offset * normal;
      const Eigen::Vector2d g = detail::sample_gradient(grad, p);
      const double gu = g.dot(dir);
      const double gv = g.dot(normal);
      sum_abs_u += std::abs(gu);
      sum_abs_v += std::abs(gv);
      sum_u += gu;
      sum_v += gv;
    }
    stats[0 * detail::kBands + b] = sum_abs_u;
    stats[1 * detail::kBands + b] = sum_abs_v;
    stats[2 * detail::kBands + b] = std::abs(sum_u);
    stats[3 * detail::kBands + b] = std::abs(sum_v);
  }

  BandDescriptor desc;
  const auto& pairs = detail::bit_pairs();
  for (int k = 0; k < BandDescriptor::kBits; ++k)
    if (stats[pairs[k].first] > stats[pairs[k].second]) desc.set(k);
  return desc;
}

/// Descriptor of one segment; computes the image gradient internally.
inline BandDescriptor describe(const GrayImage& img, const LineSegment2D& seg) {
  if (!img.in_bounds(seg.p1.x(), seg.p1.y()) || !img.in_bounds(seg.p2.x(), seg.p2.y()))
    throw std::invalid_argument("segment endpoint outside the image");
  return describe(compute_gradient(img), seg);
}

/// Descriptors for a whole frame, sharing one gradient computation.
inline std::vector<BandDescriptor> describe_all(const GrayImage& img,
                                                const std::vector<LineSegment2D>& segments) {
  for (const auto& seg : segments) {
    if (!img.in_bounds(seg.p1.x(), seg.p1.y()) || !img.in_bounds(seg.p2.x(), seg.p2.y()))
      throw std::invalid_argument("segment endpoint outside the image");
  }
  const GradientField grad = compute_gradient(img);
  std::vector<BandDescriptor> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) out.push_back(describe(grad, seg));
  return out;
}

struct LineMatch {
  int index_a = -1;
  int index_b = -1;
  int hamming = 0;
  double angle_diff = 0.0;  // radians, [0, pi/2]
};

/// Mutual-best nearest-neighbor matching by Hamming distance, gated on a
/// maximum distance and a maximum angle difference between the segments.
/// One-to-one by construction; output sorted by index_a.
inline std::vector<LineMatch> match_lines(const std::vector<BandDescriptor>& desc_a,
                                          const std::vector<BandDescriptor>& desc_b,
                                          const std::vector<LineSegment2D>& segs_a,
                                          const std::vector<LineSegment2D>& segs_b,
                                          int hamming_gate = 30, double angle_gate = 0.1) {
  if (desc_a.size() != segs_a.size() || desc_b.size() != segs_b.size())
    throw std::invalid_argument("descriptor and segment lists must be aligned");

  const int na = static_cast<int>(desc_a.size());
  const int nb = static_cast<int>(desc_b.size());
  std::vector<LineMatch> matches;
  if (na == 0 || nb == 0) return matches;

  auto nearest = [](const std::vector<BandDescriptor>& from, const std::vector<BandDescriptor>& to,
                    int i) {
    int best = -1;
    int best_d = BandDescriptor::kBits + 1;
    for (int j = 0; j < static_cast<int>(to.size()); ++j) {
      const int d = from[i].hamming(to[j]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    return std::pair<int, int>{best, best_d};
  };

  std::vector<int> best_b(na), best_a(nb);
  for (int i = 0; i < na; ++i) best_b[i] = nearest(desc_a, desc_b, i).first;
  for (int j = 0; j < nb; ++j) best_a[j] = nearest(desc_b, desc_a, j).first;

  for (int i = 0; i < na; ++i) {
    const int j = best_b[i];
    if (j < 0 || best_a[j] != i) continue;  // mutual best only
    const int d = desc_a[i].hamming(desc_b[j]);
    const double angle_diff = folded_angle_diff(segs_a[i].angle, segs_b[j].angle);
    if (d > hamming_gate || angle_diff > angle_gate) continue;
    matches.push_back({i, j, d, angle_diff});
  }
  return matches;  // already ordered by index_a
}

}  // namespace linekit
