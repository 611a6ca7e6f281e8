#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "linekit/errors.hpp"
#include "linekit/image.hpp"
#include "linekit/segment.hpp"

namespace linekit {

/// Detector tuning. The defaults are the pose-estimation configuration:
/// a two-layer pyramid with ratio 0.5, image scale s = 0.5, density
/// threshold d = 0.6 and length-rejection ratio eta = 0.125. Angle and
/// gradient-quantization tolerances keep the stock values.
struct DetectorParams {
  int n_layers = 2;                                        // pyramid depth N
  double layer_ratio = 0.5;                                // r, (0,1)
  double image_scale = 0.5;                                // s, (0,1]
  double density_threshold = 0.6;                          // d, [0,1]
  double angle_tolerance = 22.5 * std::numbers::pi / 180;  // radians
  double gradient_quant_tolerance = 2.0;                   // intensity units
  double length_ratio = 0.125;                             // eta, >= 0
  bool refine = true;

  void validate() const {
    if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
    if (!(layer_ratio > 0.0 && layer_ratio < 1.0))
      throw std::invalid_argument("layer_ratio must be in (0, 1)");
    if (!(image_scale > 0.0 && image_scale <= 1.0))
      throw std::invalid_argument("image_scale must be in (0, 1]");
    if (!(density_threshold >= 0.0 && density_threshold <= 1.0))
      throw std::invalid_argument("density_threshold must be in [0, 1]");
    if (!(angle_tolerance > 0.0 && angle_tolerance < std::numbers::pi / 2))
      throw std::invalid_argument("angle_tolerance must be in (0, pi/2)");
    if (gradient_quant_tolerance < 0.0)
      throw std::invalid_argument("gradient_quant_tolerance must be nonnegative");
    if (length_ratio < 0.0) throw std::invalid_argument("length_ratio must be nonnegative");
  }
};

/// Rectangle approximation of a line-support region.
struct RegionRect {
  Eigen::Vector2d p1{0.0, 0.0};
  Eigen::Vector2d p2{0.0, 0.0};
  Eigen::Vector2d center{0.0, 0.0};
  double angle = 0.0;  // main axis direction
  double width = 1.0;

  double length() const { return (p2 - p1).norm(); }
};

/// Line-support region together with its rectangle approximation and the
/// density decision, exposed for inspection by tests.
struct LineSupportRegion {
  std::vector<Eigen::Vector2i> pixels;
  double angle = 0.0;  // running level-line angle of the region
  RegionRect rect;
  int aligned_count = 0;
  double density = 0.0;
  bool refined = false;
  bool accepted = false;
};

/// Minimum segment length from the rejection ratio: ceil(eta * min(W, H)).
inline int length_threshold(int width, int height, double eta) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("dimensions must be positive");
  if (eta < 0.0) throw std::invalid_argument("eta must be nonnegative");
  return static_cast<int>(std::ceil(eta * std::min(width, height)));
}

/// Keeps segments with length >= l_min, preserving order.
inline std::vector<LineSegment2D> filter_by_length(const std::vector<LineSegment2D>& segments,
                                                   double l_min) {
  std::vector<LineSegment2D> out;
  out.reserve(segments.size());
  for (const auto& s : segments)
    if (s.length >= l_min) out.push_back(s);
  return out;
}

namespace detail {

constexpr int kMagnitudeBins = 1024;
constexpr int kMinRegionSize = 10;

// Angle distance treating level-line angles as directions on the full
// circle (an edge and its contrast-reversed twin are not aligned).
inline double angle_diff_2pi(double a, double b) {
  double d = a - b;
  while (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
  while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
  return std::abs(d);
}

inline bool is_aligned(double pixel_angle, double region_angle, double tolerance) {
  return angle_diff_2pi(pixel_angle, region_angle) <= tolerance;
}

// Seed pixels in decreasing-magnitude pseudo-order: 1024 coarse bins,
// raster order within a bin (counting sort).
inline std::vector<int> seed_order(const GradientField& g) {
  double max_mag = 0.0;
  std::size_t usable_count = 0;
  for (std::size_t i = 0; i < g.magnitude.size(); ++i) {
    if (g.usable[i]) {
      max_mag = std::max(max_mag, g.magnitude[i]);
      ++usable_count;
    }
  }
  if (max_mag <= 0.0 || usable_count == 0) return {};

  const double bin_scale = kMagnitudeBins / max_mag;
  std::vector<int> counts(kMagnitudeBins + 1, 0);
  for (std::size_t i = 0; i < g.magnitude.size(); ++i) {
    if (!g.usable[i]) continue;
    const int b = std::clamp(static_cast<int>(g.magnitude[i] * bin_scale), 0, kMagnitudeBins - 1);
    ++counts[b];
  }
  // Offsets so that higher bins come first, raster order within a bin.
  std::vector<int> offsets(kMagnitudeBins, 0);
  int running = 0;
  for (int b = kMagnitudeBins - 1; b >= 0; --b) {
    offsets[b] = running;
    running += counts[b];
  }
  std::vector<int> order(usable_count);
  for (std::size_t i = 0; i < g.magnitude.size(); ++i) {
    if (!g.usable[i]) continue;
    const int b = std::clamp(static_cast<int>(g.magnitude[i] * bin_scale), 0, kMagnitudeBins - 1);
    order[offsets[b]++] = static_cast<int>(i);
  }
  return order;
}

// Grows an 8-connected region of pixels whose level-line angle stays within
// tolerance of the running region angle. The alignment test
// |angle - region_angle| <= tol (mod 2pi) is evaluated trig-free as
// cos(angle - region_angle) >= cos(tol) on the cached unit directions.
inline void grow_region(const GradientField& g, int seed, double tolerance,
                        std::vector<std::uint8_t>& used, std::vector<int>& pixels,
                        double& region_angle) {
  pixels.clear();
  pixels.push_back(seed);
  used[seed] = 1;
  double sumdx = g.dir_x[seed];
  double sumdy = g.dir_y[seed];
  double cx = sumdx;  // unit vector of the running region angle
  double cy = sumdy;
  const double cos_tol = std::cos(tolerance);

  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const int p = pixels[i];
    const int x = p % g.width;
    const int y = p / g.width;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= g.width || ny >= g.height) continue;
        const int n = ny * g.width + nx;
        if (used[n] || !g.usable[n]) continue;
        if (g.dir_x[n] * cx + g.dir_y[n] * cy < cos_tol) continue;
        used[n] = 1;
        pixels.push_back(n);
        sumdx += g.dir_x[n];
        sumdy += g.dir_y[n];
        const double norm = std::sqrt(sumdx * sumdx + sumdy * sumdy);
        if (norm > 0.0) {
          cx = sumdx / norm;
          cy = sumdy / norm;
        }
      }
    }
  }
  region_angle = std::atan2(sumdy, sumdx);
}

// Rectangle approximation: magnitude-weighted centroid, principal axis of
// the weighted second-moment matrix (flipped to agree with the region
// angle), extents from extremal projections.
inline RegionRect rect_from_region(const std::vector<int>& pixels, const GradientField& g,
                                   double region_angle, double tolerance) {
  double sw = 0.0, cx = 0.0, cy = 0.0;
  for (int p : pixels) {
    const double w = g.magnitude[p];
    cx += w * (p % g.width);
    cy += w * (p / g.width);
    sw += w;
  }
  cx /= sw;
  cy /= sw;

  double ixx = 0.0, iyy = 0.0, ixy = 0.0;
  for (int p : pixels) {
    const double w = g.magnitude[p];
    const double rx = (p % g.width) - cx;
    const double ry = (p / g.width) - cy;
    ixx += w * ry * ry;
    iyy += w * rx * rx;
    ixy -= w * rx * ry;
  }
  const double lambda = 0.5 * (ixx + iyy - std::sqrt((ixx - iyy) * (ixx - iyy) + 4.0 * ixy * ixy));
  double theta = std::abs(ixx) > std::abs(iyy) ? std::atan2(lambda - ixx, ixy)
                                               : std::atan2(ixy, lambda - iyy);
  if (angle_diff_2pi(theta, region_angle) > tolerance) theta += std::numbers::pi;

  const double dx = std::cos(theta);
  const double dy = std::sin(theta);
  double lmin = 0.0, lmax = 0.0, wmin = 0.0, wmax = 0.0;
  for (int p : pixels) {
    const double rx = (p % g.width) - cx;
    const double ry = (p / g.width) - cy;
    const double l = rx * dx + ry * dy;
    const double w = -rx * dy + ry * dx;
    lmin = std::min(lmin, l);
    lmax = std::max(lmax, l);
    wmin = std::min(wmin, w);
    wmax = std::max(wmax, w);
  }

  RegionRect rect;
  rect.center = Eigen::Vector2d(cx, cy);
  rect.angle = theta;
  rect.p1 = Eigen::Vector2d(cx + lmin * dx, cy + lmin * dy);
  rect.p2 = Eigen::Vector2d(cx + lmax * dx, cy + lmax * dy);
  rect.width = std::max(1.0, wmax - wmin);
  return rect;
}

inline double rect_density(std::size_t region_size, const RegionRect& rect) {
  const double area = rect.length() * rect.width;
  return area > 0.0 ? static_cast<double>(region_size) / area : 0.0;
}

// One shrink-and-retry pass: keep pixels within 75% of the seed-to-endpoint
// radius, releasing the rest for future regions.
inline bool reduce_region(std::vector<int>& pixels, const GradientField& g, const RegionRect& rect,
                          std::vector<std::uint8_t>& used) {
  const int seed = pixels.front();
  const Eigen::Vector2d s(seed % g.width, seed / g.width);
  const double rad = 0.75 * std::max((s - rect.p1).norm(), (s - rect.p2).norm());
  std::vector<int> kept;
  kept.reserve(pixels.size());
  for (int p : pixels) {
    const Eigen::Vector2d q(p % g.width, p / g.width);
    if ((q - s).norm() <= rad) {
      kept.push_back(p);
    } else {
      used[p] = 0;
    }
  }
  pixels.swap(kept);
  return pixels.size() >= kMinRegionSize;
}

}  // namespace detail

/// Runs region partition + rectangle approximation on the image as given
/// (no pyramid, no rescaling, no length filter) and reports every region
/// considered, including rejected ones. Intended for inspection and tests;
/// detect_lines uses the same core.
inline std::vector<LineSupportRegion> line_support_regions(const GrayImage& img,
                                                           const DetectorParams& params) {
  params.validate();
  const double rho = params.gradient_quant_tolerance / std::sin(params.angle_tolerance);
  const GradientField g = compute_gradient(img, rho);

  std::vector<LineSupportRegion> regions;
  std::vector<std::uint8_t> used(g.magnitude.size(), 0);
  std::vector<int> pixels;
  for (int seed : detail::seed_order(g)) {
    if (used[seed]) continue;
    double region_angle = 0.0;
    detail::grow_region(g, seed, params.angle_tolerance, used, pixels, region_angle);
    if (pixels.size() < detail::kMinRegionSize) continue;

    LineSupportRegion region;
    region.angle = region_angle;
    region.rect = detail::rect_from_region(pixels, g, region_angle, params.angle_tolerance);
    region.density = detail::rect_density(pixels.size(), region.rect);
    if (region.density < params.density_threshold && params.refine) {
      region.refined = true;
      if (detail::reduce_region(pixels, g, region.rect, used)) {
        region.rect = detail::rect_from_region(pixels, g, region_angle, params.angle_tolerance);
        region.density = detail::rect_density(pixels.size(), region.rect);
      } else {
        region.density = 0.0;
      }
    }
    region.accepted = region.density >= params.density_threshold && !pixels.empty();
    region.aligned_count = static_cast<int>(pixels.size());
    region.pixels.reserve(pixels.size());
    for (int p : pixels) region.pixels.emplace_back(p % g.width, p / g.width);
    regions.push_back(std::move(region));
  }
  return regions;
}

namespace detail {

// Detection with the unfolded rectangle axis angle, which carries the
// gradient polarity: the two flanks of a bright stroke detect as
// antiparallel axes.
struct RawDetection {
  Eigen::Vector2d p1;
  Eigen::Vector2d p2;
  double axis_angle = 0.0;
  int layer = 0;

  double length() const { return (p2 - p1).norm(); }
  Eigen::Vector2d midpoint() const { return 0.5 * (p1 + p2); }
  Eigen::Vector2d direction() const { return (p2 - p1).normalized(); }
};

// Core detection on one (already scaled) image. The 2x2 gradient scheme
// samples at pixel corners, so rectangle coordinates get a +0.5 shift to
// land on the image grid.
inline std::vector<RawDetection> detect_on_image(const GrayImage& img,
                                                 const DetectorParams& params, int layer) {
  std::vector<RawDetection> detections;
  const Eigen::Vector2d half(0.5, 0.5);
  for (const LineSupportRegion& region : line_support_regions(img, params)) {
    if (!region.accepted) continue;
    if (region.rect.length() <= 0.0) continue;
    detections.push_back({region.rect.p1 + half, region.rect.p2 + half, region.rect.angle, layer});
  }
  return detections;
}

constexpr double kMergeAngleGate = 3.0 * std::numbers::pi / 180.0;
constexpr double kMergeLateralGate = 3.0;
constexpr double kFlankLateralGate = 4.0;  // detection-image pixels

inline double lateral_offset(const RawDetection& base, const Eigen::Vector2d& point) {
  const Eigen::Vector2d dir = base.direction();
  const Eigen::Vector2d off = point - base.midpoint();
  return std::abs(dir.x() * off.y() - dir.y() * off.x());
}

// Longitudinal overlap of the two segments projected on base's axis.
inline double axis_overlap(const RawDetection& base, const RawDetection& other) {
  const Eigen::Vector2d dir = base.direction();
  const Eigen::Vector2d mid = base.midpoint();
  const double b0 = dir.dot(base.p1 - mid);
  const double b1 = dir.dot(base.p2 - mid);
  const double o0 = dir.dot(other.p1 - mid);
  const double o1 = dir.dot(other.p2 - mid);
  const double lo = std::max(std::min(b0, b1), std::min(o0, o1));
  const double hi = std::min(std::max(b0, b1), std::max(o0, o1));
  return hi - lo;
}

// The two flanks of one stroke: nearly collinear segments of similar length
// with antiparallel gradient polarity, a few pixels apart laterally.
inline bool is_flank_twin(const RawDetection& a, const RawDetection& b) {
  if (a.layer != b.layer) return false;
  if (angle_diff_2pi(a.axis_angle, b.axis_angle) < std::numbers::pi / 2) return false;
  if (folded_angle_diff(a.axis_angle, b.axis_angle) >= kMergeAngleGate) return false;
  const double lat = lateral_offset(a, b.midpoint());
  if (lat > kFlankLateralGate) return false;
  const double len_a = a.length();
  const double len_b = b.length();
  if (std::min(len_a, len_b) < 0.5 * std::max(len_a, len_b)) return false;
  return axis_overlap(a, b) >= 0.5 * std::min(len_a, len_b);
}

// Length-weighted fusion of near-collinear detections: averaged axis and
// midpoint, extents averaged per side. For a flank pair this lands on the
// stroke centerline.
inline RawDetection fuse(const std::vector<const RawDetection*>& members) {
  const RawDetection& ref = *members.front();
  const Eigen::Vector2d ref_dir = ref.direction();
  Eigen::Vector2d dir_sum = Eigen::Vector2d::Zero();
  Eigen::Vector2d mid_sum = Eigen::Vector2d::Zero();
  double weight = 0.0;
  for (const RawDetection* m : members) {
    const double w = m->length();
    const Eigen::Vector2d d = m->direction();
    dir_sum += w * (d.dot(ref_dir) >= 0.0 ? d : Eigen::Vector2d(-d));
    mid_sum += w * m->midpoint();
    weight += w;
  }
  const Eigen::Vector2d dir = dir_sum.normalized();
  const Eigen::Vector2d mid = mid_sum / weight;

  double lo = 0.0, hi = 0.0;
  for (const RawDetection* m : members) {
    const double w = m->length();
    const double e0 = dir.dot(m->p1 - mid);
    const double e1 = dir.dot(m->p2 - mid);
    lo += w * std::min(e0, e1);
    hi += w * std::max(e0, e1);
  }
  lo /= weight;
  hi /= weight;
  return {mid + lo * dir, mid + hi * dir, ref.axis_angle, ref.layer};
}

inline void sort_by_length_desc(std::vector<RawDetection>& dets) {
  std::sort(dets.begin(), dets.end(), [](const RawDetection& a, const RawDetection& b) {
    const double la = a.length(), lb = b.length();
    if (la != lb) return la > lb;
    const Eigen::Vector2d ma = a.midpoint(), mb = b.midpoint();
    if (ma.x() != mb.x()) return ma.x() < mb.x();
    return ma.y() < mb.y();
  });
}

// Buckets detections by folded axis angle so that near-parallel candidate
// pairs are found without scanning all pairs. Bucket width exceeds the 3
// degree merge gate; neighbors one bucket away (with wraparound) cover it.
class AngleBuckets {
 public:
  explicit AngleBuckets(std::size_t hint) { buckets_.resize(kCount); (void)hint; }

  static int bucket_of(double angle) {
    const double folded = std::fmod(angle + std::numbers::pi, std::numbers::pi);
    int b = static_cast<int>(folded / (std::numbers::pi / kCount));
    return std::clamp(b, 0, kCount - 1);
  }

  void insert(double angle, int index) { buckets_[bucket_of(angle)].push_back(index); }

  template <typename Fn>
  void for_each_near(double angle, Fn&& fn) const {
    const int b = bucket_of(angle);
    for (int off = -1; off <= 1; ++off) {
      const int bb = (b + off + kCount) % kCount;
      for (int idx : buckets_[bb]) fn(idx);
    }
  }

 private:
  static constexpr int kCount = 45;  // 4 degree buckets
  std::vector<std::vector<int>> buckets_;
};

// Fuses antiparallel flank twins onto the stroke centerline. Runs per layer
// in detection-image coordinates, where the flank separation is a few
// pixels regardless of scale.
inline std::vector<RawDetection> fuse_flank_pairs(std::vector<RawDetection> dets) {
  sort_by_length_desc(dets);
  AngleBuckets buckets(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i)
    buckets.insert(dets[i].axis_angle, static_cast<int>(i));

  std::vector<RawDetection> fused;
  std::vector<bool> used(dets.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    int best = -1;
    double best_lat = kFlankLateralGate + 1.0;
    buckets.for_each_near(dets[i].axis_angle, [&](int j) {
      if (j <= static_cast<int>(i) || used[j] || !is_flank_twin(dets[i], dets[j])) return;
      const double lat = lateral_offset(dets[i], dets[j].midpoint());
      if (lat < best_lat || (lat == best_lat && j < best)) {
        best_lat = lat;
        best = j;
      }
    });
    if (best >= 0) {
      used[best] = true;
      fused.push_back(fuse({&dets[i], &dets[best]}));
    } else {
      fused.push_back(dets[i]);
    }
  }
  return fused;
}

// Suppresses near-collinear duplicates of the same physical segment across
// pyramid layers, keeping the longer.
inline std::vector<LineSegment2D> merge_duplicates(std::vector<RawDetection> dets) {
  sort_by_length_desc(dets);
  AngleBuckets buckets(dets.size());
  std::vector<RawDetection> kept;
  for (const RawDetection& cand : dets) {
    bool duplicate = false;
    buckets.for_each_near(cand.axis_angle, [&](int ki) {
      if (duplicate) return;
      const RawDetection& k = kept[ki];
      if (folded_angle_diff(k.axis_angle, cand.axis_angle) < kMergeAngleGate &&
          lateral_offset(k, cand.midpoint()) < kMergeLateralGate &&
          std::abs(k.direction().dot(cand.midpoint() - k.midpoint())) < 0.5 * k.length()) {
        duplicate = true;
      }
    });
    if (!duplicate) {
      buckets.insert(cand.axis_angle, static_cast<int>(kept.size()));
      kept.push_back(cand);
    }
  }

  std::vector<LineSegment2D> out;
  out.reserve(kept.size());
  for (const RawDetection& k : kept) out.push_back(make_segment(k.p1, k.p2, k.layer));
  return out;
}

}  // namespace detail

/// Modified LSD pipeline: per pyramid layer the image is rescaled by s and
/// partitioned into line-support regions; rectangles below the density
/// threshold (after one optional shrink retry) are dropped; surviving
/// rectangles become segments in original-image coordinates; duplicates
/// across flanks/layers are merged keeping the longer; segments shorter
/// than length_threshold(W, H, eta) are rejected; output is sorted by
/// descending length. Deterministic for fixed input.
inline std::vector<LineSegment2D> detect_lines(const GrayImage& img, const DetectorParams& params) {
  params.validate();
  if (static_cast<int>(std::ceil(img.width * params.image_scale)) < 8 ||
      static_cast<int>(std::ceil(img.height * params.image_scale)) < 8)
    throw std::invalid_argument("image smaller than 8x8 after scaling");

  std::vector<detail::RawDetection> all;
  GrayImage layer_img = img;
  double layer_scale = 1.0;
  for (int layer = 0; layer < params.n_layers; ++layer) {
    if (layer > 0) {
      layer_img = scale_gaussian(layer_img, params.layer_ratio, 0.6 / params.layer_ratio);
      layer_scale *= params.layer_ratio;
    }
    GrayImage det_img = params.image_scale < 1.0
                            ? scale_gaussian(layer_img, params.image_scale, 0.6 / params.image_scale)
                            : layer_img;
    if (det_img.width < 8 || det_img.height < 8) break;

    const double inv = 1.0 / (layer_scale * params.image_scale);
    for (detail::RawDetection d :
         detail::fuse_flank_pairs(detail::detect_on_image(det_img, params, layer))) {
      d.p1 *= inv;
      d.p2 *= inv;
      all.push_back(d);
    }
  }

  std::vector<LineSegment2D> merged = detail::merge_duplicates(std::move(all));
  return filter_by_length(merged, length_threshold(img.width, img.height, params.length_ratio));
}

/// Wall-clock comparison of two detector configurations over the same
/// images. Each configuration is also re-timed with the pyramid collapsed
/// to a single layer.
struct DetectorBenchmark {
  double mean_ms_a = 0.0;
  double mean_ms_b = 0.0;
  double mean_ms_a_single_layer = 0.0;
  double mean_ms_b_single_layer = 0.0;
  double mean_segments_a = 0.0;
  double mean_segments_b = 0.0;
  int images = 0;
  int repetitions = 0;

  double speedup() const { return mean_ms_a > 0.0 ? mean_ms_b / mean_ms_a : 0.0; }
};

inline DetectorBenchmark benchmark_detector(const std::vector<GrayImage>& images,
                                            const DetectorParams& params_a,
                                            const DetectorParams& params_b, int repetitions) {
  if (images.empty()) throw std::invalid_argument("benchmark needs at least one image");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  params_a.validate();
  params_b.validate();

  using clock = std::chrono::steady_clock;
  auto run = [&images, repetitions](const DetectorParams& p, double& mean_ms,
                                    double& mean_segments) {
    double total_ms = 0.0;
    std::size_t total_segments = 0;
    for (int rep = 0; rep < repetitions; ++rep) {
      for (const GrayImage& img : images) {
        const auto t0 = clock::now();
        const auto segs = detect_lines(img, p);
        const auto t1 = clock::now();
        total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
        total_segments += segs.size();
      }
    }
    const double runs = static_cast<double>(repetitions) * images.size();
    mean_ms = total_ms / runs;
    mean_segments = static_cast<double>(total_segments) / runs;
  };

  DetectorBenchmark report;
  report.images = static_cast<int>(images.size());
  report.repetitions = repetitions;
  run(params_a, report.mean_ms_a, report.mean_segments_a);
  run(params_b, report.mean_ms_b, report.mean_segments_b);

  DetectorParams a1 = params_a;
  DetectorParams b1 = params_b;
  a1.n_layers = 1;
  b1.n_layers = 1;
  double ignored = 0.0;
  run(a1, report.mean_ms_a_single_layer, ignored);
  run(b1, report.mean_ms_b_single_layer, ignored);
  return report;
}

}  // namespace linekit
