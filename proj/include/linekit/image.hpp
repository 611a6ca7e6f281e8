#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "linekit/errors.hpp"
#include "linekit/segment.hpp"

namespace linekit {

/// Grayscale raster with row-major intensities in [0, 255].
/// Pixel (x, y) has its center at real coordinates (x, y).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be positive");
  }

  double operator()(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  double& operator()(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return data.size(); }
  bool in_bounds(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width - 1.0 && y <= height - 1.0;
  }
};

/// Per-pixel gradient magnitude and level-line angle. The level-line angle
/// is orthogonal to the gradient direction, in (-pi, pi]. `usable` is false
/// where the magnitude does not exceed the quantization tolerance (and on
/// the last row/column, where the 2x2 scheme is undefined). dir_x/dir_y
/// cache the unit level-line direction (cos/sin of angle) for usable pixels.
struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<double> magnitude;
  std::vector<double> angle;
  std::vector<std::uint8_t> usable;
  std::vector<double> dir_x;
  std::vector<double> dir_y;

  double mag(int x, int y) const { return magnitude[static_cast<std::size_t>(y) * width + x]; }
  double ang(int x, int y) const { return angle[static_cast<std::size_t>(y) * width + x]; }
  bool ok(int x, int y) const { return usable[static_cast<std::size_t>(y) * width + x] != 0; }
};

namespace detail {

struct PgmCursor {
  std::string_view bytes;
  std::size_t pos = 0;

  bool eof() const { return pos >= bytes.size(); }
  char peek() const { return bytes[pos]; }

  // Whitespace and '#' comments (which run to end of line) separate tokens.
  void skip_separators() {
    while (!eof()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (!eof() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  long read_int(const char* what) {
    skip_separators();
    const std::size_t start = pos;
    if (eof() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      throw ParseError(std::string("expected ") + what, pos);
    long value = 0;
    while (!eof() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000'000L) throw ParseError(std::string(what) + " out of range", start);
      ++pos;
    }
    return value;
  }
};

}  // namespace detail

/// Parses a binary (P5) or ASCII (P2) PGM byte stream with maxval <= 255.
inline GrayImage load_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
    throw ParseError("not a P5/P2 PGM stream", 0);
  const bool binary = bytes[1] == '5';

  detail::PgmCursor cur{bytes, 2};
  const std::size_t dim_pos = cur.pos;
  const long w = cur.read_int("width");
  const long h = cur.read_int("height");
  if (w <= 0 || h <= 0) throw ParseError("image dimensions must be positive", dim_pos);
  const std::size_t maxval_pos = cur.pos;
  const long maxval = cur.read_int("maxval");
  if (maxval <= 0 || maxval > 255) throw ParseError("maxval must be in [1, 255]", maxval_pos);

  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  if (binary) {
    if (cur.eof()) throw ParseError("missing whitespace after maxval", cur.pos);
    ++cur.pos;  // exactly one separator byte before the raster
    if (bytes.size() - cur.pos < img.size())
      throw ParseError("truncated pixel payload", bytes.size());
    for (std::size_t i = 0; i < img.size(); ++i)
      img.data[i] = static_cast<double>(static_cast<unsigned char>(bytes[cur.pos + i]));
  } else {
    for (std::size_t i = 0; i < img.size(); ++i) {
      const std::size_t tok = cur.pos;
      const long v = cur.read_int("pixel value");
      if (v > maxval) throw ParseError("pixel value exceeds maxval", tok);
      img.data[i] = static_cast<double>(v);
    }
  }
  return img;
}

/// Serializes to the canonical binary PGM form: "P5\n<w> <h>\n255\n" + raster.
inline std::string save_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (double v : img.data) {
    const long q = std::lround(std::clamp(v, 0.0, 255.0));
    out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }
  return out;
}

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

inline int sample_index(int out_i, double factor, int limit) {
  const int i = static_cast<int>(std::floor(out_i / factor + 0.5));
  return std::clamp(i, 0, limit - 1);
}

}  // namespace detail

/// Gaussian blur followed by subsampling to ceil(width*factor) x
/// ceil(height*factor). The blur is evaluated only at the sampled positions,
/// which is equivalent to blurring the full image first. factor = 1 with
/// sigma = 0 is the identity.
inline GrayImage scale_gaussian(const GrayImage& img, double factor, double sigma) {
  if (!(factor > 0.0) || factor > 1.0)
    throw std::invalid_argument("scale factor must be in (0, 1]");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
  if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("empty image");

  const int ow = static_cast<int>(std::ceil(img.width * factor));
  const int oh = static_cast<int>(std::ceil(img.height * factor));
  const std::vector<double> kernel = detail::gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int taps = 2 * radius + 1;

  // Horizontal pass, evaluated at sampled columns only. Border columns take
  // the clamped path; interior columns run contiguously.
  std::vector<double> tmp(static_cast<std::size_t>(ow) * img.height);
  std::vector<int> col(ow);
  int interior_lo = ow, interior_hi = -1;
  for (int xo = 0; xo < ow; ++xo) {
    col[xo] = detail::sample_index(xo, factor, img.width);
    if (col[xo] - radius >= 0 && col[xo] + radius < img.width) {
      interior_lo = std::min(interior_lo, xo);
      interior_hi = std::max(interior_hi, xo);
    }
  }
  for (int y = 0; y < img.height; ++y) {
    const double* row = img.data.data() + static_cast<std::size_t>(y) * img.width;
    double* dst = tmp.data() + static_cast<std::size_t>(y) * ow;
    for (int xo = 0; xo < ow; ++xo) {
      double acc = 0.0;
      if (xo >= interior_lo && xo <= interior_hi) {
        const double* src = row + col[xo] - radius;
        for (int k = 0; k < taps; ++k) acc += kernel[k] * src[k];
      } else {
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * row[std::clamp(col[xo] + k, 0, img.width - 1)];
      }
      dst[xo] = acc;
    }
  }

  // Vertical pass at sampled rows, accumulating whole rows at a time.
  GrayImage out(ow, oh);
  std::vector<double> acc(ow);
  for (int yo = 0; yo < oh; ++yo) {
    const int yi = detail::sample_index(yo, factor, img.height);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int k = -radius; k <= radius; ++k) {
      const double w = kernel[k + radius];
      const double* src =
          tmp.data() + static_cast<std::size_t>(std::clamp(yi + k, 0, img.height - 1)) * ow;
      for (int xo = 0; xo < ow; ++xo) acc[xo] += w * src[xo];
    }
    double* dst = out.data.data() + static_cast<std::size_t>(yo) * ow;
    for (int xo = 0; xo < ow; ++xo) dst[xo] = std::clamp(acc[xo], 0.0, 255.0);
  }
  return out;
}

/// 2x2 finite-difference gradient over the window {(x,y),(x+1,y),(x,y+1),
/// (x+1,y+1)}. Magnitude is the averaged central difference; the level-line
/// angle is atan2(gx, -gy). Pixels whose magnitude does not exceed
/// quant_tolerance, plus the last row/column, are marked unusable.
inline GradientField compute_gradient(const GrayImage& img, double quant_tolerance = 0.0) {
  if (img.width < 2 || img.height < 2)
    throw std::invalid_argument("gradient needs at least a 2x2 image");

  GradientField g;
  g.width = img.width;
  g.height = img.height;
  g.magnitude.assign(img.size(), 0.0);
  g.angle.assign(img.size(), 0.0);
  g.usable.assign(img.size(), 0);
  g.dir_x.assign(img.size(), 0.0);
  g.dir_y.assign(img.size(), 0.0);

  std::vector<double> gxs(img.width - 1);
  std::vector<double> gys(img.width - 1);
  for (int y = 0; y + 1 < img.height; ++y) {
    const double* r0 = img.data.data() + static_cast<std::size_t>(y) * img.width;
    const double* r1 = r0 + img.width;
    const std::size_t base = static_cast<std::size_t>(y) * img.width;
    for (int x = 0; x + 1 < img.width; ++x) {
      const double com1 = r1[x + 1] - r0[x];
      const double com2 = r0[x + 1] - r1[x];
      const double gx = 0.5 * (com1 + com2);
      const double gy = 0.5 * (com1 - com2);
      gxs[x] = gx;
      gys[x] = gy;
      g.magnitude[base + x] = std::sqrt(gx * gx + gy * gy);
    }
    for (int x = 0; x + 1 < img.width; ++x) {
      const double mag = g.magnitude[base + x];
      if (mag > quant_tolerance) {
        g.angle[base + x] = std::atan2(gxs[x], -gys[x]);
        g.usable[base + x] = 1;
        g.dir_x[base + x] = -gys[x] / mag;  // cos of the level-line angle
        g.dir_y[base + x] = gxs[x] / mag;   // sin of the level-line angle
      }
    }
  }
  return g;
}

/// Deterministic rasterization of segments over a constant background.
/// A pixel belongs to a segment when its center lies within stroke_width/2
/// of the segment; with anti_alias the coverage ramps linearly over one
/// pixel. Overlaps take the maximum coverage.
inline GrayImage render_segments(int width, int height, const std::vector<LineSegment2D>& segments,
                                 double foreground, double background, bool anti_alias,
                                 double stroke_width = 1.0) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  if (stroke_width <= 0.0) throw std::invalid_argument("stroke width must be positive");
  for (const LineSegment2D& s : segments) {
    if (s.p1.x() < 0 || s.p1.y() < 0 || s.p1.x() > width - 1 || s.p1.y() > height - 1 ||
        s.p2.x() < 0 || s.p2.y() < 0 || s.p2.x() > width - 1 || s.p2.y() > height - 1)
      throw std::invalid_argument("segment endpoint out of image bounds");
  }

  std::vector<double> coverage(static_cast<std::size_t>(width) * height, 0.0);
  const double half = 0.5 * stroke_width;
  const double reach = half + (anti_alias ? 1.0 : 0.0);
  for (const LineSegment2D& s : segments) {
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(s.p1.x(), s.p2.x()) - reach)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(s.p1.x(), s.p2.x()) + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(s.p1.y(), s.p2.y()) - reach)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(s.p1.y(), s.p2.y()) + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = point_segment_distance(Eigen::Vector2d(x, y), s.p1, s.p2);
        const double c = anti_alias ? std::clamp(half + 0.5 - d, 0.0, 1.0) : (d <= half ? 1.0 : 0.0);
        double& slot = coverage[static_cast<std::size_t>(y) * width + x];
        slot = std::max(slot, c);
      }
    }
  }

  GrayImage out(width, height, background);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = std::clamp(background + (foreground - background) * coverage[i], 0.0, 255.0);
  return out;
}

}  // namespace linekit
