#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

#include "fp/imgproc.hpp"

namespace fp {

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel &, const Pixel &) = default;
};

// One thinned ridge as an ordered 8-connected polyline.
struct Ridge {
  int id = 0;
  std::vector<Pixel> points;
  friend bool operator==(const Ridge &, const Ridge &) = default;
};

// A Hough peak: x*cos(theta) + y*sin(theta) = rho. theta_deg is the normal
// direction in [0, 180).
struct HoughLine {
  double theta_deg = 0;
  double rho = 0;
  int votes = 0;

  double theta() const;
  friend bool operator==(const HoughLine &, const HoughLine &) = default;
};

enum class Curvature : std::uint8_t { straight, curved, highly_curved };

std::string_view to_string(Curvature c);

struct RidgeFeature {
  std::vector<Ridge> ridges;
  std::vector<std::vector<HoughLine>> lines;
  std::vector<Curvature> curvature;
  int width = 0;
  int height = 0;

  bool empty() const { return ridges.empty(); }
  std::size_t point_count() const;
  friend bool operator==(const RidgeFeature &, const RidgeFeature &) = default;
};

struct RidgeParams {
  double theta_step_deg = 1.0;
  double rho_step = 1.0;
  int max_lines = 8;
  int min_ridge_len = 10; // at 1200 dpi
};

// Zhang-Suen thinning followed by removal of staircase corners, iterated to
// a fixed point. Input pixels are 0/1.
GrayImage thin(const GrayImage &binary);

// Splits the skeleton at branch pixels (>= 3 skeleton neighbours) into
// maximal simple paths and closed loops; shorter paths are dropped.
std::vector<Ridge> trace_ridges(const GrayImage &skeleton, int min_ridge_len);

// Progressive Hough extraction on one ridge: the strongest local maximum of
// the accumulator is taken, the points it explains are removed and the
// accumulator re-voted. Each line keeps votes >= max(5, 10% of the ridge
// length). Returns an empty list when no cell qualifies.
std::vector<HoughLine> hough_lines(const Ridge &ridge, double theta_step_deg,
                                   double rho_step, int max_lines);

// Angular spread of the smallest line subset covering >= 80% of the ridge;
// highly curved when no subset reaches that coverage.
Curvature classify_curvature(const std::vector<HoughLine> &lines,
                             const Ridge &ridge, double rho_step = 1.0);

// Circular range, in degrees, of line normals (period 180).
double angular_spread_deg(const std::vector<HoughLine> &lines);

// Points of the ridge within rho_step of the line.
std::size_t points_near_line(const HoughLine &line, const Ridge &ridge,
                             double rho_step);

// Builds the per-ridge lines and classes; ridges with no line are dropped and
// ids renumbered.
RidgeFeature build_ridge_feature(std::vector<Ridge> ridges, int width,
                                 int height, const RidgeParams &params = {});

// Traces, line-fits and classifies a thinned skeleton. min_ridge_len is
// scaled by the skeleton's dpi.
RidgeFeature ridge_feature_from_skeleton(const GrayImage &skeleton,
                                         const RidgeParams &params = {});

// normalize -> block map -> enhance -> binarize -> thin -> trace -> lines.
// Throws EmptyTemplate when no ridge survives.
RidgeFeature extract_ridge_features(const GrayImage &img,
                                    const RidgeParams &params = {});

// "RIDGEFEAT v1" text format.
void write_ridge_feature(std::ostream &out, const RidgeFeature &f);
RidgeFeature read_ridge_feature(std::istream &in);

} // namespace fp
