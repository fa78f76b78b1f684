#pragma once

#include <vector>

#include "fp/ridge_features.hpp"

namespace fp {

// Rigid (optionally scaled) map from query to reference coordinates:
//   p_ref = scale * R(dtheta) * (p - c) + c + (dx, dy)
// where c is the centre of the query image.
struct AlignmentParams {
  double dtheta = 0; // radians, (-pi, pi]
  double dx = 0;
  double dy = 0;
  double scale = 1.0;
};

struct Point2 {
  double x = 0;
  double y = 0;
};

class RigidTransform {
public:
  RigidTransform(const AlignmentParams &a, int query_width, int query_height);

  Point2 apply(double x, double y) const {
    const double ux = x - cx_, uy = y - cy_;
    return {a_ * ux - b_ * uy + cx_ + tx_, b_ * ux + a_ * uy + cy_ + ty_};
  }
  double rotation() const { return rotation_; }

private:
  double a_, b_, cx_, cy_, tx_, ty_, rotation_;
};

struct MatchScore {
  double value = 0; // [0,1]
  AlignmentParams aligned;
  int matched_count = 0;
};

struct RegisterParams {
  int top_k = 48;          // strongest lines drawn from each template
  int max_candidates = 5;
  double bin_theta_deg = 2.0;
  double bin_xy = 4.0;
  double max_rotation_deg = 60.0;
  bool refine = true;      // ICP polish of each voted candidate
};

// Candidate alignments voted from pairs of strong Hough lines, best first.
// Empty when either template has no lines.
std::vector<AlignmentParams> register_ridges(const RidgeFeature &query,
                                             const RidgeFeature &reference,
                                             const RegisterParams &params = {});

// M x N alignment-matrix score: entry (i, j) is the fraction of transformed
// query ridge i lying within tol of reference ridge j; rows and columns are
// paired greedily by descending entry and a pair with entry >= 0.5 counts.
// With class_gate set, a straight ridge never pairs with a highly curved
// one; neighbouring classes may pair, since a ridge near a class boundary
// flips class under small rotations.
MatchScore match_ridges(const RidgeFeature &query,
                        const RidgeFeature &reference,
                        const AlignmentParams &align, double tol = 3.0,
                        bool class_gate = false);

struct CompareParams {
  RegisterParams registration;
  double tol = 3.0; // at 1200 dpi
  bool scale_search = false; // also try scale 0.95 and 1.05
};

// Class-gated ridge score under every registration candidate, in candidate
// order. Empty when registration yields nothing.
std::vector<MatchScore> score_candidates(const RidgeFeature &query,
                                         const RidgeFeature &reference,
                                         const CompareParams &params = {},
                                         double dpi = kDefaultDpi);

// Best candidate score; 0 for degenerate input.
MatchScore compare_ridge(const RidgeFeature &query,
                         const RidgeFeature &reference,
                         const CompareParams &params = {},
                         double dpi = kDefaultDpi);

// Applies an alignment to every ridge point (rasterizing between neighbours),
// optionally dropping points that leave the image, and recomputes lines and
// curvature classes.
RidgeFeature transform_template(const RidgeFeature &feature,
                                const AlignmentParams &align, bool clip = true,
                                const RidgeParams &params = {});

} // namespace fp
