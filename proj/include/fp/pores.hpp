#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

#include "fp/imgproc.hpp"
#include "fp/ridge_matcher.hpp"

namespace fp {

enum class PoreMethod : std::uint8_t { isotropic, adaptive };

std::string_view to_string(PoreMethod m);

struct Pore {
  int x = 0;
  int y = 0;
  double strength = 0; // filter response, >= 0
  friend bool operator==(const Pore &, const Pore &) = default;
};

struct PoreSet {
  std::vector<Pore> pores;
  PoreMethod method = PoreMethod::isotropic;
  int width = 0;
  int height = 0;
  friend bool operator==(const PoreSet &, const PoreSet &) = default;
};

// Lengths at 1200 dpi.
struct PoreParams {
  double sigma_iso = 2.5;    // isotropic pore model scale
  double adaptive_c = 0.25;  // adaptive scale = c * local ridge period
  double block_k = 2.0;      // adaptive per-block threshold, mean + k * std
  double noise_k = 4.0;      // robust-noise multiple both methods must clear
  double min_contrast = 0.06; // weakest pore, in normalized intensity
  double nms_radius = 5.0;
  double background_c = 1.0; // along-ridge median half-length / period
};

// Both extractors expect `map` computed from the normalized image and return
// local maxima on binarized ridge pixels only, non-max suppressed so no two
// pores are closer than nms_radius.
PoreSet extract_pores_isotropic(const GrayImage &img, const BlockMap &map,
                                const PoreParams &params = {});
PoreSet extract_pores_adaptive(const GrayImage &img, const BlockMap &map,
                               const PoreParams &params = {});
PoreSet extract_pores(const Preprocessed &pre, PoreMethod method,
                      const PoreParams &params = {});

// Query pores are mapped by the alignment; a reference pore matches when it
// falls in the square of half-width box_half around a mapped query pore.
// Pairs are taken one-to-one in order of Chebyshev distance, so the score
// never decreases as box_half grows. value = matched / min(|q|, |r|).
MatchScore match_pores(const PoreSet &query, const PoreSet &reference,
                       const AlignmentParams &align, double box_half);

// Pore score under the ridge candidate (from score_candidates) that
// maximises ridge score + pore score. 0 when there is no candidate.
MatchScore best_pore_score(const std::vector<MatchScore> &ridge_candidates,
                           const PoreSet &query, const PoreSet &reference,
                           double box_half);

// Registers the ridge templates and applies best_pore_score.
MatchScore compare_pores(const RidgeFeature &query_ridges,
                         const PoreSet &query_pores,
                         const RidgeFeature &reference_ridges,
                         const PoreSet &reference_pores, double box_half,
                         const CompareParams &params = {},
                         double dpi = kDefaultDpi);

// Image-level convenience: extracts ridges and pores on both images first.
MatchScore compare_pores(const GrayImage &query, const GrayImage &reference,
                         PoreMethod method, double box_half);

// "PORES v1" text format.
void write_pores(std::ostream &out, const PoreSet &set);
PoreSet read_pores(std::istream &in);

} // namespace fp
