#pragma once

#include <array>
#include <optional>
#include <vector>

#include "fp/fusion_eval.hpp"
#include "fp/imgproc.hpp"
#include "fp/minutiae.hpp"
#include "fp/pores.hpp"
#include "fp/ridge_features.hpp"

namespace fp {

// Every feature one image contributes to a comparison. Members for methods
// that were not requested stay empty.
struct FingerTemplate {
  double dpi = kDefaultDpi;
  RidgeFeature ridges;
  MinutiaSet minutiae;
  PoreSet pores_iso;
  PoreSet pores_adapt;
};

// Runs the shared preprocessing once. An image without usable ridges gives
// empty features (every score against it is 0) instead of throwing.
FingerTemplate build_template(const GrayImage &img,
                              const std::vector<Method> &methods);

// Scores for the requested methods; pore scores reuse the ridge candidates.
// box_half is at 1200 dpi.
std::array<std::optional<double>, 4>
compare_templates(const FingerTemplate &query, const FingerTemplate &reference,
                  const std::vector<Method> &methods, double box_half = 6.0);

} // namespace fp
