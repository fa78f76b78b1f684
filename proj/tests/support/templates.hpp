#pragma once

// Synthetic ridge templates for matcher tests, extracted once per process.

#include <cmath>
#include <map>
#include <random>
#include <utility>

#include "fp/corpus.hpp"
#include "fp/ridge_features.hpp"
#include "fp/ridge_matcher.hpp"
#include "support/patterns.hpp"

namespace fp::testing {

inline const SynthSpec &small_spec() {
  static const SynthSpec spec = [] {
    SynthSpec s;
    s.n_fingers = 10;
    s.seed = 99;
    s.crop = 1.0; // whole impressions, so genuine pairs overlap fully
    return s;
  }();
  return spec;
}

inline const RidgeFeature &synth_ridges(int finger, int session = 1, int sample = 1) {
  static std::map<std::tuple<int, int, int>, RidgeFeature> cache;
  const auto key = std::tuple{finger, session, sample};
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache
             .emplace(key, extract_ridge_features(
                               render_sample(small_spec(), finger, session, sample).image))
             .first;
  return it->second;
}

// A few long random lines and arcs on a 200x200 canvas.
inline RidgeFeature random_template(std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Ridge> ridges;
  const int n = 4 + static_cast<int>(u(rng) * 8);
  for (int i = 0; i < n; ++i) {
    if (u(rng) < 0.5)
      ridges.push_back(line_ridge(30 + 140 * u(rng), 30 + 140 * u(rng), 360 * u(rng),
                                  20 + static_cast<int>(40 * u(rng))));
    else {
      const double a0 = 360 * u(rng);
      ridges.push_back(arc_ridge(50 + 100 * u(rng), 50 + 100 * u(rng),
                                 15 + 30 * u(rng), a0, a0 + 40 + 90 * u(rng)));
    }
    for (auto &p : ridges.back().points) {
      p.x = std::clamp(p.x, 0, 199);
      p.y = std::clamp(p.y, 0, 199);
    }
  }
  return build_ridge_feature(std::move(ridges), 200, 200);
}

// True when a candidate lies within (2 deg, 3 px, 3 px) of the truth.
inline bool near_truth(const AlignmentParams &a, const AlignmentParams &truth) {
  return angle_diff_deg(deg(a.dtheta), deg(truth.dtheta), 360.0) <= 2.0 &&
         std::abs(a.dx - truth.dx) <= 3.0 && std::abs(a.dy - truth.dy) <= 3.0;
}

} // namespace fp::testing
