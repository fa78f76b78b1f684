#pragma once

// Planted-pore test patterns: straight ridges (fixed period or a period that
// grows across the image) with Gaussian bright dots placed on ridge crests.

#include <cmath>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "fp/imgproc.hpp"
#include "fp/pores.hpp"

namespace fp::testing {

struct PlantedImage {
  GrayImage image;
  std::vector<std::pair<double, double>> pores;
  std::vector<double> period_at; // local period of each planted pore
};

struct PlantedSpec {
  int size = 256;
  double period_lo = 10;  // period at x = 0
  double period_hi = 10;  // period at x = size - 1
  int n_pores = 20;
  double pore_sigma = 2.5; // <= 0: 0.25 * local period
  double amplitude = 0.5;
  double noise = 0.03;
  bool with_pores = true;
};

// Ridges run vertically; the phase is the integral of 1/period along x so the
// local period is exact everywhere.
inline PlantedImage make_planted(const PlantedSpec &spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = spec.size;
  const double slope = (spec.period_hi - spec.period_lo) / (n - 1);
  auto period = [&](double x) { return spec.period_lo + slope * x; };
  auto cycles = [&](double x) { // integral of 1/period from 0 to x
    return slope == 0 ? x / spec.period_lo
                      : std::log(period(x) / spec.period_lo) / slope;
  };
  const double offset = u(rng);

  PlantedImage out{GrayImage(n, n, kDefaultDpi, 0.0), {}, {}};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      out.image.at(x, y) =
          0.5 - 0.35 * std::cos(2 * std::numbers::pi * (cycles(x) + offset));

  // Crest centres: cycles(x) + offset integer.
  std::vector<double> crests;
  for (int k = 1; k < 200; ++k) {
    const double target = k - offset;
    if (target < 0)
      continue;
    const double x = slope == 0 ? target * spec.period_lo
                                : spec.period_lo * (std::exp(slope * target) - 1) / slope;
    if (x > n - 1)
      break;
    crests.push_back(x);
  }

  const double margin = 16;
  int guard = 0;
  while (spec.with_pores && static_cast<int>(out.pores.size()) < spec.n_pores &&
         guard++ < 100000) {
    const double x = crests[static_cast<std::size_t>(u(rng) * crests.size())];
    const double y = margin + u(rng) * (n - 1 - 2 * margin);
    if (x < margin || x > n - 1 - margin)
      continue;
    bool close = false;
    for (const auto &[px, py] : out.pores)
      close = close || std::hypot(px - x, py - y) < 12;
    if (close)
      continue;
    out.pores.emplace_back(x, y);
    out.period_at.push_back(period(x));
  }
  for (std::size_t i = 0; i < out.pores.size(); ++i) {
    const auto [px, py] = out.pores[i];
    const double s = spec.pore_sigma > 0 ? spec.pore_sigma : 0.25 * out.period_at[i];
    const int r = static_cast<int>(std::ceil(3 * s));
    for (int y = std::max(0, static_cast<int>(py) - r); y <= std::min(n - 1, static_cast<int>(py) + r + 1); ++y)
      for (int x = std::max(0, static_cast<int>(px) - r); x <= std::min(n - 1, static_cast<int>(px) + r + 1); ++x)
        out.image.at(x, y) += spec.amplitude *
            std::exp(-0.5 * ((x - px) * (x - px) + (y - py) * (y - py)) / (s * s));
  }
  for (auto &v : out.image.pixels())
    v = std::clamp(v + spec.noise * gauss(rng), 0.0, 1.0);
  return out;
}

struct Detection {
  int hits = 0;        // planted pores with a detection within 2 px
  int false_alarms = 0; // detections farther than 2 px from every planted pore
  std::vector<bool> found;
};

inline Detection score_detection(const PlantedImage &img, const PoreSet &set,
                                 double radius = 2.0) {
  Detection d;
  for (const auto &[px, py] : img.pores) {
    bool hit = false;
    for (const auto &p : set.pores)
      hit = hit || std::hypot(p.x - px, p.y - py) <= radius;
    d.found.push_back(hit);
    d.hits += hit;
  }
  for (const auto &p : set.pores) {
    bool near = false;
    for (const auto &[px, py] : img.pores)
      near = near || std::hypot(p.x - px, p.y - py) <= radius;
    d.false_alarms += !near;
  }
  return d;
}

} // namespace fp::testing
