#include <doctest.h>

#include <random>
#include <sstream>

#include "fp/errors.hpp"
#include "fp/minutiae.hpp"
#include "support/patterns.hpp"

using namespace fp;
using namespace fp::testing;

namespace {

BlockMap all_foreground(int w, int h, int block = 32) {
  BlockMap m;
  m.block_size = block;
  m.cols = (w + block - 1) / block;
  m.rows = (h + block - 1) / block;
  m.width = w;
  m.height = h;
  const auto n = static_cast<std::size_t>(m.cols * m.rows);
  m.orientation.assign(n, 0.0);
  m.coherence.assign(n, 1.0);
  m.frequency.assign(n, 0.1);
  m.foreground.assign(n, 1);
  return m;
}

MinutiaeParams no_border() {
  MinutiaeParams p;
  p.border_zone = 0;
  return p;
}

int count_kind(const MinutiaSet &s, MinutiaKind k) {
  int n = 0;
  for (const auto &m : s.minutiae)
    n += m.kind == k;
  return n;
}

MinutiaSet random_set(std::mt19937_64 &rng, int n, int w = 240, int h = 320) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MinutiaSet s;
  s.width = w;
  s.height = h;
  while (static_cast<int>(s.minutiae.size()) < n) {
    Minutia m{static_cast<int>(u(rng) * w), static_cast<int>(u(rng) * h),
              360 * u(rng), u(rng) < 0.5 ? MinutiaKind::ending : MinutiaKind::bifurcation};
    bool close = false;
    for (const auto &o : s.minutiae)
      close = close || std::hypot(o.x - m.x, o.y - m.y) < 12;
    if (!close)
      s.minutiae.push_back(m);
  }
  return s;
}

// Rotates about the set's centre and shifts, as AlignmentParams does.
MinutiaSet moved(const MinutiaSet &s, double dtheta_deg, double dx, double dy) {
  const RigidTransform t({rad(dtheta_deg), dx, dy, 1.0}, s.width, s.height);
  MinutiaSet out = s;
  for (auto &m : out.minutiae) {
    const auto p = t.apply(m.x, m.y);
    m.x = static_cast<int>(std::lround(p.x));
    m.y = static_cast<int>(std::lround(p.y));
    m.direction_deg = std::fmod(m.direction_deg + dtheta_deg + 360.0, 360.0);
  }
  return out;
}

} // namespace

TEST_CASE("crossing number by hand") {
  GrayImage skel(40, 40);
  draw_segment(skel, 5, 20, 34, 20);
  CHECK(crossing_number(skel, 5, 20) == 1);
  CHECK(crossing_number(skel, 20, 20) == 2);
  draw_segment(skel, 20, 20, 20, 5);
  CHECK(crossing_number(skel, 20, 20) == 3);
}

TEST_CASE("crossing number is always a whole number from 0 to 4") {
  std::mt19937_64 rng(19);
  std::bernoulli_distribution on(0.4);
  GrayImage img(32, 32);
  for (int trial = 0; trial < 100; ++trial) {
    for (auto &v : img.pixels())
      v = on(rng) ? 1.0 : 0.0;
    for (int y = 1; y < 31; y += 3)
      for (int x = 1; x < 31; x += 3) {
        const int cn = crossing_number(img, x, y);
        REQUIRE(cn >= 0);
        REQUIRE(cn <= 4);
      }
  }
}

TEST_CASE("a straight segment has two endings pointing into it") {
  GrayImage skel(64, 64);
  draw_segment(skel, 15, 30, 44, 30);
  const auto s = extract_minutiae(skel, all_foreground(64, 64), no_border());
  REQUIRE(s.minutiae.size() == 2);
  CHECK(count_kind(s, MinutiaKind::ending) == 2);
  for (const auto &m : s.minutiae) {
    CHECK(skel.at(m.x, m.y) == 1.0);
    const double expect = m.x < 30 ? 0.0 : 180.0;
    CHECK(angle_diff_deg(m.direction_deg, expect, 360.0) <= 10.0);
  }
}

TEST_CASE("a Y has three endings and one bifurcation") {
  GrayImage skel(100, 100);
  draw_segment(skel, 50, 50, 50, 80);
  draw_segment(skel, 50, 50, 21, 21);
  draw_segment(skel, 50, 50, 79, 21);
  const auto s = extract_minutiae(skel, all_foreground(100, 100), no_border());
  CHECK(count_kind(s, MinutiaKind::ending) == 3);
  CHECK(count_kind(s, MinutiaKind::bifurcation) == 1);
}

TEST_CASE("a closed loop has no minutiae") {
  GrayImage skel(64, 64);
  draw_segment(skel, 10, 10, 50, 10);
  draw_segment(skel, 50, 10, 50, 50);
  draw_segment(skel, 50, 50, 10, 50);
  draw_segment(skel, 10, 50, 10, 10);
  CHECK(extract_minutiae(skel, all_foreground(64, 64), no_border()).minutiae.empty());
}

TEST_CASE("border zone removes endings at the fragment edge") {
  GrayImage skel(64, 64);
  draw_segment(skel, 2, 30, 40, 30);
  const auto s = extract_minutiae(skel, all_foreground(64, 64));
  REQUIRE(s.minutiae.size() == 1);
  CHECK(s.minutiae[0].x == 40);
}

TEST_CASE("extraction keeps minutiae apart and is deterministic") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    GrayImage skel(96, 96);
    for (int k = 0; k < 5; ++k)
      draw_segment(skel, static_cast<int>(8 + 80 * u(rng)), static_cast<int>(8 + 80 * u(rng)),
                   static_cast<int>(8 + 80 * u(rng)), static_cast<int>(8 + 80 * u(rng)));
    const auto map = all_foreground(96, 96);
    const auto a = extract_minutiae(skel, map);
    REQUIRE(a == extract_minutiae(skel, map));
    for (std::size_t i = 0; i < a.minutiae.size(); ++i) {
      REQUIRE(skel.at(a.minutiae[i].x, a.minutiae[i].y) == 1.0);
      for (std::size_t j = i + 1; j < a.minutiae.size(); ++j)
        REQUIRE(std::hypot(a.minutiae[i].x - a.minutiae[j].x,
                           a.minutiae[i].y - a.minutiae[j].y) >= 5.0);
    }
  }
}

TEST_CASE("minutia matching: self, moved copy and empty input") {
  std::mt19937_64 rng(4);
  const auto s = random_set(rng, 20);
  CHECK(compare_minutiae(s, s).value == 1.0);
  CHECK(compare_minutiae(moved(s, 10, 6, -4), s).value >= 0.9);
  MinutiaSet empty{{}, 240, 320};
  CHECK(compare_minutiae(empty, s).value == 0.0);
}

TEST_CASE("independent random sets rarely match") {
  std::mt19937_64 rng(6);
  int low = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t)
    low += compare_minutiae(random_set(rng, 10), random_set(rng, 10)).value <= 0.3;
  CHECK(low >= 0.95 * trials);
}

TEST_CASE("minutia scores are symmetric, bounded and 1 on self") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> n(1, 25);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_set(rng, n(rng)), b = random_set(rng, n(rng));
    const double ab = compare_minutiae(a, b).value, ba = compare_minutiae(b, a).value;
    REQUIRE(std::abs(ab - ba) <= 1e-9);
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 1.0);
    REQUIRE(compare_minutiae(a, a).value == 1.0);
  }
}

TEST_CASE("minutiae files round trip") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_set(rng, 1 + trial % 30);
    for (auto &m : s.minutiae)
      m.direction_deg = std::nextafter(m.direction_deg, 400.0);
    std::stringstream ss;
    write_minutiae(ss, s);
    REQUIRE(read_minutiae(ss) == s);
  }
  std::istringstream bad("MINUTIAE v1 10 10\n1 2 30 X\n");
  CHECK_THROWS_AS(read_minutiae(bad), ParseError);
}
