#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "fp/imgproc.hpp"
#include "fp/ridge_matcher.hpp"

namespace fp {

enum class MinutiaKind : std::uint8_t { ending, bifurcation };

struct Minutia {
  int x = 0;
  int y = 0;
  double direction_deg = 0; // [0, 360)
  MinutiaKind kind = MinutiaKind::ending;
  friend bool operator==(const Minutia &, const Minutia &) = default;
};

struct MinutiaSet {
  std::vector<Minutia> minutiae;
  int width = 0;
  int height = 0;
  friend bool operator==(const MinutiaSet &, const MinutiaSet &) = default;
};

// Lengths are at 1200 dpi and scaled with the skeleton's resolution.
struct MinutiaeParams {
  double border_zone = 12.0; // 0 disables the border filter
  double min_distance = 5.0; // closer pairs are removed as spurs/bridges
  int trace_length = 10;     // skeleton steps used for directions
  double r0 = 10.0;          // pairing distance
  double a0_deg = 15.0;      // pairing angle tolerance
  double max_rotation_deg = 60.0;
  int vote_candidates = 10;
};

// Half the number of 0/1 transitions around the 8-neighbourhood.
int crossing_number(const GrayImage &skeleton, int x, int y);

// Crossing-number extraction: CN 1 = ending, CN 3 = bifurcation. Endings
// point into their ridge; bifurcations along the bisector of the two
// closest branches.
MinutiaSet extract_minutiae(const GrayImage &skeleton, const BlockMap &map,
                            const MinutiaeParams &params = {});

// Generalized-Hough alignment followed by greedy one-to-one pairing;
// score = 2 * paired / (|query| + |reference|), maximised over both
// directions so the result is symmetric.
MatchScore compare_minutiae(const MinutiaSet &query,
                            const MinutiaSet &reference,
                            const MinutiaeParams &params = {},
                            double dpi = kDefaultDpi);

// "MINUTIAE v1" text format.
void write_minutiae(std::ostream &out, const MinutiaSet &set);
MinutiaSet read_minutiae(std::istream &in);

} // namespace fp
