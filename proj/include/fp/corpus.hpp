#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fp/imgproc.hpp"

namespace fp {

struct CorpusEntry {
  std::string finger;
  int session = 1; // 1 or 2
  int sample = 1;  // 1..samples_per_session
  std::filesystem::path image_path;

  // "<finger>_<session>_<sample>"
  std::string id() const;
};

struct CorpusIndex {
  std::vector<CorpusEntry> entries; // sorted by finger, session, sample
  double dpi = kDefaultDpi;
  int samples_per_session = 5;

  std::vector<std::string> fingers() const;
  // Throws std::out_of_range when absent.
  const CorpusEntry &at(const std::string &finger, int session,
                        int sample) const;
};

// Indexes `<finger>_<session>_<sample>.pgm` files directly under root, or the
// rows of root/manifest.csv (finger,session,sample,path; paths relative to
// root) when that file exists. Every finger must have exactly
// samples_per_session samples in each of the two sessions.
// Throws CorpusShape, ParseError (bad manifest or image) and IoError.
CorpusIndex index_corpus(const std::filesystem::path &root,
                         double dpi = kDefaultDpi, int samples_per_session = 5,
                         bool validate_images = true);

struct SynthSpec {
  int n_fingers = 20;
  int samples_per_session = 5;
  std::uint64_t seed = 1;
  int width = 256;
  int height = 256;
  double ridge_period = 10.0;      // px
  double pore_density = 30.0;      // pores per 1000 px of ridge centreline
  double jitter = 1.5;             // per-pore shift along the ridge, px (sd)
  double rotation_range = 15.0;    // degrees, uniform in +-range
  double translation_range = 24.0; // px, uniform in +-range on each axis
  double noise = 0.06;             // additive Gaussian sd
  double distortion = 2.0;         // smooth non-rigid displacement, px
  double pore_dropout = 0.15;      // fraction of pores missing per sample
  double crop = 0.6; // smallest kept fraction of each side; 1 = no crop
  double dpi = kDefaultDpi;

  // Throws std::invalid_argument describing the first bad field.
  void validate() const;
};

struct SynthSample {
  GrayImage image;
  std::vector<std::pair<double, double>> pores; // planted, image coordinates
  // Rigid placement: finger = R(rotation) * (pixel - centre) + (tx, ty),
  // before the non-rigid warp.
  double rotation = 0; // radians
  double tx = 0;
  double ty = 0;
};

// One impression of one synthetic finger; a pure function of its arguments.
SynthSample render_sample(const SynthSpec &spec, int finger, int session,
                          int sample);

// Writes every impression as `<finger>_<session>_<sample>.pgm` under out and
// returns the index. Throws IoError when a file cannot be written.
CorpusIndex generate_synthetic(const SynthSpec &spec,
                               const std::filesystem::path &out, int jobs = 1);

} // namespace fp
