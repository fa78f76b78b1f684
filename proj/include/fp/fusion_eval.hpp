#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fp/corpus.hpp"

namespace fp {

// Canonical order; also the CSV column order and the order in which weight
// vectors are compared.
enum class Method : std::uint8_t { minutiae, ridges, pores_iso, pores_adapt };
inline constexpr std::array<Method, 4> kAllMethods = {
    Method::minutiae, Method::ridges, Method::pores_iso, Method::pores_adapt};

// "minutiae", "ridges", "pores_iso", "pores_adapt".
std::string_view method_name(Method m);
// Also accepts the hyphenated CLI spellings ("pores-iso").
// Throws std::invalid_argument.
Method parse_method(std::string_view name);
// Comma-separated list, returned in canonical order without duplicates.
std::vector<Method> parse_methods(std::string_view list);

enum class Label : std::uint8_t { genuine, impostor };

struct ComparisonRecord {
  std::string probe_id;
  std::string gallery_id;
  Label label = Label::genuine;
  std::array<std::optional<double>, 4> scores; // indexed by Method

  std::optional<double> &score(Method m) {
    return scores[static_cast<std::size_t>(m)];
  }
  const std::optional<double> &score(Method m) const {
    return scores[static_cast<std::size_t>(m)];
  }
};

using FusionWeights = std::map<Method, double>;

// Throws std::invalid_argument unless every weight is >= 0 and they sum to 1
// within 1e-9.
void check_weights(const FusionWeights &w);

// Weighted sum of the record's scores. Throws MissingScore when a weighted
// method has no score.
double fuse(const ComparisonRecord &record, const FusionWeights &w);

struct RocPoint {
  double threshold = 0;
  double far = 0;
  double frr = 0;
};

struct EvalReport {
  double eer = 0;
  double threshold_at_eer = 0;
  std::vector<RocPoint> roc; // ascending threshold
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
};

// Thresholds are the distinct observed scores plus one above the maximum.
// A score s is accepted at t when s >= t: FAR(t) = impostors accepted,
// FRR(t) = genuines rejected. The EER is read where FAR - FRR changes sign,
// interpolating linearly between neighbouring thresholds.
// Throws EmptySide.
EvalReport compute_eer(const std::vector<double> &genuine,
                       const std::vector<double> &impostor);

// Scores of one method split by label. Throws MissingScore.
EvalReport evaluate_method(const std::vector<ComparisonRecord> &records,
                           Method m);
EvalReport evaluate_fused(const std::vector<ComparisonRecord> &records,
                          const FusionWeights &w);

// Exhaustive search of the weight simplex on a grid of the given step, which
// must divide 1. The lowest EER wins; ties go to the lexicographically
// smallest weight vector in canonical method order.
// Throws std::invalid_argument (bad step or methods), MissingScore, EmptySide.
std::pair<FusionWeights, EvalReport>
grid_search_weights(const std::vector<ComparisonRecord> &records,
                    const std::vector<Method> &methods, double step,
                    int jobs = 1);

// Splits records 50/50 by the probe's finger (sorted finger ids, first half
// to the first set). Ids must look like "<finger>_<session>_<sample>".
std::pair<std::vector<ComparisonRecord>, std::vector<ComparisonRecord>>
holdout_split(const std::vector<ComparisonRecord> &records);

// "<finger>_<session>_<sample>" -> finger. Throws ParseError.
std::string finger_of(const std::string &id);

struct ProtocolPair {
  std::size_t probe = 0;   // index into CorpusIndex::entries
  std::size_t gallery = 0;
  Label label = Label::genuine;
};

// Genuine: every session-2 sample against every session-1 sample of the same
// finger. Impostor: the first session-2 sample of each finger against the
// first session-1 sample of every other finger.
// Throws CorpusShape when a finger lacks a full set of samples.
std::vector<ProtocolPair> protocol_pairs(const CorpusIndex &corpus);

struct ProtocolOptions {
  double box_half = 6.0; // at 1200 dpi
  int jobs = 1;
};

// Extracts every image once and scores each protocol pair with the requested
// methods.
std::vector<ComparisonRecord> run_protocol(const CorpusIndex &corpus,
                                           const std::vector<Method> &methods,
                                           const ProtocolOptions &options = {});

// probe_id,gallery_id,label,score_minutiae,score_ridges,score_pores_iso,
// score_pores_adapt with empty cells for absent scores.
void write_records(std::ostream &out, const std::vector<ComparisonRecord> &rs);
std::vector<ComparisonRecord> read_records(std::istream &in);
// threshold,far,frr
void write_roc(std::ostream &out, const EvalReport &report);

} // namespace fp
