#include "fp/fusion_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "detail/parallel.hpp"
#include "fp/errors.hpp"
#include "fp/finger_template.hpp"
#include "fp/text_io.hpp"

namespace fp {

std::string_view method_name(Method m) {
  switch (m) {
  case Method::minutiae:
    return "minutiae";
  case Method::ridges:
    return "ridges";
  case Method::pores_iso:
    return "pores_iso";
  case Method::pores_adapt:
    return "pores_adapt";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '-', '_');
  for (Method m : kAllMethods)
    if (method_name(m) == s)
      return m;
  throw std::invalid_argument(
      "unknown method '" + std::string(name) +
      "' (expected minutiae, ridges, pores-iso or pores-adapt)");
}

std::vector<Method> parse_methods(std::string_view list) {
  std::set<Method> found;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const auto tok = list.substr(start, comma - start);
    if (!tok.empty())
      found.insert(parse_method(tok));
    start = comma + 1;
  }
  if (found.empty())
    throw std::invalid_argument("empty method list");
  return {found.begin(), found.end()};
}

void check_weights(const FusionWeights &w) {
  if (w.empty())
    throw std::invalid_argument("no fusion weights");
  double sum = 0;
  for (const auto &[m, v] : w) {
    if (!(v >= 0))
      throw std::invalid_argument("negative weight for " +
                                  std::string(method_name(m)));
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("fusion weights sum to " + text::num(sum) +
                                ", not 1");
}

double fuse(const ComparisonRecord &record, const FusionWeights &w) {
  check_weights(w);
  double s = 0;
  for (const auto &[m, v] : w) {
    const auto &score = record.score(m);
    if (!score)
      throw MissingScore(std::string(method_name(m)));
    s += v * *score;
  }
  return std::clamp(s, 0.0, 1.0);
}

EvalReport compute_eer(const std::vector<double> &genuine,
                       const std::vector<double> &impostor) {
  if (genuine.empty())
    throw EmptySide("genuine");
  if (impostor.empty())
    throw EmptySide("impostor");
  std::vector<double> g = genuine, im = impostor;
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::vector<double> thresholds(g);
  thresholds.insert(thresholds.end(), im.begin(), im.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);

  EvalReport rep;
  rep.n_genuine = g.size();
  rep.n_impostor = im.size();
  const double ng = static_cast<double>(g.size());
  const double ni = static_cast<double>(im.size());
  for (double t : thresholds) {
    const auto rejected = std::lower_bound(g.begin(), g.end(), t) - g.begin();
    const auto below = std::lower_bound(im.begin(), im.end(), t) - im.begin();
    rep.roc.push_back({t, (ni - static_cast<double>(below)) / ni,
                       static_cast<double>(rejected) / ng});
  }

  // FAR - FRR is 1 at the lowest threshold and -1 at the sentinel.
  for (std::size_t k = 0; k < rep.roc.size(); ++k) {
    const double d = rep.roc[k].far - rep.roc[k].frr;
    if (d > 0)
      continue;
    if (d == 0 || k == 0) {
      rep.eer = rep.roc[k].far;
      rep.threshold_at_eer = rep.roc[k].threshold;
    } else {
      const RocPoint &a = rep.roc[k - 1], &b = rep.roc[k];
      const double da = a.far - a.frr;
      const double alpha = da / (da - d);
      rep.eer = a.far + alpha * (b.far - a.far);
      rep.threshold_at_eer = a.threshold + alpha * (b.threshold - a.threshold);
    }
    break;
  }
  return rep;
}

namespace {

template <typename ScoreFn>
EvalReport evaluate_with(const std::vector<ComparisonRecord> &records,
                         ScoreFn score) {
  std::vector<double> g, im;
  for (const auto &r : records)
    (r.label == Label::genuine ? g : im).push_back(score(r));
  return compute_eer(g, im);
}

} // namespace

EvalReport evaluate_method(const std::vector<ComparisonRecord> &records,
                           Method m) {
  return evaluate_with(records, [m](const ComparisonRecord &r) {
    if (!r.score(m))
      throw MissingScore(std::string(method_name(m)));
    return *r.score(m);
  });
}

EvalReport evaluate_fused(const std::vector<ComparisonRecord> &records,
                          const FusionWeights &w) {
  check_weights(w);
  return evaluate_with(records,
                       [&w](const ComparisonRecord &r) { return fuse(r, w); });
}

std::pair<FusionWeights, EvalReport>
grid_search_weights(const std::vector<ComparisonRecord> &records,
                    const std::vector<Method> &methods, double step,
                    int jobs) {
  if (!(step > 0) || step > 1)
    throw std::invalid_argument("weight step must lie in (0, 1]");
  const double units_d = std::round(1.0 / step);
  if (std::abs(units_d * step - 1.0) > 1e-9)
    throw std::invalid_argument("weight step " + text::num(step) +
                                " does not divide 1");
  std::vector<Method> ms = methods;
  std::sort(ms.begin(), ms.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  if (ms.empty())
    throw std::invalid_argument("no methods to fuse");
  for (const auto &r : records)
    for (Method m : ms)
      if (!r.score(m))
        throw MissingScore(std::string(method_name(m)));

  // Weight vectors as integer counts of `step`, in ascending lexicographic
  // order.
  const int units = static_cast<int>(units_d);
  std::vector<std::vector<int>> grid;
  std::vector<int> cur(ms.size(), 0);
  auto enumerate = [&](auto &self, std::size_t i, int left) -> void {
    if (i + 1 == ms.size()) {
      cur[i] = left;
      grid.push_back(cur);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      cur[i] = k;
      self(self, i + 1, left - k);
    }
  };
  enumerate(enumerate, 0, units);

  auto weights_of = [&](const std::vector<int> &v) {
    FusionWeights w;
    for (std::size_t i = 0; i < ms.size(); ++i)
      w[ms[i]] = v[i] / units_d; // exact at the corners
    return w;
  };
  std::vector<double> eers(grid.size());
  detail::parallel_for(grid.size(), jobs, [&](std::size_t i) {
    eers[i] = evaluate_fused(records, weights_of(grid[i])).eer;
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (eers[i] < eers[best] - 1e-12)
      best = i;
  const FusionWeights w = weights_of(grid[best]);
  return {w, evaluate_fused(records, w)};
}

std::string finger_of(const std::string &id) {
  const auto b = id.rfind('_');
  if (b == std::string::npos || b == 0)
    throw ParseError("record id '" + id + "' is not <finger>_<session>_<sample>");
  const auto a = id.rfind('_', b - 1);
  if (a == std::string::npos || a == 0)
    throw ParseError("record id '" + id + "' is not <finger>_<session>_<sample>");
  return id.substr(0, a);
}

std::pair<std::vector<ComparisonRecord>, std::vector<ComparisonRecord>>
holdout_split(const std::vector<ComparisonRecord> &records) {
  std::set<std::string> fingers;
  for (const auto &r : records)
    fingers.insert(finger_of(r.probe_id));
  std::set<std::string> first;
  std::size_t i = 0;
  for (const auto &f : fingers)
    if (i++ < fingers.size() / 2)
      first.insert(f);
  std::pair<std::vector<ComparisonRecord>, std::vector<ComparisonRecord>> out;
  for (const auto &r : records)
    (first.count(finger_of(r.probe_id)) ? out.first : out.second).push_back(r);
  return out;
}

std::vector<ProtocolPair> protocol_pairs(const CorpusIndex &corpus) {
  const int s = corpus.samples_per_session;
  const auto fingers = corpus.fingers();
  auto index_of = [&](const std::string &f, int session, int sample) {
    try {
      return static_cast<std::size_t>(&corpus.at(f, session, sample) -
                                      corpus.entries.data());
    } catch (const std::out_of_range &) {
      throw CorpusShape("finger " + f + " is missing session " +
                        std::to_string(session) + " sample " +
                        std::to_string(sample));
    }
  };
  std::vector<ProtocolPair> pairs;
  for (const auto &f : fingers)
    for (int p = 1; p <= s; ++p)
      for (int g = 1; g <= s; ++g)
        pairs.push_back({index_of(f, 2, p), index_of(f, 1, g), Label::genuine});
  for (const auto &f : fingers)
    for (const auto &other : fingers)
      if (other != f)
        pairs.push_back({index_of(f, 2, 1), index_of(other, 1, 1),
                         Label::impostor});
  return pairs;
}

std::vector<ComparisonRecord> run_protocol(const CorpusIndex &corpus,
                                           const std::vector<Method> &methods,
                                           const ProtocolOptions &options) {
  const auto pairs = protocol_pairs(corpus);
  std::vector<std::uint8_t> used(corpus.entries.size(), 0);
  for (const auto &p : pairs)
    used[p.probe] = used[p.gallery] = 1;

  std::vector<FingerTemplate> templates(corpus.entries.size());
  detail::parallel_for(corpus.entries.size(), options.jobs, [&](std::size_t i) {
    if (used[i])
      templates[i] = build_template(
          read_pgm(corpus.entries[i].image_path, corpus.dpi), methods);
  });

  std::vector<ComparisonRecord> records(pairs.size());
  detail::parallel_for(pairs.size(), options.jobs, [&](std::size_t i) {
    const auto &p = pairs[i];
    ComparisonRecord &r = records[i];
    r.probe_id = corpus.entries[p.probe].id();
    r.gallery_id = corpus.entries[p.gallery].id();
    r.label = p.label;
    r.scores = compare_templates(templates[p.probe], templates[p.gallery],
                                 methods, options.box_half);
  });
  return records;
}

namespace {

constexpr const char *kRecordHeader =
    "probe_id,gallery_id,label,score_minutiae,score_ridges,score_pores_iso,"
    "score_pores_adapt";

std::vector<std::string> split_commas(const std::string &line) {
  std::vector<std::string> cells(1);
  for (char ch : line) {
    if (ch == ',')
      cells.emplace_back();
    else
      cells.back() += ch;
  }
  return cells;
}

} // namespace

void write_records(std::ostream &out, const std::vector<ComparisonRecord> &rs) {
  out << kRecordHeader << '\n';
  for (const auto &r : rs) {
    out << r.probe_id << ',' << r.gallery_id << ','
        << (r.label == Label::genuine ? "genuine" : "impostor");
    for (const auto &s : r.scores) {
      out << ',';
      if (s)
        out << text::num(*s);
    }
    out << '\n';
  }
}

std::vector<ComparisonRecord> read_records(std::istream &in) {
  std::string line;
  int lineno = 0;
  bool header = false;
  std::vector<ComparisonRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (!header) {
      if (line != kRecordHeader)
        throw ParseError("line " + std::to_string(lineno) +
                         ": expected header '" + kRecordHeader + "'");
      header = true;
      continue;
    }
    const auto cells = split_commas(line);
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (cells.size() != 7)
      throw ParseError(where + "expected 7 fields, found " +
                       std::to_string(cells.size()));
    ComparisonRecord r;
    r.probe_id = cells[0];
    r.gallery_id = cells[1];
    if (cells[2] == "genuine")
      r.label = Label::genuine;
    else if (cells[2] == "impostor")
      r.label = Label::impostor;
    else
      throw ParseError(where + "bad label '" + cells[2] + "'");
    for (std::size_t m = 0; m < 4; ++m) {
      if (cells[3 + m].empty())
        continue;
      const double v = text::parse_double(cells[3 + m], "score");
      if (!(v >= 0 && v <= 1))
        throw ParseError(where + "score " + cells[3 + m] + " outside [0,1]");
      r.scores[m] = v;
    }
    out.push_back(std::move(r));
  }
  if (!header)
    throw ParseError("empty records file");
  return out;
}

void write_roc(std::ostream &out, const EvalReport &report) {
  out << "threshold,far,frr\n";
  for (const auto &p : report.roc)
    out << text::num(p.threshold) << ',' << text::num(p.far) << ','
        << text::num(p.frr) << '\n';
}

} // namespace fp
