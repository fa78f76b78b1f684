// Acceptance run: one PASS/FAIL line per criterion, detail lines indented.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <unistd.h>

#include "fp/corpus.hpp"
#include "fp/fusion_eval.hpp"
#include "fp/minutiae.hpp"
#include "fp/pores.hpp"
#include "fp/ridge_features.hpp"
#include "fp/ridge_matcher.hpp"
#include "support/oracles.hpp"
#include "support/patterns.hpp"
#include "support/planted.hpp"
#include "support/templates.hpp"

using namespace fp;
using namespace fp::testing;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int n, bool ok, const std::string &what) {
  std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << "  " << what << std::endl;
  failures += !ok;
}

void detail(const std::string &s) { std::cout << "    " << s << std::endl; }

std::string pct(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << 100 * v << "%";
  return ss.str();
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double fused_eer(const std::vector<ComparisonRecord> &rs, std::vector<Method> ms) {
  return grid_search_weights(rs, ms, 0.05, workers()).second.eer;
}

// ---------------------------------------------------------------- 1

void criterion1() {
  // The count formula is checked on an index of the right shape in any case.
  CorpusIndex shape;
  for (int f = 0; f < 148; ++f)
    for (int s = 1; s <= 2; ++s)
      for (int k = 1; k <= 5; ++k)
        shape.entries.push_back({"f" + std::to_string(1000 + f), s, k, "unused.pgm"});
  std::size_t g = 0, im = 0;
  for (const auto &p : protocol_pairs(shape))
    (p.label == Label::genuine ? g : im) += 1;
  bool ok = g == 3700 && im == 21756;
  detail("148-finger protocol: " + std::to_string(g) + " genuine, " + std::to_string(im) +
         " impostor (want 3700, 21756)");

  const char *dir = std::getenv("FPFUSE_POLYU_DIR");
  if (!dir || !*dir) {
    verdict(1, ok, "protocol counts; PolyU HRF reproduction skipped (FPFUSE_POLYU_DIR unset)");
    return;
  }
  const auto corpus = index_corpus(dir);
  const std::vector<Method> all(kAllMethods.begin(), kAllMethods.end());
  const auto records = run_protocol(corpus, all, {6.0, workers()});
  g = static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                             [](auto &r) { return r.label == Label::genuine; }));
  im = records.size() - g;
  detail("PolyU records: " + std::to_string(g) + " genuine, " + std::to_string(im) + " impostor");
  ok = ok && g == 3700 && im == 21756;

  using M = Method;
  struct Row {
    std::vector<M> ms;
    const char *label;
    double published;
  };
  const std::vector<Row> singles{{{M::minutiae}, "minutiae", 0.2508},
                                 {{M::ridges}, "ridges", 0.2350},
                                 {{M::pores_iso}, "pores iso", 0.2602},
                                 {{M::pores_adapt}, "pores adapt", 0.2322}};
  const std::vector<Row> pairs{{{M::ridges, M::pores_iso}, "ridges+pores iso", 0.2201},
                               {{M::ridges, M::pores_adapt}, "ridges+pores adapt", 0.2231},
                               {{M::minutiae, M::ridges}, "minutiae+ridges", 0.0935},
                               {{M::minutiae, M::pores_iso}, "minutiae+pores iso", 0.1045},
                               {{M::minutiae, M::pores_adapt}, "minutiae+pores adapt", 0.0908}};
  const std::vector<Row> triples{
      {{M::minutiae, M::ridges, M::pores_iso}, "minutiae+ridges+pores iso", 0.0857},
      {{M::minutiae, M::ridges, M::pores_adapt}, "minutiae+ridges+pores adapt", 0.0874}};
  std::map<M, double> single;
  for (const auto &r : singles) {
    single[r.ms[0]] = evaluate_method(records, r.ms[0]).eer;
    detail(std::string(r.label) + ": " + pct(single[r.ms[0]]) + " (published " +
           pct(r.published) + ")");
  }
  std::map<std::vector<M>, double> pair_eer;
  for (const auto &r : pairs) {
    const double e = fused_eer(records, r.ms);
    pair_eer[r.ms] = e;
    const bool dom = e <= std::min(single[r.ms[0]], single[r.ms[1]]) + 1e-12;
    ok = ok && dom;
    detail(std::string(r.label) + ": " + pct(e) + " (published " + pct(r.published) + ")" +
           (dom ? "" : "  worse than a component"));
  }
  for (const auto &r : triples) {
    const double e = fused_eer(records, r.ms);
    bool dom = true;
    for (const auto &[ms, pe] : pair_eer)
      dom = dom && e <= pe + 1e-12;
    ok = ok && dom;
    detail(std::string(r.label) + ": " + pct(e) + " (published " + pct(r.published) + ")" +
           (dom ? "" : "  worse than some pair"));
  }
  verdict(1, ok, "PolyU HRF protocol counts and fusion ordering");
}

// ---------------------------------------------------------------- 2

// Records of the 5-seed synthetic run, kept for the separation invariant.
std::vector<std::vector<ComparisonRecord>> synthetic_runs;

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = fs::temp_directory_path() / ("fpfuse_accept_" + std::to_string(::getpid()));
  const std::vector<Method> all(kAllMethods.begin(), kAllMethods.end());
  const std::vector<std::vector<Method>> triples{
      {Method::minutiae, Method::ridges, Method::pores_iso},
      {Method::minutiae, Method::ridges, Method::pores_adapt}};
  bool dominance = true, counts = true;
  std::array<int, 2> big_gain{0, 0};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    const fs::path dir = root / std::to_string(seed);
    const auto corpus = generate_synthetic(spec, dir, workers());
    auto records = run_protocol(corpus, all, {6.0, workers()});
    fs::remove_all(dir);
    const auto g = std::count_if(records.begin(), records.end(),
                                 [](auto &r) { return r.label == Label::genuine; });
    counts = counts && g == 500 && records.size() - static_cast<std::size_t>(g) == 380;
    std::ostringstream line;
    line << "seed " << seed << ":";
    for (Method m : all)
      line << ' ' << method_name(m) << ' ' << pct(evaluate_method(records, m).eer);
    for (std::size_t t = 0; t < triples.size(); ++t) {
      double best_single = 1;
      for (Method m : triples[t])
        best_single = std::min(best_single, evaluate_method(records, m).eer);
      const double fused = fused_eer(records, triples[t]);
      dominance = dominance && fused <= best_single + 1e-12;
      big_gain[t] += fused <= best_single - 0.02;
      line << " | triple " << (t == 0 ? "iso" : "adapt") << ' ' << pct(fused) << " (best single "
           << pct(best_single) << ")";
    }
    detail(line.str());
    synthetic_runs.push_back(std::move(records));
  }
  fs::remove_all(root);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail("seeds with a gain of 2 points or more: iso " + std::to_string(big_gain[0]) +
         "/5, adapt " + std::to_string(big_gain[1]) + "/5");
  detail("runtime " + std::to_string(static_cast<int>(secs)) + " s with " +
         std::to_string(workers()) + " worker(s); budget 600 s");
  verdict(2,
          counts && dominance && big_gain[0] >= 3 && big_gain[1] >= 3 && secs < 600,
          "synthetic fusion dominance over 5 seeds");
}

// ---------------------------------------------------------------- 3

void criterion3() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 200);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto [g, im] = random_lists(rng, len(rng), len(rng));
    worst = std::max(worst, std::abs(compute_eer(g, im).eer - sweep_eer(g, im)));
  }
  const double perfect = compute_eer({1, 1, 0.9}, {0, 0.1}).eer;
  const std::vector<double> same{0.2, 0.4, 0.4, 0.7};
  const double identical = compute_eer(same, same).eer;
  const double by_hand = compute_eer({0.9, 0.8, 0.4}, {0.7, 0.3, 0.2}).eer;
  std::ostringstream d;
  d << "max |EER - sweep| over 1000 pairs " << worst << "; separated " << perfect
    << ", identical " << identical << ", hand example " << by_hand;
  detail(d.str());
  verdict(3,
          worst <= 1e-9 && perfect == 0.0 && std::abs(identical - 0.5) <= 1e-9 &&
              std::abs(by_hand - 1.0 / 3) <= 1e-9,
          "EER against a brute-force threshold sweep");
}

// ---------------------------------------------------------------- 4

void criterion4() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int unsound = 0, missed = 0, lines_checked = 0, empty = 0;
  double worst_theta = 0, worst_rho = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool is_arc = trial % 2 == 1;
    Ridge r;
    double theta = 0, rho = 0;
    if (is_arc) {
      const double a0 = 360 * u(rng);
      r = arc_ridge(100, 100, 15 + 40 * u(rng), a0, a0 + 30 + 150 * u(rng));
    } else {
      const double angle = 180 * u(rng);
      const double x0 = 20 + 60 * u(rng), y0 = 20 + 60 * u(rng);
      r = line_ridge(x0, y0, angle, 20 + static_cast<int>(80 * u(rng)));
      line_normal(x0, y0, angle, theta, rho);
    }
    const auto lines = hough_lines(r, 1.0, 1.0, 8);
    empty += lines.empty();
    for (const auto &l : lines)
      unsound += !(count_near(l, r, 1.0) >= 0.9 * l.votes &&
                   l.votes >= std::max(5.0, 0.1 * static_cast<double>(r.points.size())) &&
                   l.theta_deg >= 0 && l.theta_deg < 180);
    if (!is_arc && !lines.empty()) {
      ++lines_checked;
      const auto &l = lines[0];
      const bool flipped = angle_diff_deg(l.theta_deg, theta, 360.0) > 90.0;
      const double dt = angle_diff_deg(l.theta_deg, theta);
      const double dr = std::abs((flipped ? -l.rho : l.rho) - rho);
      worst_theta = std::max(worst_theta, dt);
      worst_rho = std::max(worst_rho, dr);
      missed += dt > 1.0 || dr > 1.0;
    }
  }
  std::ostringstream d;
  d << "unsound lines " << unsound << ", ridges without a line " << empty << ", lines off by >1 deg/1 px "
    << missed << "/" << lines_checked << " (worst " << worst_theta << " deg, " << worst_rho << " px)";
  detail(d.str());
  verdict(4, unsound == 0 && empty == 0 && missed == 0 && lines_checked == 100,
          "Hough soundness and line recovery on 200 ridges");
}

// ---------------------------------------------------------------- 5

void criterion5() {
  PlantedSpec fixed;
  PlantedSpec varying;
  varying.period_lo = 7;
  varying.period_hi = 12;
  varying.pore_sigma = 0;
  varying.n_pores = 40;
  int fixed_hits = 0, fixed_total = 0, var_iso = 0, var_adapt = 0, var_total = 0;
  int worst_fa = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto a = make_planted(fixed, seed);
    const auto pa = preprocess(a.image);
    const auto d = score_detection(a, extract_pores(pa, PoreMethod::isotropic));
    fixed_hits += d.hits;
    fixed_total += static_cast<int>(a.pores.size());
    worst_fa = std::max(worst_fa, d.false_alarms);
    worst_fa = std::max(worst_fa,
                        score_detection(a, extract_pores(pa, PoreMethod::adaptive)).false_alarms);

    const auto b = make_planted(varying, seed);
    const auto pb = preprocess(b.image);
    const auto di = score_detection(b, extract_pores(pb, PoreMethod::isotropic));
    const auto da = score_detection(b, extract_pores(pb, PoreMethod::adaptive));
    var_iso += di.hits;
    var_adapt += da.hits;
    var_total += static_cast<int>(b.pores.size());
    worst_fa = std::max({worst_fa, di.false_alarms, da.false_alarms});
  }
  const double iso_recall = static_cast<double>(fixed_hits) / fixed_total;
  const double adapt_recall = static_cast<double>(var_adapt) / var_total;
  const double iso_var_recall = static_cast<double>(var_iso) / var_total;
  std::ostringstream d;
  d << "isotropic recall, fixed period " << iso_recall << "; varying period: adaptive "
    << adapt_recall << ", isotropic " << iso_var_recall << "; worst false alarms per image "
    << worst_fa << " (20 seeds)";
  detail(d.str());
  verdict(5, iso_recall >= 0.9 && adapt_recall >= 0.85 && adapt_recall >= iso_var_recall &&
                 worst_fa <= 2,
          "planted pore detection");
}

// ---------------------------------------------------------------- 6

void criterion6() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int found = 0, monotone = 0;
  const auto &spec = small_spec();
  for (int trial = 0; trial < 100; ++trial) {
    const int finger = 1 + trial % 10;
    const auto &t = synth_ridges(finger);
    const AlignmentParams truth{rad(30 * u(rng)), 40 * u(rng), 40 * u(rng), 1.0};
    const auto moved = transform_template(t, truth);
    const auto cands = register_ridges(t, moved);
    bool hit = false;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, cands.size()); ++i)
      hit = hit || near_truth(cands[i], truth);
    found += hit;

    // Planted pores of the same impression, moved by the same transform.
    const auto sample = render_sample(spec, finger, 1, 1);
    const RigidTransform g(truth, t.width, t.height);
    PoreSet q{{}, PoreMethod::isotropic, t.width, t.height}, r = q;
    for (const auto &[x, y] : sample.pores) {
      q.pores.push_back({static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)), 1.0});
      const auto p = g.apply(x, y);
      const int px = static_cast<int>(std::lround(p.x)), py = static_cast<int>(std::lround(p.y));
      if (px >= 0 && py >= 0 && px < t.width && py < t.height)
        r.pores.push_back({px, py, 1.0});
    }
    const AlignmentParams used = cands.empty() ? truth : cands.front();
    double last = -1;
    bool ok = true;
    for (double box : {6.0, 8.0, 10.0}) {
      const double s = match_pores(q, r, used, box).value;
      ok = ok && s >= last && s >= 0 && s <= 1;
      last = s;
    }
    monotone += ok;
  }
  detail("true transform in the top 3: " + std::to_string(found) +
         "/100; pore scores monotone in the box: " + std::to_string(monotone) + "/100");
  verdict(6, found >= 95 && monotone == 100, "alignment recovery");
}

// ---------------------------------------------------------------- 7

MinutiaSet random_minutiae(std::mt19937_64 &rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MinutiaSet s{{}, 240, 320};
  while (static_cast<int>(s.minutiae.size()) < n) {
    Minutia m{static_cast<int>(u(rng) * 240), static_cast<int>(u(rng) * 320), 360 * u(rng),
              u(rng) < 0.5 ? MinutiaKind::ending : MinutiaKind::bifurcation};
    bool close = false;
    for (const auto &o : s.minutiae)
      close = close || std::hypot(o.x - m.x, o.y - m.y) < 12;
    if (!close)
      s.minutiae.push_back(m);
  }
  return s;
}

PoreSet random_pores(std::mt19937_64 &rng, int n) {
  std::uniform_int_distribution<int> c(0, 199);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  PoreSet s{{}, n % 2 ? PoreMethod::adaptive : PoreMethod::isotropic, 200, 200};
  for (int i = 0; i < n; ++i)
    s.pores.push_back({c(rng), c(rng), u(rng)});
  return s;
}

void criterion7() {
  constexpr int N = 100;
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<std::string, int>> results; // name, passing cases

  int bounds = 0, self = 0, roundtrip = 0;
  for (int i = 0; i < N; ++i) {
    const auto a = random_template(rng), b = random_template(rng);
    const auto ma = random_minutiae(rng, 1 + i % 20), mb = random_minutiae(rng, 1 + i % 13);
    const auto pa = random_pores(rng, 1 + i % 40), pb = random_pores(rng, 1 + i % 31);
    const AlignmentParams al{rad(60 * u(rng) - 30), 40 * u(rng) - 20, 40 * u(rng) - 20, 1.0};
    const double sr = compare_ridge(a, b).value, sm = compare_minutiae(ma, mb).value;
    const double sp = match_pores(pa, pb, al, 6).value;
    bounds += sr >= 0 && sr <= 1 && sm >= 0 && sm <= 1 && sp >= 0 && sp <= 1;
    self += compare_ridge(a, a).value == 1.0 && compare_minutiae(ma, ma).value == 1.0 &&
            match_pores(pa, pa, {}, 6).value == 1.0;
    std::stringstream s1, s2, s3;
    write_ridge_feature(s1, a);
    write_minutiae(s2, ma);
    write_pores(s3, pa);
    roundtrip += read_ridge_feature(s1) == a && read_minutiae(s2) == ma && read_pores(s3) == pa;
  }
  results.push_back({"score bounds (ridges, minutiae, pores)", bounds});
  results.push_back({"self-match = 1", self});
  results.push_back({"feature file round trip", roundtrip});

  int invariant = 0;
  std::uniform_int_distribution<int> len(1, 120);
  for (int i = 0; i < N; ++i) {
    auto [g, im] = random_lists(rng, len(rng), len(rng));
    const double before = compute_eer(g, im).eer;
    auto f = [](double s) { return std::exp(2 * s) + s * s * s; };
    std::transform(g.begin(), g.end(), g.begin(), f);
    std::transform(im.begin(), im.end(), im.begin(), f);
    invariant += std::abs(compute_eer(g, im).eer - before) <= 1e-12;
  }
  results.push_back({"EER monotone-transform invariance", invariant});

  int idempotent = 0;
  for (int i = 0; i < N; ++i) {
    GrayImage img(64, 64);
    for (int k = 0; k < 3; ++k) {
      const int x0 = static_cast<int>(8 + 48 * u(rng)), y0 = static_cast<int>(8 + 48 * u(rng));
      const int x1 = static_cast<int>(8 + 48 * u(rng)), y1 = static_cast<int>(8 + 48 * u(rng));
      for (int d = -2; d <= 2; ++d)
        draw_segment(img, x0 + d, y0, x1 + d, y1);
    }
    const auto once = thin(img);
    idempotent += thin(once) == once;
  }
  results.push_back({"thinning idempotence", idempotent});

  int determinism = 0;
  for (int i = 0; i < N; ++i) {
    SynthSpec spec;
    spec.width = spec.height = 64;
    spec.n_fingers = 3;
    spec.samples_per_session = 2;
    spec.seed = rng();
    const int f = 1 + i % 3, s = 1 + i % 2, k = 1 + (i / 2) % 2;
    const auto x = render_sample(spec, f, s, k), y = render_sample(spec, f, s, k);
    determinism += x.image == y.image && x.pores == y.pores;
  }
  results.push_back({"synthetic determinism", determinism});

  bool ok = true;
  for (const auto &[name, n] : results) {
    detail(name + ": " + std::to_string(n) + "/" + std::to_string(N));
    ok = ok && n == N;
  }

  // Genuine/impostor separation of the fused score on the synthetic runs.
  int separated = 0;
  std::ostringstream d;
  d << "fused genuine - impostor mean:";
  for (const auto &records : synthetic_runs) {
    const auto w = grid_search_weights(records, {Method::minutiae, Method::ridges,
                                                 Method::pores_adapt},
                                       0.05, workers())
                       .first;
    double gs = 0, is = 0;
    int gn = 0, in = 0;
    for (const auto &r : records) {
      const double s = fuse(r, w);
      (r.label == Label::genuine ? gs : is) += s;
      (r.label == Label::genuine ? gn : in) += 1;
    }
    const double gap = gs / gn - is / in;
    separated += gap >= 0.2;
    d << ' ' << std::setprecision(3) << gap;
  }
  d << " (want >= 0.2 on each of " << synthetic_runs.size() << " seeds)";
  detail(d.str());
  ok = ok && !synthetic_runs.empty() && separated == static_cast<int>(synthetic_runs.size());
  verdict(7, ok, "invariant suite");
}

} // namespace

int main() {
  std::cout << std::boolalpha;
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  std::cout << (failures ? "acceptance: FAIL" : "acceptance: PASS") << std::endl;
  return failures ? 1 : 0;
}
