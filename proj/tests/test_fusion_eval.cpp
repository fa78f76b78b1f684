#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fp/errors.hpp"
#include "fp/fusion_eval.hpp"
#include "support/oracles.hpp"

using namespace fp;
using namespace fp::testing;

namespace {

ComparisonRecord rec(Label l, std::optional<double> m, std::optional<double> r,
                     std::optional<double> pi = {}, std::optional<double> pa = {}) {
  static int n = 0;
  ComparisonRecord c;
  c.probe_id = "f" + std::to_string(n % 7) + "_2_1";
  c.gallery_id = "f" + std::to_string(n++ % 5) + "_1_1";
  c.label = l;
  c.scores = {m, r, pi, pa};
  return c;
}

CorpusIndex fake_corpus(int fingers, int per_session = 5) {
  CorpusIndex c;
  c.samples_per_session = per_session;
  for (int f = 0; f < fingers; ++f)
    for (int s = 1; s <= 2; ++s)
      for (int k = 1; k <= per_session; ++k) {
        const auto name = "p" + std::to_string(1000 + f);
        c.entries.push_back({name, s, k, name + ".pgm"});
      }
  return c;
}

std::pair<std::size_t, std::size_t> counts(const std::vector<ProtocolPair> &ps) {
  std::size_t g = 0, i = 0;
  for (const auto &p : ps)
    (p.label == Label::genuine ? g : i) += 1;
  return {g, i};
}

} // namespace

TEST_CASE("fuse: weighted sums") {
  const auto a = rec(Label::genuine, {}, 0.4, 0.8);
  CHECK(fuse(a, {{Method::ridges, 0.5}, {Method::pores_iso, 0.5}}) == doctest::Approx(0.6));
  const auto b = rec(Label::genuine, 0.9, 0.3, 0.6);
  CHECK(fuse(b, {{Method::minutiae, 0.6}, {Method::ridges, 0.2}, {Method::pores_iso, 0.2}}) ==
        doctest::Approx(0.72));
  CHECK(fuse(b, {{Method::ridges, 1.0}, {Method::minutiae, 0.0}}) == 0.3);
  CHECK_THROWS_AS(fuse(a, {{Method::minutiae, 1.0}}), MissingScore);
  CHECK_THROWS_AS(fuse(b, {{Method::minutiae, 0.6}}), std::invalid_argument);
  CHECK_THROWS_AS(fuse(b, {{Method::minutiae, 1.2}, {Method::ridges, -0.2}}),
                  std::invalid_argument);
}

TEST_CASE("fuse is linear in the scores") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double w0 = u(rng), w1 = (1 - w0) * u(rng);
    const FusionWeights w{{Method::minutiae, w0}, {Method::ridges, w1},
                          {Method::pores_adapt, 1 - w0 - w1}};
    const auto s1 = rec(Label::genuine, u(rng), u(rng), {}, u(rng));
    const auto s2 = rec(Label::genuine, u(rng), u(rng), {}, u(rng));
    const double alpha = u(rng);
    auto mix = s1;
    for (std::size_t k = 0; k < 4; ++k)
      if (s1.scores[k])
        mix.scores[k] = alpha * *s1.scores[k] + (1 - alpha) * *s2.scores[k];
    REQUIRE(fuse(mix, w) ==
            doctest::Approx(alpha * fuse(s1, w) + (1 - alpha) * fuse(s2, w)).epsilon(1e-12));
    REQUIRE(fuse(mix, w) >= 0.0);
    REQUIRE(fuse(mix, w) <= 1.0);
  }
}

TEST_CASE("EER by hand") {
  CHECK(compute_eer({0.9, 0.8, 0.4}, {0.7, 0.3, 0.2}).eer == doctest::Approx(1.0 / 3));
  CHECK(compute_eer({1, 1, 1}, {0, 0}).eer == 0.0);
  const std::vector<double> same{0.1, 0.5, 0.5, 0.9};
  CHECK(compute_eer(same, same).eer == doctest::Approx(0.5));
  CHECK(compute_eer({0.3, 0.3}, {0.3}).eer == 0.5);
  CHECK_THROWS_AS(compute_eer({}, {0.1}), EmptySide);
  CHECK_THROWS_AS(compute_eer({0.1}, {}), EmptySide);
}

TEST_CASE("EER agrees with a direct threshold sweep") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> len(1, 200);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto [g, im] = random_lists(rng, len(rng), len(rng));
    const auto rep = compute_eer(g, im);
    REQUIRE(std::abs(rep.eer - sweep_eer(g, im)) <= 1e-9);
    for (std::size_t k = 1; k < rep.roc.size(); ++k) {
      REQUIRE(rep.roc[k].far <= rep.roc[k - 1].far);
      REQUIRE(rep.roc[k].frr >= rep.roc[k - 1].frr);
      REQUIRE(rep.roc[k].threshold > rep.roc[k - 1].threshold);
    }
    REQUIRE(rep.n_genuine == g.size());
    REQUIRE(rep.n_impostor == im.size());
  }
}

TEST_CASE("EER is unchanged by a strictly increasing transform") {
  std::mt19937_64 rng(43);
  std::uniform_int_distribution<int> len(1, 80);
  for (int trial = 0; trial < 100; ++trial) {
    auto [g, im] = random_lists(rng, len(rng), len(rng));
    const double before = compute_eer(g, im).eer;
    auto f = [k = trial % 3](double s) {
      return k == 0 ? s * s * s : k == 1 ? std::exp(3 * s) : 0.2 + 0.5 * std::sqrt(s);
    };
    std::transform(g.begin(), g.end(), g.begin(), f);
    std::transform(im.begin(), im.end(), im.begin(), f);
    REQUIRE(compute_eer(g, im).eer == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("grid search: a perfect channel takes all the weight") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ComparisonRecord> rs;
  for (int i = 0; i < 60; ++i) {
    const bool gen = i % 2 == 0;
    rs.push_back(rec(gen ? Label::genuine : Label::impostor, u(rng),
                     gen ? 0.6 + 0.4 * u(rng) : 0.5 * u(rng)));
  }
  const auto [w, rep] = grid_search_weights(rs, {Method::minutiae, Method::ridges}, 0.05);
  CHECK(rep.eer == 0.0);
  CHECK(w.at(Method::ridges) == 1.0);
  CHECK(w.at(Method::minutiae) == 0.0);
}

TEST_CASE("grid search over a single method") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ComparisonRecord> rs;
  for (int i = 0; i < 40; ++i)
    rs.push_back(rec(i % 3 ? Label::impostor : Label::genuine, {}, {}, u(rng)));
  const auto [w, rep] = grid_search_weights(rs, {Method::pores_iso}, 0.05);
  CHECK(w == FusionWeights{{Method::pores_iso, 1.0}});
  CHECK(rep.eer == evaluate_method(rs, Method::pores_iso).eer);
}

TEST_CASE("grid search: complementary channels fuse below either") {
  // Each channel fails on a different half of the genuine pairs.
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ComparisonRecord> rs;
  for (int i = 0; i < 100; ++i) {
    const double hi = 0.7 + 0.3 * u(rng), lo = 0.3 * u(rng);
    rs.push_back(i % 2 ? rec(Label::genuine, hi, lo) : rec(Label::genuine, lo, hi));
    rs.push_back(rec(Label::impostor, 0.45 * u(rng), 0.45 * u(rng)));
  }
  const double em = evaluate_method(rs, Method::minutiae).eer;
  const double er = evaluate_method(rs, Method::ridges).eer;
  const auto [w, rep] = grid_search_weights(rs, {Method::minutiae, Method::ridges}, 0.05);
  CHECK(rep.eer <= std::min(em, er));
  CHECK(rep.eer < std::min(em, er) - 0.1);
}

TEST_CASE("grid search returns the lexicographically first best vector") {
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> n(2, 12);
  const std::vector<Method> ms{Method::minutiae, Method::ridges, Method::pores_adapt};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ComparisonRecord> rs;
    const int ng = n(rng), ni = n(rng);
    for (int i = 0; i < ng + ni; ++i) {
      // Coarse scores make ties common.
      auto q = [&] { return std::round(u(rng) * 4) / 4; };
      rs.push_back(rec(i < ng ? Label::genuine : Label::impostor, q(), q(), {}, q()));
    }
    const auto [w, rep] = grid_search_weights(rs, ms, 0.25);
    const auto [bw, beer] = brute_grid(rs, ms, 4);
    REQUIRE(rep.eer == doctest::Approx(beer).epsilon(1e-12));
    REQUIRE(w == bw);
    for (Method m : ms)
      REQUIRE(rep.eer <= evaluate_method(rs, m).eer + 1e-12);
    double sum = 0;
    for (const auto &[m, v] : w)
      sum += v;
    REQUIRE(std::abs(sum - 1) <= 1e-9);
  }
}

TEST_CASE("grid search argument checks") {
  std::vector<ComparisonRecord> rs{rec(Label::genuine, 0.5, 0.5), rec(Label::impostor, 0.1, 0.2)};
  CHECK_THROWS_AS(grid_search_weights(rs, {Method::minutiae}, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(grid_search_weights(rs, {Method::minutiae}, 0), std::invalid_argument);
  CHECK_THROWS_AS(grid_search_weights(rs, {}, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(grid_search_weights(rs, {Method::pores_iso}, 0.05), MissingScore);
  rs.pop_back();
  CHECK_THROWS_AS(grid_search_weights(rs, {Method::minutiae}, 0.05), EmptySide);
  // Three methods on a 0.05 grid.
  const auto [w, rep] = grid_search_weights(
      {rec(Label::genuine, 0.5, 0.5, 0.5), rec(Label::impostor, 0.1, 0.2, 0.3)},
      {Method::minutiae, Method::ridges, Method::pores_iso}, 0.05, 2);
  CHECK(rep.eer == 0.0);
  CHECK(w.size() == 3);
}

TEST_CASE("protocol pair counts") {
  CHECK(counts(protocol_pairs(fake_corpus(148))) == std::pair<std::size_t, std::size_t>{3700, 21756});
  CHECK(counts(protocol_pairs(fake_corpus(2))) == std::pair<std::size_t, std::size_t>{50, 2});
  CHECK(counts(protocol_pairs(fake_corpus(1))) == std::pair<std::size_t, std::size_t>{25, 0});
  for (int f = 1; f <= 30; ++f)
    REQUIRE(counts(protocol_pairs(fake_corpus(f, 1 + f % 5))) ==
            std::pair<std::size_t, std::size_t>(f * (1 + f % 5) * (1 + f % 5), f * (f - 1)));

  const auto c = fake_corpus(3);
  for (const auto &p : protocol_pairs(c)) {
    const auto &a = c.entries[p.probe], &b = c.entries[p.gallery];
    REQUIRE(a.session == 2);
    REQUIRE(b.session == 1);
    REQUIRE((a.finger == b.finger) == (p.label == Label::genuine));
    if (p.label == Label::impostor)
      REQUIRE(a.sample + b.sample == 2);
  }

  // A single finger gives genuine pairs only.
  std::vector<ComparisonRecord> rs;
  for (std::size_t i = 0; i < 25; ++i)
    rs.push_back(rec(Label::genuine, 0.5, {}));
  CHECK_THROWS_AS(evaluate_method(rs, Method::minutiae), EmptySide);

  auto broken = fake_corpus(3);
  broken.entries.erase(broken.entries.begin() + 12);
  CHECK_THROWS_AS(protocol_pairs(broken), CorpusShape);
}

TEST_CASE("records CSV round trip") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ComparisonRecord> rs;
    for (int i = 0; i < trial % 9; ++i) {
      auto r = rec(u(rng) < 0.5 ? Label::genuine : Label::impostor, {}, {});
      for (auto &s : r.scores)
        if (u(rng) < 0.7)
          s = u(rng);
      rs.push_back(r);
    }
    std::stringstream ss;
    write_records(ss, rs);
    const auto back = read_records(ss);
    REQUIRE(back.size() == rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
      REQUIRE(back[i].probe_id == rs[i].probe_id);
      REQUIRE(back[i].gallery_id == rs[i].gallery_id);
      REQUIRE(back[i].label == rs[i].label);
      REQUIRE(back[i].scores == rs[i].scores);
    }
  }
  std::istringstream bad_header("a,b\n");
  CHECK_THROWS_AS(read_records(bad_header), ParseError);
  std::stringstream bad_score;
  write_records(bad_score, {});
  bad_score << "x_1_1,y_1_1,genuine,1.5,,,\n";
  CHECK_THROWS_AS(read_records(bad_score), ParseError);
}

TEST_CASE("holdout splits by finger") {
  std::vector<ComparisonRecord> rs;
  for (int f = 0; f < 6; ++f)
    for (int k = 0; k < 3; ++k) {
      ComparisonRecord r;
      r.probe_id = "q" + std::to_string(f) + "_2_" + std::to_string(k + 1);
      r.gallery_id = "q0_1_1";
      rs.push_back(r);
    }
  const auto [a, b] = holdout_split(rs);
  CHECK(a.size() == 9);
  CHECK(b.size() == 9);
  for (const auto &r : a)
    for (const auto &s : b)
      REQUIRE(finger_of(r.probe_id) != finger_of(s.probe_id));
  CHECK(finger_of("p1000_2_3") == "p1000");
  CHECK(finger_of("a_b_1_2") == "a_b");
  CHECK_THROWS_AS(finger_of("nounderscore"), ParseError);
}

TEST_CASE("method names") {
  CHECK(parse_methods("pores-adapt,ridges,ridges") ==
        std::vector<Method>{Method::ridges, Method::pores_adapt});
  CHECK(parse_method("pores_iso") == Method::pores_iso);
  CHECK_THROWS_AS(parse_method("hough"), std::invalid_argument);
  CHECK_THROWS_AS(parse_methods(","), std::invalid_argument);
}
