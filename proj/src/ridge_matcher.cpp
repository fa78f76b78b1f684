#include "fp/ridge_matcher.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

double wrap_half_turn(double a) { // (-pi/2, pi/2]
  while (a <= -kPi / 2)
    a += kPi;
  while (a > kPi / 2)
    a -= kPi;
  return a;
}

double wrap_turn(double a) { // (-pi, pi]
  while (a <= -kPi)
    a += 2 * kPi;
  while (a > kPi)
    a -= 2 * kPi;
  return a;
}

// Reference ridge id per pixel (-1 where no ridge point).
class RidgeGrid {
public:
  explicit RidgeGrid(const RidgeFeature &f)
      : w_(f.width), h_(f.height),
        ids_(static_cast<std::size_t>(std::max(0, f.width * f.height)), -1) {
    for (std::size_t j = 0; j < f.ridges.size(); ++j)
      for (const auto &p : f.ridges[j].points)
        if (p.x >= 0 && p.y >= 0 && p.x < w_ && p.y < h_)
          ids_[static_cast<std::size_t>(p.y) * w_ + p.x] = static_cast<int>(j);
  }

  int at(int x, int y) const {
    if (x < 0 || y < 0 || x >= w_ || y >= h_)
      return -1;
    return ids_[static_cast<std::size_t>(y) * w_ + x];
  }

  // Nearest ridge pixel within radius; false if none.
  bool nearest(double x, double y, double radius, Point2 &out) const {
    const int r = static_cast<int>(std::ceil(radius));
    const int cx = static_cast<int>(std::lround(x));
    const int cy = static_cast<int>(std::lround(y));
    double best = radius * radius;
    bool found = false;
    for (int yy = cy - r; yy <= cy + r; ++yy)
      for (int xx = cx - r; xx <= cx + r; ++xx) {
        if (at(xx, yy) < 0)
          continue;
        const double d = (xx - x) * (xx - x) + (yy - y) * (yy - y);
        if (d <= best) {
          best = d;
          out = {static_cast<double>(xx), static_cast<double>(yy)};
          found = true;
        }
      }
    return found;
  }

private:
  int w_, h_;
  std::vector<int> ids_;
};

struct LineRecord {
  double theta; // radians
  double rho;
  int votes;
  Point2 mid;       // centre of the supporting points' extent along the line
  double half_len;  // half that extent
};

std::vector<LineRecord> strongest_lines(const RidgeFeature &f, int top_k) {
  std::vector<LineRecord> out;
  for (std::size_t i = 0; i < f.ridges.size(); ++i)
    for (const auto &l : f.lines[i]) {
      const double t = l.theta();
      const double c = std::cos(t), s = std::sin(t);
      double lo = 1e300, hi = -1e300;
      for (const auto &p : f.ridges[i].points)
        if (std::abs(p.x * c + p.y * s - l.rho) <= 1.0) {
          const double u = -p.x * s + p.y * c;
          lo = std::min(lo, u);
          hi = std::max(hi, u);
        }
      if (lo > hi)
        continue;
      const double u = 0.5 * (lo + hi);
      out.push_back({t, l.rho, l.votes,
                     {l.rho * c - u * s, l.rho * s + u * c}, 0.5 * (hi - lo)});
    }
  std::stable_sort(out.begin(), out.end(),
                   [](const LineRecord &a, const LineRecord &b) {
                     return a.votes > b.votes;
                   });
  if (static_cast<int>(out.size()) > top_k)
    out.resize(static_cast<std::size_t>(top_k));
  return out;
}

// Dense (dtheta, dx, dy) vote array.
class VoteSpace {
public:
  VoteSpace(double max_theta, double bin_theta, double max_xy, double bin_xy)
      : bt_(bin_theta), bxy_(bin_xy),
        nt_(2 * static_cast<int>(std::ceil(max_theta / bin_theta)) + 3),
        nxy_(2 * static_cast<int>(std::ceil(max_xy / bin_xy)) + 3),
        votes_(static_cast<std::size_t>(nt_) * nxy_ * nxy_, 0.0f) {}

  // Trilinear soft vote.
  void add(double t, double x, double y, double w) {
    const double ft = t / bt_ + nt_ / 2, fx = x / bxy_ + nxy_ / 2,
                 fy = y / bxy_ + nxy_ / 2;
    const int t0 = static_cast<int>(std::floor(ft));
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    if (t0 < 0 || x0 < 0 || y0 < 0 || t0 + 1 >= nt_ || x0 + 1 >= nxy_ ||
        y0 + 1 >= nxy_)
      return;
    const double wt = ft - t0, wx = fx - x0, wy = fy - y0;
    for (int i = 0; i < 8; ++i) {
      const int oi = i & 1, oj = (i >> 1) & 1, ok = (i >> 2) & 1;
      votes_[idx(t0 + oi, x0 + oj, y0 + ok)] += static_cast<float>(
          w * (oi ? wt : 1 - wt) * (oj ? wx : 1 - wx) * (ok ? wy : 1 - wy));
    }
  }

  // Up to n local maxima, strongest first, none within one cell of another.
  std::vector<AlignmentParams> peaks(std::size_t n) const {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < votes_.size(); ++i)
      if (votes_[i] > 0)
        order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return votes_[a] != votes_[b] ? votes_[a] > votes_[b] : a < b;
    });
    std::vector<std::array<int, 3>> picked;
    std::vector<AlignmentParams> out;
    for (std::size_t k : order) {
      if (out.size() >= n)
        break;
      const int it = static_cast<int>(k / (static_cast<std::size_t>(nxy_) * nxy_));
      const int ix = static_cast<int>(k / nxy_ % nxy_);
      const int iy = static_cast<int>(k % nxy_);
      const bool near = std::any_of(picked.begin(), picked.end(), [&](const auto &p) {
        return std::abs(p[0] - it) <= 1 && std::abs(p[1] - ix) <= 1 &&
               std::abs(p[2] - iy) <= 1;
      });
      if (near)
        continue;
      picked.push_back({it, ix, iy});
      // Weighted centre of the 3x3x3 neighbourhood.
      double w = 0, st = 0, sx = 0, sy = 0;
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
          for (int c = -1; c <= 1; ++c) {
            const int t = it + a, x = ix + b, y = iy + c;
            if (t < 0 || x < 0 || y < 0 || t >= nt_ || x >= nxy_ || y >= nxy_)
              continue;
            const double v = votes_[idx(t, x, y)];
            w += v;
            st += v * t;
            sx += v * x;
            sy += v * y;
          }
      out.push_back({(st / w - nt_ / 2) * bt_, (sx / w - nxy_ / 2) * bxy_,
                     (sy / w - nxy_ / 2) * bxy_, 1.0});
    }
    return out;
  }

private:
  std::size_t idx(int t, int x, int y) const {
    return (static_cast<std::size_t>(t) * nxy_ + x) * nxy_ + y;
  }

  double bt_, bxy_;
  int nt_, nxy_;
  std::vector<float> votes_;
};

// Point-to-point ICP about the query centre with shrinking match radius.
AlignmentParams refine(const RidgeFeature &query, const RidgeGrid &grid,
                       AlignmentParams a) {
  const double cx = 0.5 * (query.width - 1), cy = 0.5 * (query.height - 1);
  constexpr double radii[] = {6.0, 4.0, 3.0, 3.0};
  for (double radius : radii) {
    const RigidTransform tf(a, query.width, query.height);
    double n = 0, ux = 0, uy = 0, qx = 0, qy = 0;
    std::vector<std::array<double, 4>> pairs;
    for (const auto &r : query.ridges)
      for (std::size_t k = 0; k < r.points.size(); k += 2) {
        const auto &p = r.points[k];
        const Point2 m = tf.apply(p.x, p.y);
        Point2 q;
        if (!grid.nearest(m.x, m.y, radius, q))
          continue;
        pairs.push_back({p.x - cx, p.y - cy, q.x, q.y});
        ux += p.x - cx;
        uy += p.y - cy;
        qx += q.x;
        qy += q.y;
        n += 1;
      }
    if (n < 10)
      break;
    ux /= n;
    uy /= n;
    qx /= n;
    qy /= n;
    double sdot = 0, scross = 0;
    for (const auto &pr : pairs) {
      const double px = pr[0] - ux, py = pr[1] - uy;
      const double rx = pr[2] - qx, ry = pr[3] - qy;
      sdot += px * rx + py * ry;
      scross += px * ry - py * rx;
    }
    const double phi = std::atan2(scross, sdot);
    const double c = std::cos(phi) * a.scale, s = std::sin(phi) * a.scale;
    a.dtheta = wrap_turn(phi);
    a.dx = qx - (c * ux - s * uy) - cx;
    a.dy = qy - (s * ux + c * uy) - cy;
  }
  return a;
}

} // namespace

RigidTransform::RigidTransform(const AlignmentParams &a, int query_width,
                               int query_height)
    : a_(a.scale * std::cos(a.dtheta)), b_(a.scale * std::sin(a.dtheta)),
      cx_(0.5 * (query_width - 1)), cy_(0.5 * (query_height - 1)), tx_(a.dx),
      ty_(a.dy), rotation_(a.dtheta) {}

std::vector<AlignmentParams> register_ridges(const RidgeFeature &query,
                                             const RidgeFeature &reference,
                                             const RegisterParams &params) {
  std::vector<AlignmentParams> out;
  const auto ql = strongest_lines(query, params.top_k);
  const auto rl = strongest_lines(reference, params.top_k);
  if (ql.empty() || rl.empty())
    return out;

  const double cx = 0.5 * (query.width - 1), cy = 0.5 * (query.height - 1);
  const double max_t = params.max_rotation_deg * kDeg;
  const double max_xy = std::max({query.width, query.height, reference.width,
                                  reference.height});
  VoteSpace space(max_t, params.bin_theta_deg * kDeg, max_xy, params.bin_xy);

  // A pair of lines fixes the translation across the reference line; along
  // it the translation may slide as far as the two segments still overlap.
  for (const auto &a : ql)
    for (const auto &b : rl) {
      const double dt = wrap_half_turn(b.theta - a.theta);
      if (std::abs(dt) > max_t)
        continue;
      const double c = std::cos(dt), s = std::sin(dt);
      const double ux = a.mid.x - cx, uy = a.mid.y - cy;
      const double dx = b.mid.x - (c * ux - s * uy + cx);
      const double dy = b.mid.y - (s * ux + c * uy + cy);
      const double tx = -std::sin(b.theta), ty = std::cos(b.theta);
      const double slide = std::abs(a.half_len - b.half_len) + params.bin_xy;
      const int steps = static_cast<int>(std::ceil(slide / params.bin_xy));
      const double w = 1.0 / (2 * steps + 1);
      for (int k = -steps; k <= steps; ++k) {
        const double along = k * slide / steps;
        space.add(dt, dx + along * tx, dy + along * ty, w);
      }
    }

  const auto picked = space.peaks(static_cast<std::size_t>(2 * params.max_candidates));
  const RidgeGrid grid(reference);
  for (AlignmentParams a : picked) {
    if (params.refine)
      a = refine(query, grid, a);
    const bool dup =
        std::any_of(out.begin(), out.end(), [&](const AlignmentParams &o) {
          return std::abs(wrap_turn(o.dtheta - a.dtheta)) < 1.0 * kDeg &&
                 std::abs(o.dx - a.dx) < 1.5 && std::abs(o.dy - a.dy) < 1.5;
        });
    if (!dup)
      out.push_back(a);
    if (static_cast<int>(out.size()) >= params.max_candidates)
      break;
  }
  return out;
}

MatchScore match_ridges(const RidgeFeature &query,
                        const RidgeFeature &reference,
                        const AlignmentParams &align, double tol,
                        bool class_gate) {
  MatchScore score;
  score.aligned = align;
  const std::size_t m = query.ridges.size(), n = reference.ridges.size();
  if (m == 0 || n == 0)
    return score;

  const RidgeGrid grid(reference);
  const RigidTransform tf(align, query.width, query.height);
  const int r = static_cast<int>(std::ceil(tol));
  const double tol2 = tol * tol;
  std::vector<int> hits(m * n, 0);
  std::vector<double> dist(m * n, 0.0);
  std::vector<std::pair<int, double>> local;

  for (std::size_t i = 0; i < m; ++i)
    for (const auto &p : query.ridges[i].points) {
      const Point2 t = tf.apply(p.x, p.y);
      const int cx = static_cast<int>(std::lround(t.x));
      const int cy = static_cast<int>(std::lround(t.y));
      local.clear();
      for (int yy = cy - r; yy <= cy + r; ++yy)
        for (int xx = cx - r; xx <= cx + r; ++xx) {
          const int j = grid.at(xx, yy);
          if (j < 0)
            continue;
          const double d2 = (xx - t.x) * (xx - t.x) + (yy - t.y) * (yy - t.y);
          if (d2 > tol2)
            continue;
          auto it = std::find_if(local.begin(), local.end(),
                                 [&](const auto &e) { return e.first == j; });
          if (it == local.end())
            local.emplace_back(j, d2);
          else
            it->second = std::min(it->second, d2);
        }
      for (const auto &[j, d2] : local) {
        hits[i * n + static_cast<std::size_t>(j)] += 1;
        dist[i * n + static_cast<std::size_t>(j)] += std::sqrt(d2);
      }
    }

  struct Entry {
    double frac, mean_dist;
    std::size_t i, j;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < m; ++i) {
    const double len = static_cast<double>(query.ridges[i].points.size());
    for (std::size_t j = 0; j < n; ++j) {
      const int h = hits[i * n + j];
      if (h == 0)
        continue;
      const double frac = h / len;
      if (frac < 0.5)
        continue;
      if (class_gate && std::abs(static_cast<int>(query.curvature[i]) -
                                    static_cast<int>(reference.curvature[j])) > 1)
        continue;
      entries.push_back({frac, dist[i * n + j] / h, i, j});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry &a, const Entry &b) {
    if (a.frac != b.frac)
      return a.frac > b.frac;
    if (a.mean_dist != b.mean_dist)
      return a.mean_dist < b.mean_dist;
    if (a.i != b.i)
      return a.i < b.i;
    return a.j < b.j;
  });
  std::vector<std::uint8_t> row_used(m, 0), col_used(n, 0);
  for (const auto &e : entries) {
    if (row_used[e.i] || col_used[e.j])
      continue;
    row_used[e.i] = col_used[e.j] = 1;
    ++score.matched_count;
  }
  score.value = static_cast<double>(score.matched_count) /
                static_cast<double>(std::min(m, n));
  return score;
}

std::vector<MatchScore> score_candidates(const RidgeFeature &query,
                                         const RidgeFeature &reference,
                                         const CompareParams &params,
                                         double dpi) {
  std::vector<MatchScore> out;
  if (query.empty() || reference.empty())
    return out;
  const double tol = at_dpi(params.tol, dpi);
  for (const auto &cand : register_ridges(query, reference, params.registration)) {
    MatchScore best = match_ridges(query, reference, cand, tol, true);
    if (params.scale_search)
      for (double s : {0.95, 1.05}) {
        AlignmentParams scaled = cand;
        scaled.scale = s;
        const MatchScore alt = match_ridges(query, reference, scaled, tol, true);
        if (alt.value > best.value)
          best = alt;
      }
    out.push_back(best);
  }
  return out;
}

MatchScore compare_ridge(const RidgeFeature &query,
                         const RidgeFeature &reference,
                         const CompareParams &params, double dpi) {
  const auto scores = score_candidates(query, reference, params, dpi);
  if (scores.empty())
    return {};
  return *std::max_element(
      scores.begin(), scores.end(),
      [](const MatchScore &a, const MatchScore &b) { return a.value < b.value; });
}

RidgeFeature transform_template(const RidgeFeature &feature,
                                const AlignmentParams &align, bool clip,
                                const RidgeParams &params) {
  const RigidTransform tf(align, feature.width, feature.height);
  auto inside = [&](const Pixel &p) {
    return !clip ||
           (p.x >= 0 && p.y >= 0 && p.x < feature.width && p.y < feature.height);
  };
  std::vector<Ridge> ridges;
  for (const auto &r : feature.ridges) {
    std::vector<Pixel> path;
    auto flush = [&] {
      if (path.size() >= 2)
        ridges.push_back({0, path});
      path.clear();
    };
    auto push = [&](const Pixel &p) {
      if (!inside(p)) {
        flush();
        return;
      }
      if (std::find(path.begin(), path.end(), p) == path.end())
        path.push_back(p);
    };
    for (const auto &p : r.points) {
      const Point2 t = tf.apply(p.x, p.y);
      const Pixel q{static_cast<int>(std::lround(t.x)),
                    static_cast<int>(std::lround(t.y))};
      if (!path.empty()) {
        // Bresenham fill so consecutive points stay 8-adjacent.
        Pixel cur = path.back();
        int dx = std::abs(q.x - cur.x), dy = -std::abs(q.y - cur.y);
        const int sx = cur.x < q.x ? 1 : -1, sy = cur.y < q.y ? 1 : -1;
        int err = dx + dy;
        while (!(cur == q)) {
          const int e2 = 2 * err;
          if (e2 >= dy) {
            err += dy;
            cur.x += sx;
          }
          if (e2 <= dx) {
            err += dx;
            cur.y += sy;
          }
          push(cur);
        }
      } else {
        push(q);
      }
    }
    flush();
  }
  const int min_len = std::max(2, params.min_ridge_len);
  std::erase_if(ridges, [&](const Ridge &r) {
    return static_cast<int>(r.points.size()) < min_len;
  });
  return build_ridge_feature(std::move(ridges), feature.width, feature.height,
                             params);
}

} // namespace fp
