#include "fp/ridge_features.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "fp/errors.hpp"
#include "fp/text_io.hpp"

namespace fp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// Ring order N, NE, E, SE, S, SW, W, NW.
constexpr std::array<int, 8> kRingDx{0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 8> kRingDy{-1, -1, 0, 1, 1, 1, 0, -1};

using Mask = std::vector<std::uint8_t>;

struct Grid {
  int w, h;
  Mask m;
  std::uint8_t get(int x, int y) const {
    if (x < 0 || y < 0 || x >= w || y >= h)
      return 0;
    return m[static_cast<std::size_t>(y) * w + x];
  }
  void set(int x, int y, std::uint8_t v) {
    m[static_cast<std::size_t>(y) * w + x] = v;
  }
  std::array<std::uint8_t, 8> ring(int x, int y) const {
    std::array<std::uint8_t, 8> r{};
    for (int i = 0; i < 8; ++i)
      r[i] = get(x + kRingDx[i], y + kRingDy[i]);
    return r;
  }
};

Grid to_grid(const GrayImage &img) {
  Grid g{img.width(), img.height(), Mask(img.size(), 0)};
  for (std::size_t i = 0; i < img.size(); ++i)
    g.m[i] = img.pixels()[i] > 0.5 ? 1 : 0;
  return g;
}

GrayImage to_image(const Grid &g, double dpi) {
  GrayImage out(g.w, g.h, dpi, 0.0);
  for (std::size_t i = 0; i < g.m.size(); ++i)
    out.pixels()[i] = g.m[i] ? 1.0 : 0.0;
  return out;
}

bool zhang_suen_pass(Grid &g, int step) {
  std::vector<std::size_t> kill;
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      if (!g.get(x, y))
        continue;
      const auto r = g.ring(x, y);
      int b = 0, a = 0;
      for (int i = 0; i < 8; ++i) {
        b += r[i];
        a += (!r[i] && r[(i + 1) % 8]) ? 1 : 0;
      }
      if (b < 2 || b > 6 || a != 1)
        continue;
      const int n = r[0], e = r[2], s = r[4], w = r[6];
      const bool ok = step == 0 ? (n * e * s == 0 && e * s * w == 0)
                                : (n * e * w == 0 && n * s * w == 0);
      if (ok)
        kill.push_back(static_cast<std::size_t>(y) * g.w + x);
    }
  for (auto i : kill)
    g.m[i] = 0;
  return !kill.empty();
}

// Number of 8-connected components among the set ring neighbours.
int ring_components(const std::array<std::uint8_t, 8> &r) {
  std::array<int, 8> parent{};
  for (int i = 0; i < 8; ++i)
    parent[i] = i;
  auto find = [&](int i) {
    while (parent[i] != i)
      i = parent[i] = parent[parent[i]];
    return i;
  };
  auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
  for (int i = 0; i < 8; ++i) {
    if (!r[i])
      continue;
    if (r[(i + 1) % 8])
      unite(i, (i + 1) % 8);
    if (i % 2 == 0 && r[(i + 2) % 8])
      unite(i, (i + 2) % 8);
  }
  int n = 0;
  for (int i = 0; i < 8; ++i)
    if (r[i] && find(i) == i)
      ++n;
  return n;
}

// Deletes corner pixels of staircases so the skeleton is 8-thin.
bool remove_staircases(Grid &g) {
  bool changed = false;
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      if (!g.get(x, y))
        continue;
      const auto r = g.ring(x, y);
      const bool corner = (r[0] && r[2]) || (r[2] && r[4]) ||
                          (r[4] && r[6]) || (r[6] && r[0]);
      if (!corner)
        continue;
      if (r[0] && r[2] && r[4] && r[6])
        continue;
      if (ring_components(r) != 1)
        continue;
      g.set(x, y, 0);
      changed = true;
    }
  return changed;
}

int neighbour_count(const Grid &g, int x, int y) {
  int n = 0;
  for (int i = 0; i < 8; ++i)
    n += g.get(x + kRingDx[i], y + kRingDy[i]);
  return n;
}

std::size_t max_point_norm(const Ridge &ridge) {
  double d = 0;
  for (const auto &p : ridge.points)
    d = std::max(d, std::hypot(static_cast<double>(p.x),
                               static_cast<double>(p.y)));
  return static_cast<std::size_t>(std::ceil(d)) + 1;
}

double normalize_line(double &theta_deg, double &rho) {
  while (theta_deg < 0) {
    theta_deg += 180.0;
    rho = -rho;
  }
  while (theta_deg >= 180.0) {
    theta_deg -= 180.0;
    rho = -rho;
  }
  return theta_deg;
}

double line_distance(const HoughLine &l, double x, double y) {
  const double t = l.theta();
  return std::abs(x * std::cos(t) + y * std::sin(t) - l.rho);
}

// Orthogonal regression through the points; normal kept on the side of the
// reference normal.
bool fit_line(const std::vector<Pixel> &pts, double ref_theta,
              double &theta_deg, double &rho) {
  if (pts.size() < 2)
    return false;
  double mx = 0, my = 0;
  for (const auto &p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto &p : pts) {
    const double dx = p.x - mx, dy = p.y - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  // Direction of largest spread; the normal is perpendicular to it.
  const double dir = 0.5 * std::atan2(2 * sxy, sxx - syy);
  double nx = -std::sin(dir), ny = std::cos(dir);
  if (nx * std::cos(ref_theta) + ny * std::sin(ref_theta) < 0) {
    nx = -nx;
    ny = -ny;
  }
  theta_deg = std::atan2(ny, nx) / kDeg;
  rho = mx * nx + my * ny;
  return true;
}

// Lines that round to exactly these pixels form a convex set of
// (slope, intercept) pairs along the major axis; its centroid is the best
// estimate of the drawn line and beats least squares on short runs. Returns
// false when no single digital line fits, e.g. noisy skeleton pixels.
bool digital_line_centre(const std::vector<Pixel> &pts, double ref_theta_deg,
                         double &theta_deg, double &rho) {
  if (pts.size() < 3)
    return false;
  struct V {
    double a, b;
  };
  // Normal near the y axis means the line runs along x.
  const bool x_major = std::abs(std::sin(ref_theta_deg * kDeg)) >=
                       std::abs(std::cos(ref_theta_deg * kDeg));
  std::vector<V> poly{{-1.5, -1e6}, {1.5, -1e6}, {1.5, 1e6}, {-1.5, 1e6}}, next;
  // Keep the part of poly where ka*a + kb*b <= c.
  auto clip = [&](double ka, double kb, double c) {
    next.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const V &p = poly[i], &q = poly[(i + 1) % poly.size()];
      const double fp = ka * p.a + kb * p.b - c, fq = ka * q.a + kb * q.b - c;
      if (fp <= 0)
        next.push_back(p);
      if ((fp < 0) != (fq < 0) && fp != fq) {
        const double t = fp / (fp - fq);
        next.push_back({p.a + t * (q.a - p.a), p.b + t * (q.b - p.b)});
      }
    }
    poly.swap(next);
  };
  for (const auto &p : pts) {
    const double major = x_major ? p.x : p.y, minor = x_major ? p.y : p.x;
    clip(major, 1, minor + 0.5);
    clip(-major, -1, 0.5 - minor);
    if (poly.size() < 3)
      return false;
  }
  double area = 0, ca = 0, cb = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const V &p = poly[i], &q = poly[(i + 1) % poly.size()];
    const double cross = p.a * q.b - q.a * p.b;
    area += cross;
    ca += (p.a + q.a) * cross;
    cb += (p.b + q.b) * cross;
  }
  if (std::abs(area) < 1e-12)
    return false;
  const double a = ca / (3 * area), b = cb / (3 * area);
  // minor = a*major + b as a normal form.
  const double nx = x_major ? -a : 1.0, ny = x_major ? 1.0 : -a;
  const double len = std::hypot(nx, ny);
  theta_deg = std::atan2(ny, nx) / kDeg;
  rho = b / len;
  return true;
}

// End cleanup for Zhang-Suen artifacts at the square ends of thick strokes:
// branches of at most max_len pixels hanging off a branch pixel are deleted,
// and so are the last max_len pixels of an end that hooks away (> 45 deg)
// from the direction of the stroke behind it.
bool trim_ends(Grid &g, int max_len) {
  std::vector<std::pair<int, int>> doomed;
  std::vector<std::pair<int, int>> path;
  const int reach = 3 * max_len;
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      if (!g.get(x, y) || neighbour_count(g, x, y) != 1)
        continue;
      path.clear();
      int cx = x, cy = y;
      bool at_branch = false;
      while (static_cast<int>(path.size()) <= reach) {
        if (neighbour_count(g, cx, cy) >= 3) {
          at_branch = true;
          break;
        }
        path.emplace_back(cx, cy);
        int nx = -1, ny = -1;
        for (int i = 0; i < 8; ++i) {
          const int qx = cx + kRingDx[i], qy = cy + kRingDy[i];
          if (g.get(qx, qy) &&
              std::find(path.begin(), path.end(), std::pair{qx, qy}) == path.end()) {
            nx = qx;
            ny = qy;
            break;
          }
        }
        if (nx < 0)
          break;
        cx = nx;
        cy = ny;
      }
      const auto len = static_cast<int>(path.size());
      if (at_branch && len > 0 && len <= max_len) {
        doomed.insert(doomed.end(), path.begin(), path.end());
        continue;
      }
      if (len <= reach)
        continue;
      const auto &p0 = path[0], &pk = path[max_len], &pe = path[reach];
      const double ax = pk.first - p0.first, ay = pk.second - p0.second;
      const double bx = pe.first - pk.first, by = pe.second - pk.second;
      const double cosang = (ax * bx + ay * by) /
                            (std::hypot(ax, ay) * std::hypot(bx, by));
      if (cosang < std::cos(kPi / 4))
        doomed.insert(doomed.end(), path.begin(), path.begin() + max_len);
    }
  for (const auto &[x, y] : doomed)
    g.set(x, y, 0);
  return !doomed.empty();
}

} // namespace

std::string_view to_string(Curvature c) {
  switch (c) {
  case Curvature::straight:
    return "straight";
  case Curvature::curved:
    return "curved";
  case Curvature::highly_curved:
    return "highly_curved";
  }
  return "straight";
}

double HoughLine::theta() const { return theta_deg * kDeg; }

std::size_t RidgeFeature::point_count() const {
  std::size_t n = 0;
  for (const auto &r : ridges)
    n += r.points.size();
  return n;
}

GrayImage thin(const GrayImage &binary) {
  Grid g = to_grid(binary);
  const int spur_len =
      std::max(2, static_cast<int>(std::lround(at_dpi(3.0, binary.dpi()))));
  for (;;) {
    bool changed = zhang_suen_pass(g, 0);
    changed |= zhang_suen_pass(g, 1);
    changed |= remove_staircases(g);
    if (!changed)
      changed = trim_ends(g, spur_len);
    if (!changed)
      break;
  }
  return to_image(g, binary.dpi());
}

std::vector<Ridge> trace_ridges(const GrayImage &skeleton, int min_ridge_len) {
  const Grid g = to_grid(skeleton);
  Grid branch{g.w, g.h, Mask(g.m.size(), 0)};
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x)
      if (g.get(x, y) && neighbour_count(g, x, y) >= 3)
        branch.set(x, y, 1);

  auto usable = [&](int x, int y) { return g.get(x, y) && !branch.get(x, y); };
  Mask visited(g.m.size(), 0);
  auto seen = [&](int x, int y) {
    return visited[static_cast<std::size_t>(y) * g.w + x] != 0;
  };
  // 4-neighbours first so the walk is deterministic.
  constexpr std::array<int, 8> order{0, 2, 4, 6, 1, 3, 5, 7};
  auto walk = [&](int x, int y) {
    Ridge r;
    for (;;) {
      visited[static_cast<std::size_t>(y) * g.w + x] = 1;
      r.points.push_back({x, y});
      bool moved = false;
      for (int i : order) {
        const int nx = x + kRingDx[i], ny = y + kRingDy[i];
        if (usable(nx, ny) && !seen(nx, ny)) {
          x = nx;
          y = ny;
          moved = true;
          break;
        }
      }
      if (!moved)
        return r;
    }
  };

  std::vector<Ridge> ridges;
  auto keep = [&](Ridge r) {
    if (static_cast<int>(r.points.size()) >= min_ridge_len) {
      r.id = static_cast<int>(ridges.size());
      ridges.push_back(std::move(r));
    }
  };
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      if (!usable(x, y) || seen(x, y))
        continue;
      int n = 0;
      for (int i = 0; i < 8; ++i)
        n += usable(x + kRingDx[i], y + kRingDy[i]) ? 1 : 0;
      if (n <= 1)
        keep(walk(x, y));
    }
  // What is left are closed loops.
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x)
      if (usable(x, y) && !seen(x, y))
        keep(walk(x, y));
  return ridges;
}

std::vector<HoughLine> hough_lines(const Ridge &ridge, double theta_step_deg,
                                   double rho_step, int max_lines) {
  std::vector<HoughLine> lines;
  const auto n = ridge.points.size();
  const double threshold = std::max(5.0, 0.1 * static_cast<double>(n));
  if (static_cast<double>(n) < threshold || max_lines <= 0)
    return lines;

  const int n_theta = static_cast<int>(std::lround(180.0 / theta_step_deg));
  const int offset = static_cast<int>(
      std::ceil(static_cast<double>(max_point_norm(ridge)) / rho_step));
  const int n_rho = 2 * offset + 1;
  std::vector<double> cs(static_cast<std::size_t>(n_theta)),
      sn(static_cast<std::size_t>(n_theta));
  for (int t = 0; t < n_theta; ++t) {
    cs[t] = std::cos(t * theta_step_deg * kDeg);
    sn[t] = std::sin(t * theta_step_deg * kDeg);
  }
  // Precomputed bin of every point for every angle.
  std::vector<int> bins(n * static_cast<std::size_t>(n_theta));
  for (std::size_t i = 0; i < n; ++i) {
    const auto &p = ridge.points[i];
    for (int t = 0; t < n_theta; ++t)
      bins[i * n_theta + t] =
          static_cast<int>(std::lround((p.x * cs[t] + p.y * sn[t]) / rho_step)) +
          offset;
  }

  std::vector<std::uint8_t> active(n, 1);
  std::vector<int> acc(static_cast<std::size_t>(n_theta) * n_rho);
  while (static_cast<int>(lines.size()) < max_lines) {
    std::fill(acc.begin(), acc.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i])
        continue;
      for (int t = 0; t < n_theta; ++t)
        ++acc[static_cast<std::size_t>(t) * n_rho + bins[i * n_theta + t]];
    }
    // The global maximum (first in scan order) is a 3x3 local maximum.
    int best = 0;
    std::size_t best_cell = 0;
    for (std::size_t c = 0; c < acc.size(); ++c)
      if (acc[c] > best) {
        best = acc[c];
        best_cell = c;
      }
    if (best < threshold)
      break;
    const int bt = static_cast<int>(best_cell / n_rho);
    const int br = static_cast<int>(best_cell % n_rho);
    const double theta_bin = bt * theta_step_deg;
    const double rho_bin = (br - offset) * rho_step;

    std::vector<Pixel> inliers;
    std::vector<std::size_t> inlier_idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i])
        continue;
      const auto &p = ridge.points[i];
      if (std::abs(p.x * cs[bt] + p.y * sn[bt] - rho_bin) <= rho_step) {
        inliers.push_back(p);
        inlier_idx.push_back(i);
      }
    }
    HoughLine line{theta_bin, rho_bin, best};
    // Least-squares polish: a short digital line can peak a few bins away
    // from its true angle. The fit is kept only if it explains at least as
    // many active points as the cell did.
    std::vector<Pixel> fit_pts = inliers;
    for (int it = 0; it < 3; ++it) {
      double th = 0, rho = 0;
      if (!fit_line(fit_pts, theta_bin * kDeg, th, rho))
        break;
      HoughLine cand{th, rho, best};
      normalize_line(cand.theta_deg, cand.rho);
      std::vector<Pixel> near;
      for (std::size_t i = 0; i < n; ++i)
        if (active[i] &&
            line_distance(cand, ridge.points[i].x, ridge.points[i].y) <= rho_step)
          near.push_back(ridge.points[i]);
      if (static_cast<int>(near.size()) < best)
        break;
      line = cand;
      if (near.size() == fit_pts.size())
        break;
      fit_pts = std::move(near);
    }
    {
      HoughLine cand = line;
      if (digital_line_centre(fit_pts, line.theta_deg, cand.theta_deg, cand.rho)) {
        normalize_line(cand.theta_deg, cand.rho);
        int near = 0;
        for (std::size_t i = 0; i < n; ++i)
          near += active[i] &&
                  line_distance(cand, ridge.points[i].x, ridge.points[i].y) <= rho_step;
        if (near >= best)
          line = cand;
      }
    }
    for (auto i : inlier_idx)
      active[i] = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (active[i] &&
          line_distance(line, ridge.points[i].x, ridge.points[i].y) <= rho_step)
        active[i] = 0;
    lines.push_back(line);
  }
  return lines;
}

std::size_t points_near_line(const HoughLine &line, const Ridge &ridge,
                             double rho_step) {
  return static_cast<std::size_t>(std::count_if(
      ridge.points.begin(), ridge.points.end(), [&](const Pixel &p) {
        return line_distance(line, p.x, p.y) <= rho_step;
      }));
}

double angular_spread_deg(const std::vector<HoughLine> &lines) {
  if (lines.size() < 2)
    return 0.0;
  std::vector<double> a;
  for (const auto &l : lines)
    a.push_back(std::fmod(std::fmod(l.theta_deg, 180.0) + 180.0, 180.0));
  std::sort(a.begin(), a.end());
  double max_gap = a.front() + 180.0 - a.back();
  for (std::size_t i = 1; i < a.size(); ++i)
    max_gap = std::max(max_gap, a[i] - a[i - 1]);
  return 180.0 - max_gap;
}

Curvature classify_curvature(const std::vector<HoughLine> &lines,
                             const Ridge &ridge, double rho_step) {
  if (lines.empty() || ridge.points.empty())
    return Curvature::straight;
  const std::size_t k = std::min<std::size_t>(lines.size(), 16);
  const std::size_t n = ridge.points.size();
  std::vector<std::vector<std::uint8_t>> near(k, std::vector<std::uint8_t>(n));
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t i = 0; i < n; ++i)
      near[l][i] = line_distance(lines[l], ridge.points[i].x,
                                 ridge.points[i].y) <= rho_step;

  const double needed = 0.8 * static_cast<double>(n);
  unsigned best_mask = (1u << k) - 1;
  int best_bits = static_cast<int>(k) + 1;
  std::size_t best_cover = 0;
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    const int bits = std::popcount(mask);
    if (bits > best_bits)
      continue;
    std::size_t cover = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < k; ++l)
        if ((mask >> l) & 1u && near[l][i]) {
          ++cover;
          break;
        }
    }
    if (static_cast<double>(cover) < needed)
      continue;
    if (bits < best_bits || cover > best_cover) {
      best_bits = bits;
      best_cover = cover;
      best_mask = mask;
    }
  }
  // Lines that cannot explain the ridge between them mean it bends too much
  // for the line budget.
  if (best_bits > static_cast<int>(k))
    return Curvature::highly_curved;
  std::vector<HoughLine> chosen;
  for (std::size_t l = 0; l < k; ++l)
    if ((best_mask >> l) & 1u)
      chosen.push_back(lines[l]);
  const double spread = angular_spread_deg(chosen);
  if (spread < 10.0)
    return Curvature::straight;
  if (spread < 40.0)
    return Curvature::curved;
  return Curvature::highly_curved;
}

RidgeFeature build_ridge_feature(std::vector<Ridge> ridges, int width,
                                 int height, const RidgeParams &params) {
  RidgeFeature f;
  f.width = width;
  f.height = height;
  for (auto &r : ridges) {
    auto lines = hough_lines(r, params.theta_step_deg, params.rho_step,
                             params.max_lines);
    if (lines.empty())
      continue;
    r.id = static_cast<int>(f.ridges.size());
    f.curvature.push_back(classify_curvature(lines, r, params.rho_step));
    f.lines.push_back(std::move(lines));
    f.ridges.push_back(std::move(r));
  }
  return f;
}

RidgeFeature ridge_feature_from_skeleton(const GrayImage &skeleton,
                                         const RidgeParams &params) {
  const int min_len = std::max(
      2, static_cast<int>(std::lround(at_dpi(params.min_ridge_len, skeleton.dpi()))));
  return build_ridge_feature(trace_ridges(skeleton, min_len), skeleton.width(),
                             skeleton.height(), params);
}

RidgeFeature extract_ridge_features(const GrayImage &img,
                                    const RidgeParams &params) {
  const Preprocessed pre = preprocess(img);
  RidgeFeature f = ridge_feature_from_skeleton(thin(pre.binary), params);
  if (f.empty())
    throw EmptyTemplate();
  return f;
}

void write_ridge_feature(std::ostream &out, const RidgeFeature &f) {
  out << "RIDGEFEAT v1 " << f.width << ' ' << f.height << '\n';
  for (std::size_t i = 0; i < f.ridges.size(); ++i) {
    const auto &r = f.ridges[i];
    out << "R " << r.id << ' ' << to_string(f.curvature[i]) << ' '
        << r.points.size() << '\n';
    for (const auto &p : r.points)
      out << p.x << ' ' << p.y << '\n';
    for (const auto &l : f.lines[i])
      out << "L " << text::num(l.theta_deg) << ' ' << text::num(l.rho) << ' '
          << l.votes << '\n';
  }
}

RidgeFeature read_ridge_feature(std::istream &in) {
  std::istringstream fields;
  std::string tag, ver;
  if (!text::next_fields(in, fields) || !(fields >> tag >> ver) ||
      tag != "RIDGEFEAT" || ver != "v1")
    throw ParseError("missing 'RIDGEFEAT v1' header");
  RidgeFeature f;
  std::string w, h;
  if (!(fields >> w >> h))
    throw ParseError("RIDGEFEAT header lacks image size");
  f.width = static_cast<int>(text::parse_int(w, "width"));
  f.height = static_cast<int>(text::parse_int(h, "height"));

  while (text::next_fields(in, fields)) {
    std::string kind;
    fields >> kind;
    if (kind == "R") {
      std::string id, cls, count;
      if (!(fields >> id >> cls >> count))
        throw ParseError("truncated ridge record");
      Ridge r;
      r.id = static_cast<int>(text::parse_int(id, "ridge id"));
      Curvature c;
      if (cls == "straight")
        c = Curvature::straight;
      else if (cls == "curved")
        c = Curvature::curved;
      else if (cls == "highly_curved")
        c = Curvature::highly_curved;
      else
        throw ParseError("unknown curvature class '" + cls + "'");
      const auto npts = text::parse_int(count, "point count");
      for (long long k = 0; k < npts; ++k) {
        std::string xs, ys;
        if (!text::next_fields(in, fields) || !(fields >> xs >> ys))
          throw ParseError("ridge " + id + " has too few points");
        r.points.push_back({static_cast<int>(text::parse_int(xs, "x")),
                            static_cast<int>(text::parse_int(ys, "y"))});
      }
      f.ridges.push_back(std::move(r));
      f.curvature.push_back(c);
      f.lines.emplace_back();
    } else if (kind == "L") {
      if (f.ridges.empty())
        throw ParseError("line record before any ridge");
      std::string t, rho, votes;
      if (!(fields >> t >> rho >> votes))
        throw ParseError("truncated line record");
      f.lines.back().push_back(
          {text::parse_double(t, "theta"), text::parse_double(rho, "rho"),
           static_cast<int>(text::parse_int(votes, "votes"))});
    } else {
      throw ParseError("unexpected record '" + kind + "'");
    }
  }
  return f;
}

} // namespace fp
