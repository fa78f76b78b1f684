#include "fp/minutiae.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <unordered_map>

#include "fp/errors.hpp"
#include "fp/text_io.hpp"

namespace fp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

constexpr std::array<int, 8> kRingDx{0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 8> kRingDy{-1, -1, 0, 1, 1, 1, 0, -1};

bool on(const GrayImage &s, int x, int y) {
  return s.contains(x, y) && s.at(x, y) > 0.5;
}

double wrap_deg360(double a) {
  a = std::fmod(a, 360.0);
  return a < 0 ? a + 360.0 : a;
}

double angle_diff_deg(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

// Follows the skeleton for up to `steps` pixels and returns the direction
// from the start to where the walk ended (degrees), or NaN if it went nowhere.
double branch_direction(const GrayImage &s, int sx, int sy, int fx, int fy,
                        std::vector<std::pair<int, int>> blocked, int steps) {
  int x = fx, y = fy;
  blocked.emplace_back(sx, sy);
  auto is_blocked = [&](int bx, int by) {
    return std::find(blocked.begin(), blocked.end(), std::pair{bx, by}) !=
           blocked.end();
  };
  for (int k = 1; k < steps; ++k) {
    blocked.emplace_back(x, y);
    bool moved = false;
    for (int i : {0, 2, 4, 6, 1, 3, 5, 7}) {
      const int nx = x + kRingDx[i], ny = y + kRingDy[i];
      if (on(s, nx, ny) && !is_blocked(nx, ny)) {
        x = nx;
        y = ny;
        moved = true;
        break;
      }
    }
    if (!moved)
      break;
  }
  if (x == sx && y == sy)
    return std::nan("");
  return wrap_deg360(std::atan2(y - sy, x - sx) / kDeg);
}

// First pixel of each 8-connected run of skeleton neighbours.
std::vector<std::pair<int, int>> branch_starts(const GrayImage &s, int x,
                                               int y) {
  std::array<std::uint8_t, 8> r{};
  for (int i = 0; i < 8; ++i)
    r[i] = on(s, x + kRingDx[i], y + kRingDy[i]) ? 1 : 0;
  std::array<int, 8> comp{};
  comp.fill(-1);
  int next = 0;
  for (int i = 0; i < 8; ++i) {
    if (!r[i] || comp[i] >= 0)
      continue;
    std::vector<int> stack{i};
    comp[i] = next;
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      std::vector<int> adj{(k + 1) % 8, (k + 7) % 8};
      if (k % 2 == 0) {
        adj.push_back((k + 2) % 8);
        adj.push_back((k + 6) % 8);
      }
      for (int a : adj)
        if (r[a] && comp[a] < 0) {
          comp[a] = next;
          stack.push_back(a);
        }
    }
    ++next;
  }
  // Prefer 4-neighbours as the representative of each run.
  std::vector<std::pair<int, int>> starts(static_cast<std::size_t>(next),
                                          {INT32_MIN, 0});
  for (int pass = 0; pass < 2; ++pass)
    for (int i = pass; i < 8; i += 2)
      if (r[i] && starts[comp[i]].first == INT32_MIN)
        starts[comp[i]] = {x + kRingDx[i], y + kRingDy[i]};
  return starts;
}

struct Candidate {
  int x, y;
  MinutiaKind kind;
};

struct Hypothesis {
  double dt; // radians
  double dx, dy;
};

int pair_count(const MinutiaSet &a, const MinutiaSet &b,
               const AlignmentParams &al, double r0, double a0_deg,
               std::vector<std::pair<int, int>> *pairs = nullptr) {
  const RigidTransform tf(al, a.width, a.height);
  struct P {
    double d;
    int i, j;
  };
  std::vector<P> cand;
  for (std::size_t i = 0; i < a.minutiae.size(); ++i) {
    const auto &m = a.minutiae[i];
    const Point2 t = tf.apply(m.x, m.y);
    const double dir = m.direction_deg + al.dtheta / kDeg;
    for (std::size_t j = 0; j < b.minutiae.size(); ++j) {
      const auto &n = b.minutiae[j];
      const double d = std::hypot(t.x - n.x, t.y - n.y);
      if (d > r0 || angle_diff_deg(dir, n.direction_deg) > a0_deg)
        continue;
      cand.push_back({d, static_cast<int>(i), static_cast<int>(j)});
    }
  }
  std::sort(cand.begin(), cand.end(), [](const P &x, const P &y) {
    if (x.d != y.d)
      return x.d < y.d;
    if (x.i != y.i)
      return x.i < y.i;
    return x.j < y.j;
  });
  std::vector<std::uint8_t> ua(a.minutiae.size(), 0), ub(b.minutiae.size(), 0);
  int n = 0;
  for (const auto &c : cand) {
    if (ua[c.i] || ub[c.j])
      continue;
    ua[c.i] = ub[c.j] = 1;
    ++n;
    if (pairs)
      pairs->emplace_back(c.i, c.j);
  }
  return n;
}

// Least-squares rigid fit of paired minutiae about the query centre.
AlignmentParams fit_pairs(const MinutiaSet &a, const MinutiaSet &b,
                          const std::vector<std::pair<int, int>> &pairs) {
  const double cx = 0.5 * (a.width - 1), cy = 0.5 * (a.height - 1);
  double ux = 0, uy = 0, qx = 0, qy = 0;
  for (const auto &[i, j] : pairs) {
    ux += a.minutiae[i].x - cx;
    uy += a.minutiae[i].y - cy;
    qx += b.minutiae[j].x;
    qy += b.minutiae[j].y;
  }
  const double n = static_cast<double>(pairs.size());
  ux /= n;
  uy /= n;
  qx /= n;
  qy /= n;
  double sdot = 0, scross = 0;
  for (const auto &[i, j] : pairs) {
    const double px = a.minutiae[i].x - cx - ux, py = a.minutiae[i].y - cy - uy;
    const double rx = b.minutiae[j].x - qx, ry = b.minutiae[j].y - qy;
    sdot += px * rx + py * ry;
    scross += px * ry - py * rx;
  }
  const double phi = std::atan2(scross, sdot);
  const double c = std::cos(phi), s = std::sin(phi);
  return {phi, qx - (c * ux - s * uy) - cx, qy - (s * ux + c * uy) - cy, 1.0};
}

MatchScore one_direction(const MinutiaSet &a, const MinutiaSet &b,
                         const MinutiaeParams &p, double scale) {
  MatchScore best;
  const double cx = 0.5 * (a.width - 1), cy = 0.5 * (a.height - 1);
  const double r0 = p.r0 * scale;
  const double bin_t = 2.0 * p.a0_deg / 3.0 * kDeg;
  const double bin_xy = r0;

  struct Cell {
    double w = 0, st = 0, sx = 0, sy = 0;
  };
  std::unordered_map<long long, Cell> cells;
  for (const auto &m : a.minutiae)
    for (const auto &n : b.minutiae) {
      if (m.kind != n.kind)
        continue;
      double dt = (n.direction_deg - m.direction_deg) * kDeg;
      dt = std::remainder(dt, 2 * kPi);
      if (std::abs(dt) > p.max_rotation_deg * kDeg)
        continue;
      const double c = std::cos(dt), s = std::sin(dt);
      const double ux = m.x - cx, uy = m.y - cy;
      const double dx = n.x - (c * ux - s * uy + cx);
      const double dy = n.y - (s * ux + c * uy + cy);
      const double ft = dt / bin_t - 0.5, fx = dx / bin_xy - 0.5,
                   fy = dy / bin_xy - 0.5;
      const int t0 = static_cast<int>(std::floor(ft));
      const int x0 = static_cast<int>(std::floor(fx));
      const int y0 = static_cast<int>(std::floor(fy));
      const double wt = ft - t0, wx = fx - x0, wy = fy - y0;
      for (int i = 0; i < 8; ++i) {
        const int oi = i & 1, oj = (i >> 1) & 1, ok = (i >> 2) & 1;
        const double w =
            (oi ? wt : 1 - wt) * (oj ? wx : 1 - wx) * (ok ? wy : 1 - wy);
        if (w <= 0)
          continue;
        const long long key = ((static_cast<long long>(t0 + oi) + 512) << 40) |
                              ((static_cast<long long>(x0 + oj) + 524288) << 20) |
                              (static_cast<long long>(y0 + ok) + 524288);
        Cell &cell = cells[key];
        cell.w += w;
        cell.st += w * dt;
        cell.sx += w * dx;
        cell.sy += w * dy;
      }
    }

  std::vector<std::pair<long long, Cell>> ranked(cells.begin(), cells.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto &x, const auto &y) {
    if (x.second.w != y.second.w)
      return x.second.w > y.second.w;
    return x.first < y.first;
  });
  const std::size_t take =
      std::min(ranked.size(), static_cast<std::size_t>(p.vote_candidates));
  for (std::size_t k = 0; k < take; ++k) {
    const Cell &c = ranked[k].second;
    AlignmentParams al{c.st / c.w, c.sx / c.w, c.sy / c.w, 1.0};
    std::vector<std::pair<int, int>> pairs;
    int n = pair_count(a, b, al, r0, p.a0_deg, &pairs);
    if (pairs.size() >= 2) {
      const AlignmentParams fit = fit_pairs(a, b, pairs);
      const int n2 = pair_count(a, b, fit, r0, p.a0_deg);
      if (n2 > n) {
        n = n2;
        al = fit;
      }
    }
    if (n > best.matched_count) {
      best.matched_count = n;
      best.aligned = al;
    }
  }
  best.value = 2.0 * best.matched_count /
               static_cast<double>(a.minutiae.size() + b.minutiae.size());
  return best;
}

} // namespace

int crossing_number(const GrayImage &skeleton, int x, int y) {
  int sum = 0;
  for (int i = 0; i < 8; ++i) {
    const int a = on(skeleton, x + kRingDx[i], y + kRingDy[i]) ? 1 : 0;
    const int b =
        on(skeleton, x + kRingDx[(i + 1) % 8], y + kRingDy[(i + 1) % 8]) ? 1 : 0;
    sum += std::abs(a - b);
  }
  return sum / 2;
}

MinutiaSet extract_minutiae(const GrayImage &skeleton, const BlockMap &map,
                            const MinutiaeParams &params) {
  const double dpi = skeleton.dpi();
  MinutiaSet out;
  out.width = skeleton.width();
  out.height = skeleton.height();

  std::vector<Candidate> raw;
  for (int y = 0; y < skeleton.height(); ++y)
    for (int x = 0; x < skeleton.width(); ++x) {
      if (!on(skeleton, x, y))
        continue;
      const int cn = crossing_number(skeleton, x, y);
      if (cn == 1)
        raw.push_back({x, y, MinutiaKind::ending});
      else if (cn == 3)
        raw.push_back({x, y, MinutiaKind::bifurcation});
    }

  // Adjacent bifurcation pixels describe one junction; keep the first.
  std::vector<Candidate> cands;
  for (const auto &c : raw) {
    if (c.kind == MinutiaKind::bifurcation &&
        std::any_of(cands.begin(), cands.end(), [&](const Candidate &o) {
          return o.kind == MinutiaKind::bifurcation &&
                 std::max(std::abs(o.x - c.x), std::abs(o.y - c.y)) <= 2;
        }))
      continue;
    cands.push_back(c);
  }

  const int steps =
      std::max(3, static_cast<int>(std::lround(at_dpi(params.trace_length, dpi))));
  for (const auto &c : cands) {
    const auto starts = branch_starts(skeleton, c.x, c.y);
    Minutia m{c.x, c.y, 0.0, c.kind};
    if (c.kind == MinutiaKind::ending) {
      if (starts.empty())
        continue;
      const double d = branch_direction(skeleton, c.x, c.y, starts[0].first,
                                        starts[0].second, {}, steps);
      if (std::isnan(d))
        continue;
      m.direction_deg = d;
    } else {
      std::vector<double> dirs;
      for (std::size_t b = 0; b < starts.size(); ++b) {
        std::vector<std::pair<int, int>> blocked;
        for (std::size_t o = 0; o < starts.size(); ++o)
          if (o != b)
            blocked.push_back(starts[o]);
        const double d = branch_direction(skeleton, c.x, c.y, starts[b].first,
                                          starts[b].second, blocked, steps);
        if (!std::isnan(d))
          dirs.push_back(d);
      }
      if (dirs.size() < 2)
        continue;
      double best_sep = 1e9;
      double bis = 0;
      for (std::size_t i = 0; i < dirs.size(); ++i)
        for (std::size_t j = i + 1; j < dirs.size(); ++j) {
          const double sep = angle_diff_deg(dirs[i], dirs[j]);
          if (sep < best_sep) {
            best_sep = sep;
            const double xi = std::cos(dirs[i] * kDeg) + std::cos(dirs[j] * kDeg);
            const double yi = std::sin(dirs[i] * kDeg) + std::sin(dirs[j] * kDeg);
            bis = wrap_deg360(std::atan2(yi, xi) / kDeg);
          }
        }
      m.direction_deg = bis;
    }
    out.minutiae.push_back(m);
  }

  // Border zone: distance to the image edge or to background pixels.
  const double zone = at_dpi(params.border_zone, dpi);
  if (zone > 0) {
    const int r = static_cast<int>(std::ceil(zone));
    std::erase_if(out.minutiae, [&](const Minutia &m) {
      const int edge = std::min({m.x, m.y, out.width - 1 - m.x,
                                 out.height - 1 - m.y});
      if (edge < zone)
        return true;
      for (int y = m.y - r; y <= m.y + r; ++y)
        for (int x = m.x - r; x <= m.x + r; ++x) {
          if (x < 0 || y < 0 || x >= out.width || y >= out.height)
            continue;
          if (std::hypot(x - m.x, y - m.y) < zone && !map.foreground_at(x, y))
            return true;
        }
      return false;
    });
  }

  // Spurs, bridges and broken ridges: drop every member of a close pair.
  const double min_d = at_dpi(params.min_distance, dpi);
  std::vector<std::uint8_t> drop(out.minutiae.size(), 0);
  for (std::size_t i = 0; i < out.minutiae.size(); ++i)
    for (std::size_t j = i + 1; j < out.minutiae.size(); ++j) {
      const auto &a = out.minutiae[i], &b = out.minutiae[j];
      if (std::hypot(a.x - b.x, a.y - b.y) < min_d)
        drop[i] = drop[j] = 1;
    }
  std::vector<Minutia> kept;
  for (std::size_t i = 0; i < out.minutiae.size(); ++i)
    if (!drop[i])
      kept.push_back(out.minutiae[i]);
  out.minutiae = std::move(kept);
  return out;
}

MatchScore compare_minutiae(const MinutiaSet &query,
                            const MinutiaSet &reference,
                            const MinutiaeParams &params, double dpi) {
  if (query.minutiae.empty() || reference.minutiae.empty())
    return {};
  const double scale = dpi / kDefaultDpi;
  MatchScore fwd = one_direction(query, reference, params, scale);
  MatchScore bwd = one_direction(reference, query, params, scale);
  if (bwd.value > fwd.value) {
    // Express the reverse alignment in query-to-reference terms.
    const double c = std::cos(bwd.aligned.dtheta), s = std::sin(bwd.aligned.dtheta);
    const double rcx = 0.5 * (reference.width - 1),
                 rcy = 0.5 * (reference.height - 1);
    const double qcx = 0.5 * (query.width - 1), qcy = 0.5 * (query.height - 1);
    // Inverse of p_q = R (p_r - rc) + rc + t.
    const double ox = qcx - rcx - bwd.aligned.dx, oy = qcy - rcy - bwd.aligned.dy;
    AlignmentParams inv{-bwd.aligned.dtheta, 0, 0, 1.0};
    inv.dx = (c * ox + s * oy) + rcx - qcx;
    inv.dy = (-s * ox + c * oy) + rcy - qcy;
    bwd.aligned = inv;
    return bwd;
  }
  return fwd;
}

void write_minutiae(std::ostream &out, const MinutiaSet &set) {
  out << "MINUTIAE v1 " << set.width << ' ' << set.height << '\n';
  for (const auto &m : set.minutiae)
    out << m.x << ' ' << m.y << ' ' << text::num(m.direction_deg) << ' '
        << (m.kind == MinutiaKind::ending ? 'E' : 'B') << '\n';
}

MinutiaSet read_minutiae(std::istream &in) {
  std::istringstream fields;
  std::string tag, ver, w, h;
  if (!text::next_fields(in, fields) || !(fields >> tag >> ver >> w >> h) ||
      tag != "MINUTIAE" || ver != "v1")
    throw ParseError("missing 'MINUTIAE v1 <width> <height>' header");
  MinutiaSet set;
  set.width = static_cast<int>(text::parse_int(w, "width"));
  set.height = static_cast<int>(text::parse_int(h, "height"));
  while (text::next_fields(in, fields)) {
    std::string xs, ys, ds, ks;
    if (!(fields >> xs >> ys >> ds >> ks))
      throw ParseError("truncated minutia record");
    Minutia m;
    m.x = static_cast<int>(text::parse_int(xs, "x"));
    m.y = static_cast<int>(text::parse_int(ys, "y"));
    m.direction_deg = text::parse_double(ds, "direction");
    if (ks == "E")
      m.kind = MinutiaKind::ending;
    else if (ks == "B")
      m.kind = MinutiaKind::bifurcation;
    else
      throw ParseError("unknown minutia kind '" + ks + "'");
    set.minutiae.push_back(m);
  }
  return set;
}

} // namespace fp
