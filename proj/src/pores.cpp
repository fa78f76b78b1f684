#include "fp/pores.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include <opencv2/imgproc.hpp>

#include "detail/cv_bridge.hpp"
#include "detail/dot.hpp"
#include "fp/errors.hpp"
#include "fp/ridge_features.hpp"
#include "fp/text_io.hpp"

namespace fp {

namespace {

constexpr double kPi = std::numbers::pi;

double block_period(const BlockMap &map, const std::vector<double> &freq,
                    int x, int y, double fallback) {
  const double f = freq[map.index(map.col_of(x), map.row_of(y))];
  return f > 0 ? 1.0 / f : fallback;
}

double median_of(std::vector<double> v) {
  if (v.empty())
    return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Robust spread (MAD scaled to a Gaussian sigma) of the responses between
// ridges, where no pore can sit.
double valley_noise(const std::vector<double> &resp, const GrayImage &ridges,
                    const BlockMap &map) {
  std::vector<double> vals;
  for (int y = 0; y < ridges.height(); ++y)
    for (int x = 0; x < ridges.width(); ++x) {
      const auto i = static_cast<std::size_t>(y) * ridges.width() + x;
      if (ridges.pixels()[i] <= 0.5 && map.foreground_at(x, y))
        vals.push_back(resp[i]);
    }
  const double med = median_of(vals);
  for (auto &v : vals)
    v = std::abs(v - med);
  return 1.4826 * median_of(std::move(vals));
}

// The same spread per block, pooled over the block and its eight
// neighbours. Near cores and deltas the background model is poor and the
// valleys are noisy too, which raises the bar there.
std::vector<double> local_valley_noise(const std::vector<double> &resp, const GrayImage &ridges,
                                       const BlockMap &map) {
  const int w = ridges.width(), h = ridges.height();
  std::vector<double> out(map.foreground.size(), 0.0);
  std::vector<double> vals;
  for (int r = 0; r < map.rows; ++r)
    for (int c = 0; c < map.cols; ++c) {
      vals.clear();
      const int x0 = std::max(0, (c - 1) * map.block_size), x1 = std::min(w, (c + 2) * map.block_size);
      const int y0 = std::max(0, (r - 1) * map.block_size), y1 = std::min(h, (r + 2) * map.block_size);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const auto i = static_cast<std::size_t>(y) * w + x;
          if (ridges.pixels()[i] <= 0.5 && map.foreground_at(x, y))
            vals.push_back(resp[i]);
        }
      const double med = median_of(vals);
      for (auto &v : vals)
        v = std::abs(v - med);
      out[map.index(c, r)] = 1.4826 * median_of(std::move(vals));
    }
  return out;
}

// Unit steps along the orientation field from (x, y), starting in direction
// th and keeping the heading continuous; stops at the raster edge.
std::vector<std::pair<double, double>> streamline(const std::vector<double> &orient, int w,
                                                  int h, int x, int y, double th, int n) {
  std::vector<std::pair<double, double>> pts;
  double px = x, py = y, dx = std::cos(th), dy = std::sin(th);
  for (int k = 0; k < n; ++k) {
    px += dx;
    py += dy;
    const int ix = static_cast<int>(std::lround(px)), iy = static_cast<int>(std::lround(py));
    if (ix < 0 || iy < 0 || ix >= w || iy >= h)
      break;
    pts.emplace_back(px, py);
    const double t = orient[static_cast<std::size_t>(iy) * w + ix];
    double nx = std::cos(t), ny = std::sin(t);
    if (nx * dx + ny * dy < 0) {
      nx = -nx;
      ny = -ny;
    }
    dx = nx;
    dy = ny;
  }
  return pts;
}

// A pore sits inside a ridge, so the ridge must carry on past it both ways
// along the flow. A ridge ending fails this: beyond its tip lies valley.
bool inside_ridge(const GrayImage &ridges, const std::vector<double> &orient, int x, int y,
                  double period) {
  const int w = ridges.width(), h = ridges.height();
  const double th = orient[static_cast<std::size_t>(y) * w + x];
  const int reach = std::max(3, static_cast<int>(std::lround(0.8 * period)));
  for (double dir : {th, th + kPi}) {
    const auto path = streamline(orient, w, h, x, y, dir, reach);
    if (static_cast<int>(path.size()) < reach)
      continue; // runs off the raster; nothing to judge
    for (std::size_t k = path.size() / 2; k < path.size(); ++k) {
      const int ix = static_cast<int>(std::lround(path[k].first));
      const int iy = static_cast<int>(std::lround(path[k].second));
      if (ridges.at(ix, iy) <= 0.5)
        return false;
    }
  }
  return true;
}

// Removes the ridge/valley profile by subtracting a running median taken
// along the local ridge direction; pores are short bright interruptions of
// the ridge, so the median ignores them and they survive as isolated blobs.
GrayImage pore_residual(const GrayImage &norm, const BlockMap &map,
                        const std::vector<double> &freq, double background_c,
                        double fallback_period) {
  GrayImage out(norm.width(), norm.height(), norm.dpi(), 0.0);
  std::vector<double> line;
  const auto orient = map.orientation_field();
  for (int y = 0; y < norm.height(); ++y)
    for (int x = 0; x < norm.width(); ++x) {
      if (!map.foreground_at(x, y))
        continue;
      const double period = block_period(map, freq, x, y, fallback_period);
      const int half = std::max(2, static_cast<int>(std::lround(background_c * period)));
      const double th = orient[static_cast<std::size_t>(y) * norm.width() + x];
      line.clear();
      // Walk the flow both ways so the window stays on curved ridges, and
      // keep the two arms equally long: a one-sided window drifts across the
      // ridge flank at the raster edge and fakes a blob.
      const auto fwd = streamline(orient, norm.width(), norm.height(), x, y, th, half);
      const auto back = streamline(orient, norm.width(), norm.height(), x, y, th + kPi, half);
      const std::size_t reach = std::min(fwd.size(), back.size());
      if (reach < 2)
        continue;
      line.push_back(norm.at(x, y));
      for (std::size_t k = 0; k < reach; ++k) {
        line.push_back(norm.sample(fwd[k].first, fwd[k].second));
        line.push_back(norm.sample(back[k].first, back[k].second));
      }
      out.at(x, y) = norm.at(x, y) - median_of(line);
    }
  return out;
}

std::vector<double> isotropic_response(const GrayImage &residual, double sigma) {
  cv::Mat blurred, lap;
  cv::GaussianBlur(detail::as_mat(residual), blurred, cv::Size(0, 0), sigma,
                   sigma, cv::BORDER_REFLECT101);
  cv::Laplacian(blurred, lap, CV_64F, 1, 1.0, 0.0, cv::BORDER_REFLECT101);
  std::vector<double> resp(residual.size());
  for (int y = 0; y < residual.height(); ++y) {
    const double *row = lap.ptr<double>(y);
    for (int x = 0; x < residual.width(); ++x)
      resp[static_cast<std::size_t>(y) * residual.width() + x] =
          -sigma * sigma * row[x];
  }
  return resp;
}

// Response of the isotropic filter to a unit Gaussian blob of its own scale.
double isotropic_gain(double sigma, double dpi) {
  const int side = std::max(GrayImage::kMinSide,
                            2 * static_cast<int>(std::ceil(8 * sigma)) + 1);
  GrayImage blob(side, side, dpi, 0.0);
  const int c = side / 2;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      blob.at(x, y) = std::exp(-0.5 * ((x - c) * (x - c) + (y - c) * (y - c)) /
                               (sigma * sigma));
  return isotropic_response(blob, sigma)[static_cast<std::size_t>(c) * side + c];
}

struct PoreKernel {
  int radius = 0;
  std::vector<double> taps;
  double gain = 0; // response to a unit blob of the matched size
};

// Anisotropic difference of Gaussians elongated along the ridge.
PoreKernel make_pore_kernel(double theta, double scale) {
  const double su = scale, sv = 0.8 * scale;
  PoreKernel k;
  k.radius = static_cast<int>(std::ceil(3.0 * 1.6 * su));
  const int side = 2 * k.radius + 1;
  std::vector<double> inner(static_cast<std::size_t>(side * side)),
      outer(inner.size());
  const double ct = std::cos(theta), st = std::sin(theta);
  double si = 0, so = 0;
  for (int dy = -k.radius; dy <= k.radius; ++dy)
    for (int dx = -k.radius; dx <= k.radius; ++dx) {
      const double u = dx * ct + dy * st, v = -dx * st + dy * ct;
      const auto i =
          static_cast<std::size_t>((dy + k.radius) * side + dx + k.radius);
      inner[i] = std::exp(-0.5 * (u * u / (su * su) + v * v / (sv * sv)));
      outer[i] = std::exp(-0.5 * (u * u / (2.56 * su * su) +
                                  v * v / (2.56 * sv * sv)));
      si += inner[i];
      so += outer[i];
    }
  k.taps.resize(inner.size());
  for (std::size_t i = 0; i < inner.size(); ++i)
    k.taps[i] = inner[i] / si - outer[i] / so;
  for (int dy = -k.radius; dy <= k.radius; ++dy)
    for (int dx = -k.radius; dx <= k.radius; ++dx)
      k.gain += k.taps[static_cast<std::size_t>((dy + k.radius) * side + dx +
                                                k.radius)] *
                std::exp(-0.5 * (dx * dx + dy * dy) / (scale * scale));
  return k;
}

bool local_max(const std::vector<double> &resp, const std::vector<bool> &valid,
               int w, int h, int x, int y) {
  const double v = resp[static_cast<std::size_t>(y) * w + x];
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (!dx && !dy)
        continue;
      const int nx = x + dx, ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= w || ny >= h)
        continue;
      const auto j = static_cast<std::size_t>(ny) * w + nx;
      if (!valid[j])
        continue;
      // Ties resolve toward the earlier pixel in scan order.
      if (resp[j] > v || (resp[j] == v && (ny < y || (ny == y && nx < x))))
        return false;
    }
  return true;
}

std::vector<Pore> suppress(std::vector<Pore> cands, double radius) {
  std::sort(cands.begin(), cands.end(), [](const Pore &a, const Pore &b) {
    if (a.strength != b.strength)
      return a.strength > b.strength;
    if (a.y != b.y)
      return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<Pore> kept;
  for (const auto &c : cands) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const Pore &k) {
      return std::hypot(k.x - c.x, k.y - c.y) < radius;
    });
    if (!clash)
      kept.push_back(c);
  }
  return kept;
}

PoreSet isotropic_impl(const GrayImage &norm, const BlockMap &map,
                       const GrayImage &ridges, const PoreParams &p) {
  PoreSet out;
  out.method = PoreMethod::isotropic;
  out.width = norm.width();
  out.height = norm.height();
  if (map.foreground_count() == 0)
    return out;
  const double dpi = norm.dpi();
  const auto freq = map.filled_frequency();
  const GrayImage residual =
      pore_residual(norm, map, freq, p.background_c, at_dpi(10.0, dpi));
  const double sigma = at_dpi(p.sigma_iso, dpi);
  const auto resp = isotropic_response(residual, sigma);
  const double threshold =
      std::max(p.min_contrast * isotropic_gain(sigma, dpi),
               p.noise_k * valley_noise(resp, ridges, map));

  const auto local = local_valley_noise(resp, ridges, map);

  std::vector<bool> valid(resp.size());
  for (std::size_t i = 0; i < resp.size(); ++i)
    valid[i] = ridges.pixels()[i] > 0.5;
  std::vector<Pore> cands;
  for (int y = 0; y < norm.height(); ++y)
    for (int x = 0; x < norm.width(); ++x) {
      const auto i = static_cast<std::size_t>(y) * norm.width() + x;
      const double thr =
          std::max(threshold, p.noise_k * local[map.index(map.col_of(x), map.row_of(y))]);
      if (valid[i] && resp[i] > thr &&
          local_max(resp, valid, norm.width(), norm.height(), x, y))
        cands.push_back({x, y, resp[i]});
    }
  const auto orient = map.orientation_field();
  std::erase_if(cands, [&](const Pore &c) {
    return !inside_ridge(ridges, orient, c.x, c.y,
                         block_period(map, freq, c.x, c.y, at_dpi(10.0, dpi)));
  });
  out.pores = suppress(std::move(cands), at_dpi(p.nms_radius, dpi));
  return out;
}

PoreSet adaptive_impl(const GrayImage &norm, const BlockMap &map,
                      const GrayImage &ridges, const PoreParams &p) {
  PoreSet out;
  out.method = PoreMethod::adaptive;
  out.width = norm.width();
  out.height = norm.height();
  if (map.foreground_count() == 0)
    return out;
  const double dpi = norm.dpi();
  const auto freq = map.filled_frequency();
  const double fallback = at_dpi(10.0, dpi);
  const GrayImage residual =
      pore_residual(norm, map, freq, p.background_c, fallback);

  constexpr int kAngleBins = 16;
  std::map<std::pair<int, int>, PoreKernel> bank;
  const int w = norm.width(), h = norm.height();
  std::vector<double> resp(norm.size(), 0.0);
  std::vector<double> gain(norm.size(), 0.0);
  std::vector<bool> valid(norm.size(), false);
  int pad = -1;
  cv::Mat padded;
  const auto orient = map.orientation_field();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      if (!map.foreground_at(x, y))
        continue;
      const double period = block_period(map, freq, x, y, fallback);
      const double th = orient[i];
      const int abin =
          static_cast<int>(std::lround(th / kPi * kAngleBins)) % kAngleBins;
      const int pkey = static_cast<int>(std::lround(2.0 * period));
      auto it = bank.find({abin, pkey});
      if (it == bank.end())
        it = bank.emplace(std::pair{abin, pkey},
                          make_pore_kernel(abin * kPi / kAngleBins,
                                           p.adaptive_c * 0.5 * pkey))
                 .first;
      const PoreKernel &k = it->second;
      if (k.radius > pad) {
        pad = k.radius + 8;
        cv::copyMakeBorder(detail::as_mat(residual), padded, pad, pad, pad,
                           pad, cv::BORDER_REPLICATE);
      }
      const int side = 2 * k.radius + 1;
      double acc = 0;
      for (int dy = -k.radius; dy <= k.radius; ++dy) {
        const double *tap =
            k.taps.data() + static_cast<std::size_t>(dy + k.radius) * side;
        const double *row = padded.ptr<double>(y + dy + pad) + x + pad - k.radius;
        acc += detail::dot(tap, row, side);
      }
      resp[i] = acc;
      gain[i] = k.gain;
      valid[i] = ridges.pixels()[i] > 0.5;
    }

  const double noise = p.noise_k * valley_noise(resp, ridges, map);
  const auto local = local_valley_noise(resp, ridges, map);
  // Per-block adaptive threshold over every foreground response.
  std::vector<double> block_thr(map.foreground.size(), 0.0);
  for (int r = 0; r < map.rows; ++r)
    for (int c = 0; c < map.cols; ++c) {
      double sum = 0, sq = 0;
      std::size_t n = 0;
      for (int y = r * map.block_size; y < std::min(h, (r + 1) * map.block_size); ++y)
        for (int x = c * map.block_size; x < std::min(w, (c + 1) * map.block_size); ++x) {
          const auto i = static_cast<std::size_t>(y) * w + x;
          if (!map.foreground_at(x, y))
            continue;
          sum += resp[i];
          sq += resp[i] * resp[i];
          ++n;
        }
      if (n == 0)
        continue;
      const double mean = sum / static_cast<double>(n);
      const double sd =
          std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
      block_thr[map.index(c, r)] = mean + p.block_k * sd;
    }

  std::vector<Pore> cands;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      if (!valid[i])
        continue;
      const double thr =
          std::max({block_thr[map.index(map.col_of(x), map.row_of(y))], noise,
                    p.noise_k * local[map.index(map.col_of(x), map.row_of(y))],
                    p.min_contrast * gain[i]});
      if (resp[i] > thr && local_max(resp, valid, w, h, x, y))
        cands.push_back({x, y, resp[i]});
    }
  std::erase_if(cands, [&](const Pore &c) {
    return !inside_ridge(ridges, orient, c.x, c.y, block_period(map, freq, c.x, c.y, fallback));
  });
  out.pores = suppress(std::move(cands), at_dpi(p.nms_radius, dpi));
  return out;
}

struct Prepared {
  GrayImage norm;
  GrayImage ridges;
};

Prepared prepare(const GrayImage &img, const BlockMap &map) {
  Prepared p{normalize(img), {}};
  p.ridges = binarize(enhance(p.norm, map), map);
  return p;
}

} // namespace

std::string_view to_string(PoreMethod m) {
  return m == PoreMethod::isotropic ? "isotropic" : "adaptive";
}

PoreSet extract_pores_isotropic(const GrayImage &img, const BlockMap &map,
                                const PoreParams &params) {
  const Prepared p = prepare(img, map);
  return isotropic_impl(p.norm, map, p.ridges, params);
}

PoreSet extract_pores_adaptive(const GrayImage &img, const BlockMap &map,
                               const PoreParams &params) {
  const Prepared p = prepare(img, map);
  return adaptive_impl(p.norm, map, p.ridges, params);
}

PoreSet extract_pores(const Preprocessed &pre, PoreMethod method,
                      const PoreParams &params) {
  return method == PoreMethod::isotropic
             ? isotropic_impl(pre.normalized, pre.map, pre.binary, params)
             : adaptive_impl(pre.normalized, pre.map, pre.binary, params);
}

MatchScore match_pores(const PoreSet &query, const PoreSet &reference,
                       const AlignmentParams &align, double box_half) {
  MatchScore score;
  score.aligned = align;
  if (query.pores.empty() || reference.pores.empty())
    return score;
  const RigidTransform tf(align, query.width, query.height);
  std::vector<Point2> moved;
  moved.reserve(query.pores.size());
  for (const auto &q : query.pores)
    moved.push_back(tf.apply(q.x, q.y));

  struct Pair {
    double cheb, eucl;
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < moved.size(); ++i)
    for (std::size_t j = 0; j < reference.pores.size(); ++j) {
      const double dx = std::abs(reference.pores[j].x - moved[i].x);
      const double dy = std::abs(reference.pores[j].y - moved[i].y);
      if (dx <= box_half && dy <= box_half)
        pairs.push_back({std::max(dx, dy), std::hypot(dx, dy), i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair &a, const Pair &b) {
    if (a.cheb != b.cheb)
      return a.cheb < b.cheb;
    if (a.eucl != b.eucl)
      return a.eucl < b.eucl;
    if (a.i != b.i)
      return a.i < b.i;
    return a.j < b.j;
  });
  std::vector<std::uint8_t> used_q(moved.size(), 0),
      used_r(reference.pores.size(), 0);
  for (const auto &pr : pairs) {
    if (used_q[pr.i] || used_r[pr.j])
      continue;
    used_q[pr.i] = used_r[pr.j] = 1;
    ++score.matched_count;
  }
  score.value = static_cast<double>(score.matched_count) /
                static_cast<double>(
                    std::min(query.pores.size(), reference.pores.size()));
  return score;
}

MatchScore best_pore_score(const std::vector<MatchScore> &ridge_candidates,
                           const PoreSet &query, const PoreSet &reference,
                           double box_half) {
  MatchScore best;
  double best_combined = -1;
  for (const auto &ridge : ridge_candidates) {
    const MatchScore pore = match_pores(query, reference, ridge.aligned, box_half);
    if (ridge.value + pore.value > best_combined) {
      best_combined = ridge.value + pore.value;
      best = pore;
    }
  }
  return best;
}

MatchScore compare_pores(const RidgeFeature &query_ridges,
                         const PoreSet &query_pores,
                         const RidgeFeature &reference_ridges,
                         const PoreSet &reference_pores, double box_half,
                         const CompareParams &params, double dpi) {
  return best_pore_score(
      score_candidates(query_ridges, reference_ridges, params, dpi),
      query_pores, reference_pores, box_half);
}

MatchScore compare_pores(const GrayImage &query, const GrayImage &reference,
                         PoreMethod method, double box_half) {
  const Preprocessed pq = preprocess(query);
  const Preprocessed pr = preprocess(reference);
  const RidgeFeature rq = ridge_feature_from_skeleton(thin(pq.binary));
  const RidgeFeature rr = ridge_feature_from_skeleton(thin(pr.binary));
  return compare_pores(rq, extract_pores(pq, method), rr,
                       extract_pores(pr, method), at_dpi(box_half, query.dpi()),
                       {}, query.dpi());
}

void write_pores(std::ostream &out, const PoreSet &set) {
  out << "PORES v1 " << to_string(set.method) << ' ' << set.width << ' '
      << set.height << '\n';
  for (const auto &p : set.pores)
    out << p.x << ' ' << p.y << ' ' << text::num(p.strength) << '\n';
}

PoreSet read_pores(std::istream &in) {
  std::istringstream fields;
  std::string tag, ver, method, w, h;
  if (!text::next_fields(in, fields) ||
      !(fields >> tag >> ver >> method >> w >> h) || tag != "PORES" ||
      ver != "v1")
    throw ParseError("missing 'PORES v1 <method> <width> <height>' header");
  PoreSet set;
  if (method == "isotropic")
    set.method = PoreMethod::isotropic;
  else if (method == "adaptive")
    set.method = PoreMethod::adaptive;
  else
    throw ParseError("unknown pore method '" + method + "'");
  set.width = static_cast<int>(text::parse_int(w, "width"));
  set.height = static_cast<int>(text::parse_int(h, "height"));
  while (text::next_fields(in, fields)) {
    std::string xs, ys, ss;
    if (!(fields >> xs >> ys >> ss))
      throw ParseError("truncated pore record");
    set.pores.push_back({static_cast<int>(text::parse_int(xs, "x")),
                         static_cast<int>(text::parse_int(ys, "y")),
                         text::parse_double(ss, "strength")});
  }
  return set;
}

} // namespace fp
