#include "fp/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <opencv2/imgproc.hpp>

#include "detail/cv_bridge.hpp"
#include "detail/dot.hpp"

namespace fp {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_pi(double a) {
  a = std::fmod(a, kPi);
  if (a < 0)
    a += kPi;
  if (a >= kPi)
    a -= kPi;
  return a;
}

struct Extent {
  int x0, y0, x1, y1; // half-open
  double cx() const { return 0.5 * (x0 + x1 - 1); }
  double cy() const { return 0.5 * (y0 + y1 - 1); }
};

Extent block_extent(const BlockMap &m, int c, int r) {
  return {c * m.block_size, r * m.block_size,
          std::min(m.width, (c + 1) * m.block_size),
          std::min(m.height, (r + 1) * m.block_size)};
}

// Average peak spacing of the x-signature taken across the ridges.
double signature_period(const GrayImage &img, double cx, double cy,
                        double theta, int block_size) {
  const int len = 2 * block_size;
  const int wid = block_size;
  const double tx = std::cos(theta), ty = std::sin(theta);
  const double nx = -ty, ny = tx;

  std::vector<double> sig(static_cast<std::size_t>(len), 0.0);
  std::vector<bool> valid(static_cast<std::size_t>(len), false);
  for (int k = 0; k < len; ++k) {
    const double s = k - 0.5 * len + 0.5;
    double acc = 0;
    int cnt = 0;
    for (int d = 0; d < wid; ++d) {
      const double dd = d - 0.5 * wid + 0.5;
      const double x = cx + s * nx + dd * tx;
      const double y = cy + s * ny + dd * ty;
      if (x < 0 || y < 0 || x > img.width() - 1 || y > img.height() - 1)
        continue;
      acc += img.sample(x, y);
      ++cnt;
    }
    if (cnt >= wid / 2) {
      sig[k] = acc / cnt;
      valid[k] = true;
    }
  }

  std::vector<double> sm(sig);
  for (int k = 1; k + 1 < len; ++k)
    if (valid[k - 1] && valid[k] && valid[k + 1])
      sm[k] = 0.25 * sig[k - 1] + 0.5 * sig[k] + 0.25 * sig[k + 1];

  double lo = 1e300, hi = -1e300;
  for (int k = 0; k < len; ++k)
    if (valid[k]) {
      lo = std::min(lo, sm[k]);
      hi = std::max(hi, sm[k]);
    }
  if (!(hi > lo))
    return 0.0;
  const double prominence = 0.1 * (hi - lo);

  std::vector<double> peaks;
  for (int k = 1; k + 1 < len; ++k) {
    if (!valid[k - 1] || !valid[k] || !valid[k + 1])
      continue;
    if (sm[k] > sm[k - 1] && sm[k] >= sm[k + 1] &&
        sm[k] - lo > prominence) {
      const double denom = sm[k - 1] - 2 * sm[k] + sm[k + 1];
      const double off =
          denom < 0 ? 0.5 * (sm[k - 1] - sm[k + 1]) / denom : 0.0;
      peaks.push_back(k + std::clamp(off, -0.5, 0.5));
    }
  }
  if (peaks.size() < 2)
    return 0.0;
  return (peaks.back() - peaks.front()) /
         static_cast<double>(peaks.size() - 1);
}

std::vector<std::uint8_t> close_mask(const std::vector<std::uint8_t> &mask,
                                     int cols, int rows) {
  auto get = [&](const std::vector<std::uint8_t> &m, int c, int r,
                 std::uint8_t outside) -> std::uint8_t {
    if (c < 0 || r < 0 || c >= cols || r >= rows)
      return outside;
    return m[static_cast<std::size_t>(r * cols + c)];
  };
  std::vector<std::uint8_t> dil(mask.size(), 0), ero(mask.size(), 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::uint8_t v = 0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          v |= get(mask, c + dc, r + dr, 0);
      dil[static_cast<std::size_t>(r * cols + c)] = v;
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::uint8_t v = 1;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          v &= get(dil, c + dc, r + dr, 1);
      ero[static_cast<std::size_t>(r * cols + c)] = v;
    }
  return ero;
}

double foreground_stddev(const GrayImage &img, const BlockMap &map,
                         const std::vector<double> &values) {
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (!map.foreground_at(x, y))
        continue;
      const double v = values[static_cast<std::size_t>(y) * img.width() + x];
      sum += v;
      sq += v * v;
      ++n;
    }
  if (n == 0)
    return 0.0;
  const double mean = sum / static_cast<double>(n);
  return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
}

struct GaborKernel {
  int radius = 0;
  std::vector<double> taps; // (2r+1)^2, row-major
};

GaborKernel make_gabor(double theta, double period) {
  const double sa = 0.6 * period;
  const double sc = 0.45 * period;
  GaborKernel k;
  k.radius = static_cast<int>(std::ceil(2.5 * std::max(sa, sc)));
  const int side = 2 * k.radius + 1;
  k.taps.assign(static_cast<std::size_t>(side * side), 0.0);
  std::vector<double> env(k.taps.size());
  std::vector<double> carrier(k.taps.size());
  const double ct = std::cos(theta), st = std::sin(theta);
  double sum_g = 0, sum_env = 0;
  for (int dy = -k.radius; dy <= k.radius; ++dy)
    for (int dx = -k.radius; dx <= k.radius; ++dx) {
      const double u = dx * ct + dy * st;
      const double v = -dx * st + dy * ct;
      const auto i = static_cast<std::size_t>((dy + k.radius) * side +
                                              dx + k.radius);
      env[i] = std::exp(-0.5 * (u * u / (sa * sa) + v * v / (sc * sc)));
      carrier[i] = std::cos(2 * kPi * v / period);
      k.taps[i] = env[i] * carrier[i];
      sum_g += k.taps[i];
      sum_env += env[i];
    }
  const double dc = sum_g / sum_env;
  double gain = 0;
  for (std::size_t i = 0; i < k.taps.size(); ++i) {
    k.taps[i] -= dc * env[i];
    gain += k.taps[i] * carrier[i];
  }
  for (auto &t : k.taps)
    t /= gain;
  return k;
}

} // namespace

GrayImage::GrayImage(int width, int height, double dpi, double fill)
    : width_(width), height_(height), dpi_(dpi) {
  if (width < kMinSide || height < kMinSide)
    throw std::invalid_argument("image sides must be at least 32 px");
  if (!(dpi > 0))
    throw std::invalid_argument("dpi must be positive");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

double GrayImage::sample(double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = std::min(static_cast<int>(x), width_ - 2);
  const int y0 = std::min(static_cast<int>(y), height_ - 2);
  const double fx = x - x0, fy = y - y0;
  const double a = at(x0, y0), b = at(x0 + 1, y0);
  const double c = at(x0, y0 + 1), d = at(x0 + 1, y0 + 1);
  return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

bool GrayImage::in_range() const {
  return std::all_of(pixels_.begin(), pixels_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

namespace {

// Doubled-angle bilinear interpolation between block centres; background
// blocks carry almost no weight. trig(i) returns {cos 2t, sin 2t} of block i.
template <typename Trig>
double interpolate_orientation(const BlockMap &m, Trig trig, double x,
                               double y) {
  const double gx = (x - 0.5 * m.block_size) / m.block_size;
  const double gy = (y - 0.5 * m.block_size) / m.block_size;
  const int c0 = static_cast<int>(std::floor(gx));
  const int r0 = static_cast<int>(std::floor(gy));
  const double fx = gx - c0, fy = gy - r0;
  double vc = 0, vs = 0;
  for (int dr = 0; dr <= 1; ++dr)
    for (int dc = 0; dc <= 1; ++dc) {
      const int c = std::clamp(c0 + dc, 0, m.cols - 1);
      const int r = std::clamp(r0 + dr, 0, m.rows - 1);
      const auto i = m.index(c, r);
      const double w = (dc ? fx : 1 - fx) * (dr ? fy : 1 - fy) *
                       (m.foreground[i] ? 1.0 : 1e-3);
      const auto [c2, s2] = trig(i);
      vc += w * c2;
      vs += w * s2;
    }
  return wrap_pi(0.5 * std::atan2(vs, vc));
}

} // namespace

double BlockMap::orientation_at(double x, double y) const {
  return interpolate_orientation(
      *this,
      [this](std::size_t i) {
        return std::pair{std::cos(2 * orientation[i]), std::sin(2 * orientation[i])};
      },
      x, y);
}

std::vector<double> BlockMap::orientation_field() const {
  std::vector<double> c2(orientation.size()), s2(orientation.size());
  for (std::size_t i = 0; i < orientation.size(); ++i) {
    c2[i] = std::cos(2 * orientation[i]);
    s2[i] = std::sin(2 * orientation[i]);
  }
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out[static_cast<std::size_t>(y) * width + x] = interpolate_orientation(
          *this, [&](std::size_t i) { return std::pair{c2[i], s2[i]}; }, x, y);
  return out;
}

std::vector<double> BlockMap::filled_frequency() const {
  std::vector<double> f = frequency;
  std::vector<double> valid;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (foreground[i] && f[i] > 0)
      valid.push_back(f[i]);
  if (valid.empty())
    return f;
  for (int pass = 0; pass < cols + rows; ++pass) {
    bool missing = false;
    std::vector<double> next = f;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const auto i = index(c, r);
        if (!foreground[i] || f[i] > 0)
          continue;
        double acc = 0;
        int n = 0;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int cc = c + dc, rr = r + dr;
            if (cc < 0 || rr < 0 || cc >= cols || rr >= rows)
              continue;
            const double v = f[index(cc, rr)];
            if (v > 0) {
              acc += v;
              ++n;
            }
          }
        if (n > 0)
          next[i] = acc / n;
        else
          missing = true;
      }
    f = std::move(next);
    if (!missing)
      break;
  }
  std::nth_element(valid.begin(), valid.begin() + valid.size() / 2,
                   valid.end());
  const double median = valid[valid.size() / 2];
  for (std::size_t i = 0; i < f.size(); ++i)
    if (foreground[i] && !(f[i] > 0))
      f[i] = median;
  return f;
}

std::size_t BlockMap::foreground_count() const {
  return static_cast<std::size_t>(
      std::count_if(foreground.begin(), foreground.end(),
                    [](std::uint8_t v) { return v != 0; }));
}

int default_block_size(double dpi) {
  return std::max(8, static_cast<int>(std::lround(16.0 * dpi / 600.0)));
}

GrayImage normalize(const GrayImage &img, double target_mean,
                    double target_var) {
  GrayImage out = img;
  const auto &px = img.pixels();
  const double n = static_cast<double>(px.size());
  double mean = 0;
  for (double v : px)
    mean += v;
  mean /= n;
  double var = 0;
  for (double v : px)
    var += (v - mean) * (v - mean);
  var /= n;
  auto &dst = out.pixels();
  // Rounding leaves a constant image with a variance of order 1e-33.
  if (var <= 1e-20) {
    std::fill(dst.begin(), dst.end(), std::clamp(target_mean, 0.0, 1.0));
    return out;
  }
  const double gain = std::sqrt(target_var / var);
  for (std::size_t i = 0; i < px.size(); ++i)
    dst[i] = std::clamp(target_mean + (px[i] - mean) * gain, 0.0, 1.0);
  return out;
}

BlockMap estimate_block_map(const GrayImage &img, int block_size) {
  if (block_size < 8 || block_size > std::min(img.width(), img.height()))
    throw std::invalid_argument("block size must lie in [8, min(width, height)]");

  BlockMap m;
  m.block_size = block_size;
  m.width = img.width();
  m.height = img.height();
  m.cols = (img.width() + block_size - 1) / block_size;
  m.rows = (img.height() + block_size - 1) / block_size;
  const auto nb = static_cast<std::size_t>(m.cols * m.rows);
  m.orientation.assign(nb, 0.0);
  m.coherence.assign(nb, 0.0);
  m.frequency.assign(nb, 0.0);
  m.foreground.assign(nb, 0);

  cv::Mat src = detail::as_mat(img), smooth, gx, gy;
  cv::GaussianBlur(src, smooth, cv::Size(0, 0), 1.0, 1.0,
                   cv::BORDER_REFLECT101);
  cv::Sobel(smooth, gx, CV_64F, 1, 0, 3, 1.0, 0.0, cv::BORDER_REFLECT101);
  cv::Sobel(smooth, gy, CV_64F, 0, 1, 3, 1.0, 0.0, cv::BORDER_REFLECT101);

  std::vector<double> sxx(nb), sxy(nb), s2(nb), var(nb);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const Extent e = block_extent(m, c, r);
      double a = 0, b = 0, d = 0, sum = 0, sq = 0;
      for (int y = e.y0; y < e.y1; ++y) {
        const double *px = gx.ptr<double>(y);
        const double *py = gy.ptr<double>(y);
        for (int x = e.x0; x < e.x1; ++x) {
          a += px[x] * px[x] - py[x] * py[x];
          b += 2 * px[x] * py[x];
          d += px[x] * px[x] + py[x] * py[x];
          const double v = img.at(x, y);
          sum += v;
          sq += v * v;
        }
      }
      const double n = static_cast<double>((e.x1 - e.x0) * (e.y1 - e.y0));
      const auto i = m.index(c, r);
      sxx[i] = a;
      sxy[i] = b;
      s2[i] = d;
      const double mean = sum / n;
      var[i] = std::max(0.0, sq / n - mean * mean);
    }

  // Segmentation: a block is foreground when its variance reaches 0.3 of a
  // typical textured block (80th percentile of non-degenerate blocks).
  std::vector<double> nonzero;
  for (double v : var)
    if (v > 1e-14)
      nonzero.push_back(v);
  std::vector<std::uint8_t> degenerate(nb, 0);
  for (std::size_t i = 0; i < nb; ++i)
    degenerate[i] = (var[i] <= 1e-14 || s2[i] <= 0) ? 1 : 0;
  if (!nonzero.empty()) {
    std::sort(nonzero.begin(), nonzero.end());
    const double ref =
        nonzero[std::min(nonzero.size() - 1,
                         static_cast<std::size_t>(0.8 * nonzero.size()))];
    for (std::size_t i = 0; i < nb; ++i)
      m.foreground[i] = (!degenerate[i] && var[i] >= 0.3 * ref) ? 1 : 0;
    m.foreground = close_mask(m.foreground, m.cols, m.rows);
    for (std::size_t i = 0; i < nb; ++i)
      if (degenerate[i])
        m.foreground[i] = 0;
  }

  // One pass of 3x3 vector averaging in the doubled-angle representation.
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const auto i = m.index(c, r);
      if (degenerate[i])
        continue;
      double a = 0, b = 0, d = 0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int cc = c + dc, rr = r + dr;
          if (cc < 0 || rr < 0 || cc >= m.cols || rr >= m.rows)
            continue;
          const auto j = m.index(cc, rr);
          if (degenerate[j] || m.foreground[j] != m.foreground[i])
            continue;
          a += sxx[j];
          b += sxy[j];
          d += s2[j];
        }
      m.orientation[i] = wrap_pi(0.5 * std::atan2(b, a) + 0.5 * kPi);
      m.coherence[i] = d > 0 ? std::clamp(std::hypot(a, b) / d, 0.0, 1.0) : 0.0;
    }

  const double min_period = at_dpi(4.0, img.dpi());
  const double max_period = at_dpi(40.0, img.dpi());
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const auto i = m.index(c, r);
      if (!m.foreground[i])
        continue;
      const Extent e = block_extent(m, c, r);
      const double period = signature_period(img, e.cx(), e.cy(),
                                             m.orientation[i], block_size);
      if (period >= min_period && period <= max_period)
        m.frequency[i] = 1.0 / period;
    }
  return m;
}

GrayImage enhance(const GrayImage &img, const BlockMap &map) {
  GrayImage out(img.width(), img.height(), img.dpi(), 0.5);
  if (map.foreground_count() == 0)
    return out;

  const std::vector<double> freq = map.filled_frequency();
  constexpr int kAngleBins = 36;
  auto period_key = [](double f) {
    return static_cast<int>(std::lround(2.0 / f)); // half-pixel steps
  };

  std::map<std::pair<int, int>, GaborKernel> bank;
  int max_radius = 0;
  std::vector<std::pair<int, int>> keys(img.size(), {-1, -1});
  const auto orient = map.orientation_field();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const auto bi = map.index(map.col_of(x), map.row_of(y));
      if (!map.foreground[bi] || !(freq[bi] > 0))
        continue;
      const double th = orient[static_cast<std::size_t>(y) * img.width() + x];
      const int abin =
          static_cast<int>(std::lround(th / kPi * kAngleBins)) % kAngleBins;
      const std::pair<int, int> key{abin, period_key(freq[bi])};
      auto it = bank.find(key);
      if (it == bank.end()) {
        it = bank.emplace(key, make_gabor(abin * kPi / kAngleBins,
                                          0.5 * key.second))
                 .first;
        max_radius = std::max(max_radius, it->second.radius);
      }
      keys[static_cast<std::size_t>(y) * img.width() + x] = key;
    }
  if (bank.empty())
    return out;

  cv::Mat padded;
  cv::copyMakeBorder(detail::as_mat(img), padded, max_radius, max_radius,
                     max_radius, max_radius, cv::BORDER_REFLECT101);

  std::vector<double> resp(img.size(), 0.0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const auto pi = static_cast<std::size_t>(y) * img.width() + x;
      if (keys[pi].first < 0)
        continue;
      const GaborKernel &k = bank.at(keys[pi]);
      const int side = 2 * k.radius + 1;
      double acc = 0;
      for (int dy = 0; dy < side; ++dy) {
        const double *row = padded.ptr<double>(y + max_radius - k.radius + dy) +
                            (x + max_radius - k.radius);
        acc += detail::dot(k.taps.data() + static_cast<std::size_t>(dy) * side,
                           row, side);
      }
      resp[pi] = acc;
    }

  const double s_resp = foreground_stddev(img, map, resp);
  const double s_in = foreground_stddev(img, map, img.pixels());
  const double gain = s_resp > 0 ? s_in / s_resp : 0.0;
  auto &dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i)
    if (keys[i].first >= 0)
      dst[i] = std::clamp(0.5 + gain * resp[i], 0.0, 1.0);
  return out;
}

GrayImage binarize(const GrayImage &img, const BlockMap &map) {
  GrayImage out(img.width(), img.height(), img.dpi(), 0.0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (map.foreground_at(x, y) && img.at(x, y) < 0.5)
        out.at(x, y) = 1.0;
  return out;
}

void clear_flat(GrayImage &binary, const GrayImage &normalized, const BlockMap &map) {
  const int side = 2 * static_cast<int>(std::lround(at_dpi(7.0, normalized.dpi()))) + 1;
  cv::Mat mean, sq;
  const cv::Mat src = detail::as_mat(normalized);
  cv::boxFilter(src, mean, CV_64F, cv::Size(side, side), cv::Point(-1, -1), true,
                cv::BORDER_REFLECT101);
  cv::boxFilter(src.mul(src), sq, CV_64F, cv::Size(side, side), cv::Point(-1, -1), true,
                cv::BORDER_REFLECT101);
  const int w = normalized.width(), h = normalized.height();
  std::vector<double> var(normalized.size(), 0.0), fg;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double m = mean.at<double>(y, x);
      const double v = std::max(0.0, sq.at<double>(y, x) - m * m);
      var[static_cast<std::size_t>(y) * w + x] = v;
      if (map.foreground_at(x, y))
        fg.push_back(v);
    }
  if (fg.empty())
    return;
  const auto k = fg.begin() + static_cast<std::ptrdiff_t>(0.8 * static_cast<double>(fg.size() - 1));
  std::nth_element(fg.begin(), k, fg.end());
  const double floor = 0.25 * *k;
  for (std::size_t i = 0; i < var.size(); ++i)
    if (var[i] < floor)
      binary.pixels()[i] = 0.0;
}

Preprocessed preprocess(const GrayImage &img) {
  Preprocessed p;
  p.normalized = normalize(img);
  p.map = estimate_block_map(p.normalized);
  p.enhanced = enhance(p.normalized, p.map);
  p.binary = binarize(p.enhanced, p.map);
  clear_flat(p.binary, p.normalized, p.map);
  return p;
}

} // namespace fp
