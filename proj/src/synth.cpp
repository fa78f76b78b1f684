#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "detail/parallel.hpp"
#include "fp/corpus.hpp"
#include "fp/errors.hpp"

namespace fp {

namespace {

constexpr double kPi = std::numbers::pi;

std::mt19937_64 make_rng(std::uint64_t seed, int finger, int session,
                         int sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(finger),
                    static_cast<std::uint32_t>(session),
                    static_cast<std::uint32_t>(sample)};
  return std::mt19937_64(seq);
}

struct Wave {
  double kx, ky, phase, amp;
};

struct Vortex {
  double x, y, charge;
};

struct PlantedPore {
  double x, y;   // finger coordinates, on a crest
  double tx, ty; // unit ridge tangent
  double amp;
};

// Master ridge pattern of one finger in finger coordinates (origin at the
// centre of an unrotated, untranslated impression).
struct Finger {
  double period = 10;
  double cx = 0, cy = 0; // centre of the circular base pattern
  std::vector<Wave> waves;
  std::vector<Vortex> vortices;
  std::vector<PlantedPore> pores;

  double phase(double x, double y) const {
    double p = 2 * kPi / period * std::hypot(x - cx, y - cy);
    for (const auto &w : waves)
      p += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
    for (const auto &v : vortices)
      p += v.charge * std::atan2(y - v.y, x - v.x);
    return p;
  }

  void gradient(double x, double y, double &gx, double &gy) const {
    const double h = 0.25;
    gx = (phase(x + h, y) - phase(x - h, y)) / (2 * h);
    gy = (phase(x, y + h) - phase(x, y - h)) / (2 * h);
  }
};

Finger make_finger(const SynthSpec &spec, int finger) {
  auto rng = make_rng(spec.seed, finger, 0, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double side = std::max(spec.width, spec.height);
  Finger f;
  f.period = spec.ridge_period * (0.9 + 0.2 * u(rng));
  const double dist = side * (0.6 + u(rng));
  const double dir = 2 * kPi * u(rng);
  f.cx = dist * std::cos(dir);
  f.cy = dist * std::sin(dir);
  for (int i = 0; i < 2; ++i) {
    const double lambda = side * (0.8 + 0.8 * u(rng));
    const double a = 2 * kPi * u(rng);
    f.waves.push_back({2 * kPi / lambda * std::cos(a),
                       2 * kPi / lambda * std::sin(a), 2 * kPi * u(rng),
                       0.1 * lambda / f.period * u(rng)});
  }
  const int nv = 3 + static_cast<int>(u(rng) * 4);
  for (int i = 0; i < nv; ++i)
    f.vortices.push_back({(u(rng) - 0.5) * 0.6 * spec.width,
                          (u(rng) - 0.5) * 0.6 * spec.height,
                          u(rng) < 0.5 ? -1.0 : 1.0});

  if (spec.pore_density <= 0)
    return f;
  // Pores cover every position an impression can reach.
  const double reach = 0.5 * std::hypot(spec.width, spec.height) +
                       std::sqrt(2.0) * spec.translation_range +
                       spec.distortion + 2 * f.period;
  const double ridge_len = kPi * reach * reach / f.period;
  const auto target = static_cast<std::size_t>(
      std::lround(spec.pore_density * ridge_len / 1000.0));
  const double spacing = f.period;
  std::size_t attempts = 0;
  while (f.pores.size() < target && attempts++ < 20 * target) {
    const double r = reach * std::sqrt(u(rng)), a = 2 * kPi * u(rng);
    double x = r * std::cos(a), y = r * std::sin(a);
    double gx = 0, gy = 0;
    for (int it = 0; it < 4; ++it) {
      f.gradient(x, y, gx, gy);
      const double ph = f.phase(x, y);
      const double off = ph - 2 * kPi * std::round(ph / (2 * kPi));
      const double g2 = gx * gx + gy * gy;
      x -= off * gx / g2;
      y -= off * gy / g2;
    }
    const bool near_vortex =
        std::any_of(f.vortices.begin(), f.vortices.end(), [&](const Vortex &v) {
          return std::hypot(v.x - x, v.y - y) < 1.5 * f.period;
        });
    const bool crowded =
        std::any_of(f.pores.begin(), f.pores.end(), [&](const PlantedPore &p) {
          return std::hypot(p.x - x, p.y - y) < spacing;
        });
    if (near_vortex || crowded)
      continue;
    const double gn = std::hypot(gx, gy);
    f.pores.push_back({x, y, -gy / gn, gx / gn, 0.4 + 0.2 * u(rng)});
  }
  return f;
}

std::string finger_name(int finger, int n_fingers) {
  const int digits = std::max(3, static_cast<int>(std::to_string(n_fingers).size()));
  std::string s = std::to_string(finger);
  return "f" + std::string(static_cast<std::size_t>(digits) - s.size(), '0') + s;
}

} // namespace

void SynthSpec::validate() const {
  auto need = [](bool ok, const char *what) {
    if (!ok)
      throw std::invalid_argument(std::string("synthetic corpus: ") + what);
  };
  need(n_fingers >= 1, "n_fingers must be >= 1");
  need(samples_per_session >= 1, "samples_per_session must be >= 1");
  need(width >= GrayImage::kMinSide && height >= GrayImage::kMinSide,
       "image sides must be >= 32");
  need(ridge_period >= 4, "ridge_period must be >= 4");
  need(pore_density >= 0, "pore_density must be >= 0");
  need(jitter >= 0, "jitter must be >= 0");
  need(rotation_range >= 0 && rotation_range <= 180,
       "rotation_range must lie in [0, 180]");
  need(translation_range >= 0, "translation_range must be >= 0");
  need(noise >= 0, "noise must be >= 0");
  need(distortion >= 0, "distortion must be >= 0");
  need(pore_dropout >= 0 && pore_dropout < 1, "pore_dropout must lie in [0, 1)");
  need(crop > 0 && crop <= 1, "crop must lie in (0, 1]");
  need(dpi > 0, "dpi must be positive");
}

SynthSample render_sample(const SynthSpec &spec, int finger, int session,
                          int sample) {
  spec.validate();
  const Finger f = make_finger(spec, finger);
  auto rng = make_rng(spec.seed, finger, session, sample);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double rot = (2 * u(rng) - 1) * spec.rotation_range * kPi / 180;
  const double tx = (2 * u(rng) - 1) * spec.translation_range;
  const double ty = (2 * u(rng) - 1) * spec.translation_range;
  Wave warp[2];
  for (auto &w : warp) {
    const double lambda = 1.5 * std::max(spec.width, spec.height) * (0.8 + 0.4 * u(rng));
    const double a = 2 * kPi * u(rng);
    w = {2 * kPi / lambda * std::cos(a), 2 * kPi / lambda * std::sin(a),
         2 * kPi * u(rng), spec.distortion * u(rng)};
  }
  const double cw = (spec.width - 1) / 2.0, ch = (spec.height - 1) / 2.0;
  const double c = std::cos(rot), s = std::sin(rot);
  // Image pixel -> finger coordinates.
  auto to_finger = [&](double x, double y, double &fx, double &fy) {
    const double ux = x - cw, uy = y - ch;
    fx = c * ux - s * uy + tx + warp[0].amp * std::sin(warp[0].kx * x + warp[0].ky * y + warp[0].phase);
    fy = s * ux + c * uy + ty + warp[1].amp * std::sin(warp[1].kx * x + warp[1].ky * y + warp[1].phase);
  };

  // Kept window for cropped fragments.
  int x0 = 0, y0 = 0, x1 = spec.width, y1 = spec.height;
  if (spec.crop < 1) {
    const int kw = static_cast<int>(spec.width * (spec.crop + (1 - spec.crop) * u(rng)));
    const int kh = static_cast<int>(spec.height * (spec.crop + (1 - spec.crop) * u(rng)));
    x0 = static_cast<int>(u(rng) * (spec.width - kw));
    y0 = static_cast<int>(u(rng) * (spec.height - kh));
    x1 = x0 + kw;
    y1 = y0 + kh;
  }

  SynthSample out{GrayImage(spec.width, spec.height, spec.dpi, 0.0), {}, rot, tx, ty};
  GrayImage &img = out.image;
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      double fx = 0, fy = 0;
      to_finger(x, y, fx, fy);
      img.at(x, y) = 0.5 - 0.35 * std::cos(f.phase(fx, fy));
    }

  const double sigma = 0.25 * f.period;
  const int reach = static_cast<int>(std::ceil(3 * sigma));
  for (const auto &p : f.pores) {
    const bool dropped = u(rng) < spec.pore_dropout;
    const double shift = spec.jitter * gauss(rng);
    if (dropped)
      continue;
    const double qx = p.x + shift * p.tx, qy = p.y + shift * p.ty;
    // Invert the rigid part, then correct for the warp by fixed-point steps.
    double px = cw + c * (qx - tx) + s * (qy - ty);
    double py = ch - s * (qx - tx) + c * (qy - ty);
    for (int it = 0; it < 3; ++it) {
      double fx = 0, fy = 0;
      to_finger(px, py, fx, fy);
      const double ex = qx - fx, ey = qy - fy;
      px += c * ex + s * ey;
      py += -s * ex + c * ey;
    }
    if (px < x0 || py < y0 || px > x1 - 1 || py > y1 - 1)
      continue;
    out.pores.emplace_back(px, py);
    const int ix = static_cast<int>(std::lround(px)), iy = static_cast<int>(std::lround(py));
    for (int y = std::max(0, iy - reach); y <= std::min(spec.height - 1, iy + reach); ++y)
      for (int x = std::max(0, ix - reach); x <= std::min(spec.width - 1, ix + reach); ++x)
        img.at(x, y) += p.amp * std::exp(-0.5 * ((x - px) * (x - px) + (y - py) * (y - py)) /
                                         (sigma * sigma));
  }

  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      double &v = img.at(x, y);
      if (x < x0 || y < y0 || x >= x1 || y >= y1)
        v = 0.9;
      if (spec.noise > 0)
        v += spec.noise * gauss(rng);
      v = std::clamp(v, 0.0, 1.0);
    }
  return out;
}

CorpusIndex generate_synthetic(const SynthSpec &spec,
                               const std::filesystem::path &out, int jobs) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec)
    throw IoError("cannot create " + out.string() + ": " + ec.message());

  CorpusIndex index;
  index.dpi = spec.dpi;
  index.samples_per_session = spec.samples_per_session;
  for (int fi = 1; fi <= spec.n_fingers; ++fi)
    for (int session = 1; session <= 2; ++session)
      for (int sample = 1; sample <= spec.samples_per_session; ++sample) {
        CorpusEntry e{finger_name(fi, spec.n_fingers), session, sample, {}};
        e.image_path = out / (e.id() + ".pgm");
        index.entries.push_back(std::move(e));
      }

  detail::parallel_for(index.entries.size(), jobs, [&](std::size_t i) {
    const std::size_t per_finger = 2 * static_cast<std::size_t>(spec.samples_per_session);
    const auto &e = index.entries[i];
    write_pgm(e.image_path,
              render_sample(spec, static_cast<int>(i / per_finger) + 1,
                            e.session, e.sample)
                  .image);
  });
  return index;
}

} // namespace fp
