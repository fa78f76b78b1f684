#include "fp/finger_template.hpp"

#include <algorithm>

namespace fp {

namespace {

bool wants(const std::vector<Method> &methods, Method m) {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

} // namespace

FingerTemplate build_template(const GrayImage &img,
                              const std::vector<Method> &methods) {
  FingerTemplate t;
  t.dpi = img.dpi();
  const Preprocessed pre = preprocess(img);
  const GrayImage skeleton = thin(pre.binary);
  const bool pores =
      wants(methods, Method::pores_iso) || wants(methods, Method::pores_adapt);
  if (wants(methods, Method::ridges) || pores)
    t.ridges = ridge_feature_from_skeleton(skeleton);
  if (wants(methods, Method::minutiae))
    t.minutiae = extract_minutiae(skeleton, pre.map);
  if (wants(methods, Method::pores_iso))
    t.pores_iso = extract_pores(pre, PoreMethod::isotropic);
  if (wants(methods, Method::pores_adapt))
    t.pores_adapt = extract_pores(pre, PoreMethod::adaptive);
  return t;
}

std::array<std::optional<double>, 4>
compare_templates(const FingerTemplate &query, const FingerTemplate &reference,
                  const std::vector<Method> &methods, double box_half) {
  std::array<std::optional<double>, 4> out;
  auto slot = [&](Method m) -> std::optional<double> & {
    return out[static_cast<std::size_t>(m)];
  };
  const double dpi = query.dpi;
  if (wants(methods, Method::minutiae))
    slot(Method::minutiae) =
        compare_minutiae(query.minutiae, reference.minutiae, {}, dpi).value;

  const bool pores =
      wants(methods, Method::pores_iso) || wants(methods, Method::pores_adapt);
  if (!wants(methods, Method::ridges) && !pores)
    return out;
  const auto candidates = score_candidates(query.ridges, reference.ridges, {}, dpi);
  if (wants(methods, Method::ridges)) {
    double best = 0;
    for (const auto &c : candidates)
      best = std::max(best, c.value);
    slot(Method::ridges) = best;
  }
  const double box = at_dpi(box_half, dpi);
  if (wants(methods, Method::pores_iso))
    slot(Method::pores_iso) =
        best_pore_score(candidates, query.pores_iso, reference.pores_iso, box).value;
  if (wants(methods, Method::pores_adapt))
    slot(Method::pores_adapt) =
        best_pore_score(candidates, query.pores_adapt, reference.pores_adapt, box)
            .value;
  return out;
}

} // namespace fp
