#include "fshapes/atlas.hpp"

#include "fshapes/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fshapes {

NormalizationConstants NormalizationConstants::from_subjects(const std::vector<Subject>& subjects) {
  if (subjects.empty()) throw ValidationError("normalization needs at least one subject");
  double re = 0.0, rf = 0.0;
  for (const auto& s : subjects) {
    const Points& x = s.mesh.vertices;
    const Points centered = x.rowwise() - x.colwise().mean();
    re = std::max(re, std::sqrt(centered.squaredNorm() / static_cast<double>(x.rows())));
    const Signal& f = s.mesh.signal;
    rf = std::max(rf, std::sqrt((f.array() - f.mean()).square().mean()));
  }
  if (!(re > 0.0)) throw ValidationError("subjects have zero spatial extent");
  NormalizationConstants c;
  c.R_e = re;
  c.R_f = rf > 0.0 ? rf : 1.0;
  return c;
}

double NormalizationConstants::attachment_factor(int d) const { return std::pow(R_e, -2.0 * d); }
double NormalizationConstants::deformation_factor() const { return std::pow(R_e, -2.0); }
double NormalizationConstants::signal_factor(int d) const { return std::pow(R_e, -static_cast<double>(d)) / (R_f * R_f); }

AtlasWeights normalize(const AtlasWeights& w, const NormalizationConstants& c, int d) {
  AtlasWeights out = w;
  out.gamma_V0 *= c.deformation_factor();
  out.gamma_V *= c.deformation_factor();
  out.gamma_f0 *= c.signal_factor(d);
  out.gamma_f *= c.signal_factor(d);
  out.gamma_W *= c.attachment_factor(d);
  return out;
}

EnergyBreakdown normalize(const EnergyBreakdown& e, const NormalizationConstants& c, int d) {
  return EnergyBreakdown::make(e.geometric * c.deformation_factor(), e.functional * c.signal_factor(d),
                               e.attachment * c.attachment_factor(d));
}

void normalize(AtlasGradient& g, AtlasVariant variant, const NormalizationConstants& c, Index P) {
  const double count = static_cast<double>(P);
  const double position = c.R_e * c.R_e * count;
  const double momentum = c.R_e * c.R_e / count;
  const double signal = c.R_f * c.R_f * count;
  g.geometry *= variant == AtlasVariant::Hypertemplate ? momentum : position;
  g.template_signal *= signal;
  for (auto& p : g.momenta) p *= momentum;
  for (auto& z : g.residuals) z *= signal;
}

}  // namespace fshapes
