#include "stabsel/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "stabsel/errors.hpp"

namespace stabsel {

namespace {

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

constexpr double kInvSqrt2Pi = 0.39894228040143268;

// Quadrature for E_{u ~ N(0,1)}[f(u)] when f has boundary layers of width
// `delta` around the given centers (soft-threshold edges): composite
// Gauss-Legendre with panel edges aligned to the layers.  Gauss-Hermite
// converges slowly there because its nodes cannot resolve features narrower
// than its bulk spacing; panels pinned at the layer make every piece smooth
// at the panel scale.  Truncated at |u| <= 8 (normal tail mass ~ 1e-15).
struct PanelRule {
  std::vector<double> nodes, weights;
};

PanelRule layered_normal_rule(const std::vector<double>& centers, double delta) {
  constexpr double kCut = 8.0;
  static const GaussLegendre gl(16);
  const double d = std::max(delta, 1e-7);
  std::vector<double> edges{-kCut, kCut};
  for (double c : centers)
    for (double e : {c - 8 * d, c - 2.5 * d, c + 2.5 * d, c + 8 * d})
      if (std::abs(e) < kCut) edges.push_back(e);
  std::sort(edges.begin(), edges.end());
  std::vector<double> keep;
  keep.reserve(edges.size());
  for (double e : edges)
    if (keep.empty() || e - keep.back() > 1e-9) keep.push_back(e);

  PanelRule out;
  for (size_t i = 0; i + 1 < keep.size(); ++i) {
    const int parts = std::max(1, static_cast<int>(std::ceil(keep[i + 1] - keep[i])));
    const double width = (keep[i + 1] - keep[i]) / parts;
    for (int p = 0; p < parts; ++p) {
      const double mid = keep[i] + width * (p + 0.5), half = 0.5 * width;
      for (int k = 0; k < gl.order(); ++k) {
        const double u = mid + half * gl.nodes[k];
        out.nodes.push_back(u);
        out.weights.push_back(half * gl.weights[k] * kInvSqrt2Pi * std::exp(-0.5 * u * u));
      }
    }
  }
  return out;
}

// side-2 update for one (x or z) channel; chi = 0 with q = m = 0 is the
// all-dead start: the outgoing message pins the coordinate (same limit as the
// per-coordinate algorithm)
void match_side(SeSide& out, const SeSide& in, const SeQuad& mom, double T, const SeConfig& cfg,
                const char* what) {
  if (!std::isfinite(mom.q) || !std::isfinite(mom.chi) || !std::isfinite(mom.v) ||
      !std::isfinite(mom.m))
    throw numeric_error(std::string("se moment match: non-finite moments on ") + what);
  if (mom.chi < 0.0)
    throw numeric_error(std::string("se moment match: negative susceptibility on ") + what);
  if (mom.chi == 0.0) {
    if (mom.q != 0.0 || mom.m != 0.0)
      throw numeric_error(std::string("se moment match: zero susceptibility with nonzero mass on ") +
                          what);
    out.qhat = cfg.qhat_max;
    out.vhat = 0.0;
    out.mhat = -in.mhat;
    out.chihat = in.chihat;
    return;
  }
  const double c2 = mom.chi * mom.chi;
  out.qhat = clamp(1.0 / mom.chi - in.qhat, cfg.qhat_min, cfg.qhat_max);
  out.vhat = clamp(mom.v / c2 - in.vhat, 0.0, cfg.vhat_max);
  out.mhat = mom.m / (T * mom.chi) - in.mhat;
  out.chihat = clamp(mom.q / c2 - mom.m * mom.m / (T * c2) - in.chihat, 0.0, cfg.chihat_max);
}

}  // namespace

SpectralMeasure SpectralMeasure::Atoms(std::vector<std::pair<double, double>> atoms) {
  if (atoms.empty()) throw std::invalid_argument("SpectralMeasure: no atoms");
  double mass = 0.0;
  for (const auto& [lam, p] : atoms) {
    if (lam < 0.0) throw std::invalid_argument("SpectralMeasure: eigenvalues must be >= 0");
    if (!(p > 0.0)) throw std::invalid_argument("SpectralMeasure: masses must be > 0");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-12)
    throw std::invalid_argument("SpectralMeasure: masses must sum to 1");
  SpectralMeasure out;
  out.atoms = std::move(atoms);
  return out;
}

SpectralMeasure SpectralMeasure::Empirical(const Eigen::VectorXd& eigenvalues) {
  if (eigenvalues.size() == 0) throw std::invalid_argument("SpectralMeasure: empty sample");
  SpectralMeasure out;
  const double p = 1.0 / eigenvalues.size();
  out.atoms.reserve(eigenvalues.size());
  for (int i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues[i] < -1e-12)
      throw std::invalid_argument("SpectralMeasure: negative eigenvalue in sample");
    out.atoms.emplace_back(std::max(0.0, eigenvalues[i]), p);
  }
  return out;
}

double SpectralMeasure::mean_lambda() const {
  return expect([](double lam) { return lam; });
}

SpectralMeasure row_orthogonal_spectrum(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("row_orthogonal_spectrum: alpha must be in (0,1]");
  if (alpha == 1.0) return SpectralMeasure::Atoms({{1.0, 1.0}});
  return SpectralMeasure::Atoms({{1.0, alpha}, {0.0, 1.0 - alpha}});
}

TeacherModel TeacherModel::Make(double rho, const Likelihood& channel, double alpha,
                                const SpectralMeasure& spectrum) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("TeacherModel: rho must be in (0,1]");
  if (!(alpha > 0.0)) throw std::invalid_argument("TeacherModel: alpha must be > 0");
  const double el = spectrum.mean_lambda();
  if (!(el > 0.0)) throw std::domain_error("TeacherModel: spectrum has zero mean eigenvalue");
  TeacherModel t;
  t.rho = rho;
  t.channel = channel;
  t.alpha = alpha;
  t.T_x = 1.0;  // Bernoulli-Gaussian with slab variance 1/rho
  t.T_z = el * t.T_x / alpha;
  t.Tz_hat = 1.0 / t.T_z;
  return t;
}

void SeConfig::validate() const {
  if (!(eps_tol > 0.0)) throw std::invalid_argument("SeConfig: eps_tol must be > 0");
  if (t_max < 1) throw std::invalid_argument("SeConfig: t_max must be >= 1");
  if (!(damping > 0.0 && damping <= 1.0))
    throw std::invalid_argument("SeConfig: damping must be in (0,1]");
  if (quad_order < 1 || outer_order < 1)
    throw std::invalid_argument("SeConfig: quadrature orders must be >= 1");
  if (!(vhat_init >= 0.0)) throw std::invalid_argument("SeConfig: vhat_init must be >= 0");
}

SeQuad se_factorized_x(const SeSide& x1, const TeacherModel& teacher, const PenaltyLaw& law,
                       const GaussHermite& outer) {
  const double sf = std::sqrt(std::max(0.0, x1.chihat));
  const double sv = std::sqrt(std::max(0.0, x1.vhat));
  SeQuad out;
  // the eta-averaged moments vary on the scale sqrt(vhat) around the
  // soft-threshold edges |field| = gamma; when that scale is comparable to
  // the integration noise the plain Hermite rule is fine, otherwise switch to
  // panels pinned at the edges
  auto field_centers = [&](double shift, double scale) {
    std::vector<double> centers;
    for (const auto& [g, p] : law.atoms())
      if (g > 0.0) {
        centers.push_back((g - shift) / scale);
        centers.push_back((-g - shift) / scale);
      }
    return centers;
  };
  // accumulate over the field noise xi at a fixed teacher value x0
  auto accumulate = [&](double x0, double mass) {
    auto eval = [&](double xi, double w) {
      const XMoments m = avg_x_moments(x1.mhat * x0 + sf * xi, x1.qhat, x1.vhat, law);
      out.q += w * m.mean * m.mean;
      out.chi += w * m.susceptibility;
      out.v += w * m.variance;
      out.m += w * x0 * m.mean;
    };
    if (sf == 0.0) {
      eval(0.0, mass);
    } else if (sv > sf) {
      for (int k = 0; k < outer.order(); ++k) eval(outer.nodes[k], mass * outer.weights[k]);
    } else {
      const PanelRule rule = layered_normal_rule(field_centers(x1.mhat * x0, sf), sv / sf);
      for (size_t k = 0; k < rule.nodes.size(); ++k) eval(rule.nodes[k], mass * rule.weights[k]);
    }
  };
  // point mass at 0 and the Gaussian slab of variance 1/rho
  if (teacher.rho < 1.0) accumulate(0.0, 1.0 - teacher.rho);
  const double slab_sd = 1.0 / std::sqrt(teacher.rho);
  // after the xi average the slab integrand varies on the combined scale
  // sqrt(chihat + vhat) around |mhat x0| = gamma
  const double comb = std::sqrt(x1.chihat + x1.vhat);
  const double m_sd = std::abs(x1.mhat) * slab_sd;
  if (x1.mhat == 0.0 || comb > m_sd) {
    for (int j = 0; j < outer.order(); ++j)
      accumulate(slab_sd * outer.nodes[j], teacher.rho * outer.weights[j]);
  } else {
    const PanelRule rule =
        layered_normal_rule(field_centers(0.0, x1.mhat * slab_sd), comb / m_sd);
    for (size_t j = 0; j < rule.nodes.size(); ++j)
      accumulate(slab_sd * rule.nodes[j], teacher.rho * rule.weights[j]);
  }
  return out;
}

SeQuad se_factorized_z(const SeSide& z1, const TeacherModel& teacher, const OccupationLaw& occ,
                       const Likelihood& fit, const GaussHermite& inner,
                       const GaussHermite& outer) {
  const double sf = std::sqrt(std::max(0.0, z1.chihat));
  const double sz = std::sqrt(teacher.T_z);
  SeQuad out;
  auto accumulate_y = [&](double z0, double y, double mass) {
    auto eval = [&](double xi, double w) {
      const ZMoments m = avg_z_moments(z1.mhat * z0 + sf * xi, z1.qhat, z1.vhat, y, occ, inner, fit);
      out.q += w * m.mean * m.mean;
      out.chi += w * m.susceptibility;
      out.v += w * m.variance;
      out.m += w * z0 * m.mean;
    };
    if (sf == 0.0) {
      eval(0.0, mass);
    } else {
      for (int k = 0; k < outer.order(); ++k) eval(outer.nodes[k], mass * outer.weights[k]);
    }
  };
  for (int j = 0; j < outer.order(); ++j) {
    const double z0 = sz * outer.nodes[j];
    const double wz = outer.weights[j];
    if (teacher.channel.kind == LikelihoodKind::logistic) {
      const double p_plus = 1.0 / (1.0 + std::exp(-z0));
      accumulate_y(z0, +1.0, wz * p_plus);
      accumulate_y(z0, -1.0, wz * (1.0 - p_plus));
    } else {
      const double noise_sd = std::sqrt(teacher.channel.noise_variance);
      for (int l = 0; l < outer.order(); ++l)
        accumulate_y(z0, z0 + noise_sd * outer.nodes[l], wz * outer.weights[l]);
    }
  }
  return out;
}

SeGaussianOut se_gaussian(const SeState& state, const SpectralMeasure& spectrum,
                          const TeacherModel& teacher) {
  const double qx = state.x2.qhat, qz = state.z2.qhat;
  const double vx = state.x2.vhat, vz = state.z2.vhat;
  const double mx = state.x2.mhat, mz = state.z2.mhat;
  const double cx = state.x2.chihat, cz = state.z2.chihat;
  const double Tx = teacher.T_x, ia = 1.0 / teacher.alpha;
  SeGaussianOut g;
  g.x.chi = spectrum.expect([&](double l) { return 1.0 / (qx + l * qz); });
  g.x.v = spectrum.expect([&](double l) {
    const double d = qx + l * qz;
    return (vx + l * vz) / (d * d);
  });
  g.x.m = Tx * spectrum.expect([&](double l) { return (mx + l * mz) / (qx + l * qz); });
  g.x.q = spectrum.expect([&](double l) {
    const double d = qx + l * qz;
    const double num = mx + l * mz;
    return (Tx * num * num + cx + l * cz) / (d * d);
  });
  g.z.chi = ia * spectrum.expect([&](double l) { return l / (qx + l * qz); });
  g.z.v = ia * spectrum.expect([&](double l) {
    const double d = qx + l * qz;
    return l * (vx + l * vz) / (d * d);
  });
  g.z.m = Tx * ia * spectrum.expect([&](double l) { return l * (mx + l * mz) / (qx + l * qz); });
  g.z.q = ia * spectrum.expect([&](double l) {
    const double d = qx + l * qz;
    const double num = mx + l * mz;
    return l * (Tx * num * num + cx + l * cz) / (d * d);
  });
  return g;
}

void se_moment_match_1to2(SeState& state, const SeQuad& xm, const SeQuad& zm,
                          const TeacherModel& teacher, const SeConfig& config) {
  match_side(state.x2, state.x1, xm, teacher.T_x, config, "x (1->2)");
  match_side(state.z2, state.z1, zm, teacher.T_z, config, "z (1->2)");
}

void se_moment_match_2to1(SeState& state, const SeGaussianOut& g, const TeacherModel& teacher,
                          const SeConfig& config) {
  SeSide nx, nz;
  match_side(nx, state.x2, g.x, teacher.T_x, config, "x (2->1)");
  match_side(nz, state.z2, g.z, teacher.T_z, config, "z (2->1)");
  const double eta = config.damping;
  auto mix = [eta](SeSide& dst, const SeSide& fresh) {
    dst.mhat = eta * fresh.mhat + (1.0 - eta) * dst.mhat;
    dst.chihat = eta * fresh.chihat + (1.0 - eta) * dst.chihat;
    dst.qhat = eta * fresh.qhat + (1.0 - eta) * dst.qhat;
    dst.vhat = eta * fresh.vhat + (1.0 - eta) * dst.vhat;
  };
  mix(state.x1, nx);
  mix(state.z1, nz);
}

SeTrajectory run_se(const TeacherModel& teacher, const SpectralMeasure& spectrum,
                    const SeConfig& config) {
  config.validate();
  const GaussHermite inner(config.quad_order), outer(config.outer_order);
  SeState s;
  s.x1 = {0.0, 0.0, 1.0, config.vhat_init};
  s.z1 = {0.0, 0.0, 1.0, config.vhat_init};
  SeTrajectory traj;
  traj.iterations.reserve(config.t_max);
  for (int t = 1; t <= config.t_max; ++t) {
    const SeSide prev_x1 = s.x1, prev_z1 = s.z1;
    const SeQuad xm = se_factorized_x(s.x1, teacher, config.penalty, outer);
    const SeQuad zm =
        se_factorized_z(s.z1, teacher, config.occupation, config.fit_likelihood, inner, outer);
    se_moment_match_1to2(s, xm, zm, teacher, config);
    const SeGaussianOut g = se_gaussian(s, spectrum, teacher);
    se_moment_match_2to1(s, g, teacher, config);

    SeMoments m;
    m.q1x = xm.q; m.chi1x = xm.chi; m.v1x = xm.v; m.m1x = xm.m;
    m.q1z = zm.q; m.chi1z = zm.chi; m.v1z = zm.v; m.m1z = zm.m;
    m.q2x = g.x.q; m.chi2x = g.x.chi; m.v2x = g.x.v; m.m2x = g.x.m;
    m.q2z = g.z.q; m.chi2z = g.z.chi; m.v2z = g.z.v; m.m2z = g.z.m;
    traj.iterations.push_back(m);
    traj.n_iterations = t;

    const double delta = std::max(
        {std::abs(s.x1.mhat - prev_x1.mhat), std::abs(s.x1.chihat - prev_x1.chihat),
         std::abs(s.x1.qhat - prev_x1.qhat), std::abs(s.x1.vhat - prev_x1.vhat),
         std::abs(s.z1.mhat - prev_z1.mhat), std::abs(s.z1.chihat - prev_z1.chihat),
         std::abs(s.z1.qhat - prev_z1.qhat), std::abs(s.z1.vhat - prev_z1.vhat)});
    if (delta < config.eps_tol) {
      traj.converged = true;
      break;
    }
  }
  traj.final_state = s;
  return traj;
}

}  // namespace stabsel
