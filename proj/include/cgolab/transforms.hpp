#pragma once

#include <array>
#include <limits>

#include <json.hpp>

#include "cgolab/catalog.hpp"
#include "cgolab/gridfn.hpp"
#include "cgolab/holomorphic.hpp"
#include "cgolab/polynomial2.hpp"

namespace cgolab {

// ---------------------------------------------------------------------------
// Oscillation budget
// ---------------------------------------------------------------------------

/// Largest |τ| for which e^{2iτψ} keeps ≥ 8 grid points per oscillation.
inline double oscillation_budget(const Domain& dom, const PhaseFunction& Phi) {
  double max_grad = 0.0;
  for (const auto& nd : dom.quadrature.nodes)
    max_grad = std::max(max_grad, std::abs(Phi.dz(nd.position)));
  if (max_grad == 0.0) return std::numeric_limits<double>::infinity();
  return dom.spec.angular_nodes / (8.0 * max_grad * dom.radius());
}

inline void check_oscillation_budget(const Domain& dom, const PhaseFunction& Phi, double tau) {
  const double budget = oscillation_budget(dom, Phi);
  if (std::abs(tau) > budget) {
    double max_grad = 0.0;
    for (const auto& nd : dom.quadrature.nodes)
      max_grad = std::max(max_grad, std::abs(Phi.dz(nd.position)));
    const int needed =
        static_cast<int>(std::ceil(8.0 * std::abs(tau) * max_grad * dom.radius()));
    throw error("tau " + std::to_string(tau) + " exceeds the oscillation budget " +
                std::to_string(budget) + "; need angular_nodes >= " + std::to_string(needed));
  }
}

// ---------------------------------------------------------------------------
// Area Cauchy transforms
// ---------------------------------------------------------------------------

/// T g(z) = −(1/π)∫_Ω g(ζ)/(ζ−z) dA, singularity subtracted:
/// integrate (g(ζ)−g(z))/(ζ−z) over the grid and add g(z)·T[1](z), T[1] = z̄.
inline cplx dbar_inverse_at(const Domain& dom, const std::vector<cplx>& g_values,
                            cplx g_at_target, cplx z) {
  if (!dom.contains(z, 1e-9)) throw error("dbar_inverse: target outside the closed domain");
  std::vector<cplx> terms;
  terms.reserve(g_values.size());
  for (std::size_t i = 0; i < g_values.size(); ++i) {
    const cplx d = dom.quadrature.nodes[i].position - z;
    if (std::abs(d) < 1e-13) continue;
    terms.push_back((g_values[i] - g_at_target) / d * dom.quadrature.nodes[i].weight);
  }
  return -pairwise_sum(terms) / kPi + g_at_target * std::conj(z);
}

inline GridFunction dbar_inverse(const GridFunction& g, const Domain& dom, int jobs = 1) {
  g.check_finite("dbar_inverse");
  GridFunction out(dom);
  parallel_for(dom.n_nodes(), jobs, [&](std::size_t i) {
    out.values[i] =
        dbar_inverse_at(dom, g.values, g.values[i], dom.quadrature.nodes[i].position);
  });
  return out;
}

/// Transform evaluated only at the listed node indices (other entries zero).
inline GridFunction dbar_inverse_targets(const GridFunction& g, const Domain& dom,
                                         const std::vector<std::size_t>& targets,
                                         int jobs = 1) {
  g.check_finite("dbar_inverse");
  GridFunction out(dom);
  parallel_for(targets.size(), jobs, [&](std::size_t k) {
    const std::size_t i = targets[k];
    out.values[i] =
        dbar_inverse_at(dom, g.values, g.values[i], dom.quadrature.nodes[i].position);
  });
  return out;
}

/// ∂_z⁻¹g = conj(∂_z̄⁻¹ ḡ), implemented literally so the identity is bitwise.
inline GridFunction dz_inverse(const GridFunction& g, const Domain& dom, int jobs = 1) {
  return conjugate(dbar_inverse(conjugate(g), dom, jobs));
}

inline cplx dz_inverse_at(const Domain& dom, const std::vector<cplx>& g_values,
                          cplx g_at_target, cplx z) {
  std::vector<cplx> conj_values(g_values.size());
  for (std::size_t i = 0; i < g_values.size(); ++i) conj_values[i] = std::conj(g_values[i]);
  return std::conj(dbar_inverse_at(dom, conj_values, std::conj(g_at_target), z));
}

/// ∂_z-jets (orders 0,1,2) of T g at z̃: subtract the second-order Taylor
/// polynomial of g about z̃ (transformed exactly through the monomial table),
/// leaving absolutely convergent remainder integrals
/// ∂_z^j T ρ(z̃) = −(j!/π)∫ ρ(ζ)/(ζ−z̃)^{j+1} dA.
inline std::array<cplx, 3> dbar_inverse_jets(const Domain& dom,
                                             const std::vector<cplx>& g_values,
                                             const AnalyticField& g, cplx zt) {
  std::map<std::pair<int, int>, cplx> taylor;
  taylor[{0, 0}] = g.value(zt);
  taylor[{1, 0}] = g.dz(zt);
  taylor[{0, 1}] = g.dbar(zt);
  taylor[{2, 0}] = 0.5 * g.dzz(zt);
  taylor[{1, 1}] = g.dzbar(zt);
  taylor[{0, 2}] = 0.5 * g.dbarbar(zt);
  const Polynomial2 P2 = expand_shifted(zt, taylor);
  const Polynomial2 TP2 = P2.cauchy_transform(dom.radius());

  std::array<std::vector<cplx>, 3> terms;
  for (auto& t : terms) t.reserve(g_values.size());
  for (std::size_t i = 0; i < g_values.size(); ++i) {
    const cplx pos = dom.quadrature.nodes[i].position;
    const cplx d = pos - zt;
    const double ad = std::abs(d);
    if (ad < 1e-12) continue;
    const cplx rho = (g_values[i] - P2.eval(pos)) * dom.quadrature.nodes[i].weight;
    const cplx inv = 1.0 / d;
    terms[0].push_back(rho * inv);
    terms[1].push_back(rho * inv * inv);
    terms[2].push_back(rho * inv * inv * inv);
  }
  const Polynomial2 TP2z = TP2.dz();
  const Polynomial2 TP2zz = TP2z.dz();
  return {TP2.eval(zt) - pairwise_sum(terms[0]) / kPi,
          TP2z.eval(zt) - pairwise_sum(terms[1]) / kPi,
          TP2zz.eval(zt) - 2.0 * pairwise_sum(terms[2]) / kPi};
}

inline std::array<cplx, 3> dz_inverse_jets(const Domain& dom,
                                           const std::vector<cplx>& g_values,
                                           const AnalyticField& g, cplx zt) {
  std::vector<cplx> conj_values(g_values.size());
  for (std::size_t i = 0; i < g_values.size(); ++i) conj_values[i] = std::conj(g_values[i]);
  const auto jets = dbar_inverse_jets(dom, conj_values, conjugated(g), zt);
  return {std::conj(jets[0]), std::conj(jets[1]), std::conj(jets[2])};
}

// ---------------------------------------------------------------------------
// Conjugated (oscillatory) operators
// ---------------------------------------------------------------------------

namespace detail {

inline GridFunction r_conjugated(const GridFunction& g, const PhaseFunction& Phi, double tau,
                                 const Domain& dom, bool tilde,
                                 const std::vector<std::size_t>* targets, int jobs) {
  check_oscillation_budget(dom, Phi, tau);
  GridFunction mod(dom);
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const cplx z = dom.quadrature.nodes[i].position;
    mod.values[i] = g.values[i] * std::exp(cplx(0, 2.0 * tau * Phi.psi(z)));
  }
  GridFunction out;
  if (targets) {
    if (tilde) {
      GridFunction cm = conjugate(mod);
      out = conjugate(dbar_inverse_targets(cm, dom, *targets, jobs));
    } else {
      out = dbar_inverse_targets(mod, dom, *targets, jobs);
    }
  } else {
    out = tilde ? dz_inverse(mod, dom, jobs) : dbar_inverse(mod, dom, jobs);
  }
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const cplx z = dom.quadrature.nodes[i].position;
    out.values[i] *= std::exp(cplx(0, -2.0 * tau * Phi.psi(z)));
  }
  return out;
}

}  // namespace detail

/// R_{Φ,τ}g = e^{τ(Φ̄−Φ)} ∂_z̄⁻¹(g e^{τ(Φ−Φ̄)}) = e^{−2iτψ} T[g e^{2iτψ}].
/// Solves ∂_z̄(Rg) − τ(∂_zΦ)‾ Rg = g.
inline GridFunction r_phi_tau(const GridFunction& g, const PhaseFunction& Phi, double tau,
                              const Domain& dom, int jobs = 1) {
  return detail::r_conjugated(g, Phi, tau, dom, false, nullptr, jobs);
}

/// R̃_{Φ,τ}g = e^{τ(Φ̄−Φ)} ∂_z⁻¹(g e^{τ(Φ−Φ̄)}); solves ∂_z(R̃g) + τ(∂_zΦ) R̃g = g.
inline GridFunction r_tilde_phi_tau(const GridFunction& g, const PhaseFunction& Phi,
                                    double tau, const Domain& dom, int jobs = 1) {
  return detail::r_conjugated(g, Phi, tau, dom, true, nullptr, jobs);
}

// ---------------------------------------------------------------------------
// Decay probes
// ---------------------------------------------------------------------------

struct DecayReport {
  std::vector<double> tau_values;
  std::vector<double> sup_norm_on_collar;
  std::vector<double> l2_norm;
  double fitted_slope = 0.0;
  double slope_ci = 0.0;     // least-squares standard error of the slope
  bool slope_defined = false;
};

enum class DecayMode { collar_sup, l2_r_of_z, refined };

namespace detail {

/// Least-squares slope of log(y) vs log(x) with its standard error.
inline void loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                         double& slope, double& se, bool& defined) {
  defined = true;
  for (double v : y)
    if (!(v > 0.0)) { defined = false; return; }
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += sq(lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  slope = sxy / sxx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) ss += sq(ly[i] - my - slope * (lx[i] - mx));
  se = (n > 2) ? std::sqrt(ss / double(n - 2) / sxx) : 0.0;
}

}  // namespace detail

inline DecayReport decay_probe(const GridFunction& g, const PhaseFunction& Phi,
                               const std::vector<double>& tau_sweep, DecayMode mode,
                               const Domain& dom, double collar_eps, int jobs = 1) {
  if (tau_sweep.size() < 4) throw error("decay_probe: need at least 4 tau values");
  for (std::size_t i = 1; i < tau_sweep.size(); ++i)
    if (tau_sweep[i] <= tau_sweep[i - 1])
      throw error("decay_probe: tau sweep must be strictly increasing");

  DecayReport rep;
  rep.tau_values = tau_sweep;
  const auto collar_half = o_epsilon_mask(dom, collar_eps / 2.0);

  if (mode == DecayMode::refined) {
    // Hypotheses: g vanishes on the collar O_ε and at the critical points.
    const double gs = sup_norm(g);
    const auto collar = o_epsilon_mask(dom, collar_eps);
    if (sup_norm_on(g, collar) > 1e-10 * std::max(gs, 1.0))
      throw error("decay_probe(refined): g does not vanish on the boundary collar");
    for (const auto& cp : Phi.critical_points)
      for (const auto& nd : dom.quadrature.nodes)
        if (std::abs(nd.position - cp.z) < 2.0 * dom.grid_spacing() &&
            std::abs(g.values[dom.quadrature.index(nd.ir, nd.itheta)]) >
                1e-6 * std::max(gs, 1.0))
          throw error("decay_probe(refined): g does not vanish near the critical set");
  }

  for (double tau : tau_sweep) {
    switch (mode) {
      case DecayMode::collar_sup: {
        // only collar values are needed, so only those targets are computed
        const GridFunction R = detail::r_conjugated(g, Phi, tau, dom, false, &collar_half, jobs);
        const GridFunction Rt = detail::r_conjugated(g, Phi, tau, dom, true, &collar_half, jobs);
        double s = 0.0;
        for (auto i : collar_half)
          s = std::max(s, std::abs(R.values[i]) + std::abs(Rt.values[i]));
        rep.sup_norm_on_collar.push_back(s);
        rep.l2_norm.push_back(l2_norm_on(R, collar_half) + l2_norm_on(Rt, collar_half));
        break;
      }
      case DecayMode::l2_r_of_z: {
        GridFunction rg(dom), rbg(dom);
        for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
          const cplx rz = Phi.r_of(dom.quadrature.nodes[i].position);
          rg.values[i] = rz * g.values[i];
          rbg.values[i] = std::conj(rz) * g.values[i];
        }
        const GridFunction R = r_phi_tau(rg, Phi, tau, dom, jobs);
        const GridFunction Rt = r_tilde_phi_tau(rbg, Phi, tau, dom, jobs);
        rep.l2_norm.push_back(l2_norm(R) + l2_norm(Rt));
        double s = 0.0;
        for (auto i : collar_half)
          s = std::max(s, std::abs(R.values[i]) + std::abs(Rt.values[i]));
        rep.sup_norm_on_collar.push_back(s);
        break;
      }
      case DecayMode::refined: {
        const GridFunction R = r_phi_tau(g, Phi, tau, dom, jobs);
        const GridFunction Rt = r_tilde_phi_tau(g, Phi, tau, dom, jobs);
        GridFunction res1(dom), res2(dom);
        for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
          const cplx z = dom.quadrature.nodes[i].position;
          const cplx dphi = Phi.dz(z);
          res1.values[i] = R.values[i] + g.values[i] / (tau * std::conj(dphi));
          res2.values[i] = Rt.values[i] - g.values[i] / (tau * dphi);
        }
        rep.l2_norm.push_back(tau * (l2_norm(res1) + l2_norm(res2)));
        double s = 0.0;
        for (auto i : collar_half)
          s = std::max(s, std::abs(res1.values[i]) + std::abs(res2.values[i]));
        rep.sup_norm_on_collar.push_back(s);
        break;
      }
    }
  }
  const auto& fit_series =
      (mode == DecayMode::collar_sup) ? rep.sup_norm_on_collar : rep.l2_norm;
  detail::loglog_slope(rep.tau_values, fit_series, rep.fitted_slope, rep.slope_ci,
                       rep.slope_defined);
  return rep;
}

inline nlohmann::json to_json(const DecayReport& r) {
  return nlohmann::json{{"tau_values", r.tau_values},
                        {"sup_norm_on_collar", r.sup_norm_on_collar},
                        {"l2_norm", r.l2_norm},
                        {"fitted_slope", r.fitted_slope},
                        {"slope_ci", r.slope_ci},
                        {"slope_defined", r.slope_defined}};
}

// ---------------------------------------------------------------------------
// Energy identities
// ---------------------------------------------------------------------------

enum class EnergyCase { dz_case, dbar_case };

/// Checks ‖∂x1(e^{∓iτψ}ṽ)‖² + ‖∂x2(e^{∓iτψ}ṽ)‖²
///        − τ∮(∇φ,ν)|ṽ|²dσ ± Re∮ i(ν₂∂x1ṽ − ν₁∂x2ṽ)·conj(ṽ)dσ = ‖f̃‖²
/// with f̃ = 2∂_zṽ − τ(∂_zΦ)ṽ (dz case, upper signs) or
///      f̃ = 2∂_z̄ṽ − τ(∂_zΦ)‾ṽ (dbar case, lower signs).
/// Returns the relative gap. ṽ is given analytically so every term is a
/// plain quadrature (no finite differences enter the oracle).
inline double energy_identity_check(const AnalyticField& v, const PhaseFunction& Phi,
                                    double tau, EnergyCase which, const Domain& dom) {
  const double s = (which == EnergyCase::dz_case) ? 1.0 : -1.0;

  std::vector<double> rhs_terms, lhs1_terms, lhs2_terms;
  rhs_terms.reserve(dom.n_nodes());
  for (const auto& nd : dom.quadrature.nodes) {
    const cplx z = nd.position;
    const cplx dphi = Phi.dz(z);
    const cplx vz = v.value(z);
    const cplx ft = (which == EnergyCase::dz_case)
                        ? 2.0 * v.dz(z) - tau * dphi * vz
                        : 2.0 * v.dbar(z) - tau * std::conj(dphi) * vz;
    rhs_terms.push_back(std::norm(ft) * nd.weight);

    // V = e^{∓iτψ} ṽ; |V_xk|² assembled from analytic pieces.
    const auto [vx1, vx2] = v.grad(z);
    const double psix1 = dphi.imag();   // ψ_x1 = Im Φ′
    const double psix2 = dphi.real();   // ψ_x2 = Re Φ′
    const cplx i_tau_s(0.0, -s * tau);  // derivative factor of e^{∓iτψ}
    const cplx Vx1 = vx1 + i_tau_s * psix1 * vz;  // common unimodular factor dropped
    const cplx Vx2 = vx2 + i_tau_s * psix2 * vz;
    lhs1_terms.push_back(std::norm(Vx1) * nd.weight);
    lhs2_terms.push_back(std::norm(Vx2) * nd.weight);
  }

  std::vector<double> bterm_phi, bterm_tan;
  for (const auto& bp : dom.boundary_points) {
    const cplx z = bp.position;
    const cplx vz = v.value(z);
    const cplx gphi = Phi.grad_varphi(z);
    const double gn = gphi.real() * bp.normal.real() + gphi.imag() * bp.normal.imag();
    bterm_phi.push_back(-tau * gn * std::norm(vz) * bp.weight);
    const auto [vx1, vx2] = v.grad(z);
    const cplx dtan = bp.normal.imag() * vx1 - bp.normal.real() * vx2;  // ν₂∂x1 − ν₁∂x2
    bterm_tan.push_back(s * (cplx(0, 1) * dtan * std::conj(vz)).real() * bp.weight);
  }

  const double rhs = pairwise_sum(rhs_terms);
  const double lhs = pairwise_sum(lhs1_terms) + pairwise_sum(lhs2_terms) +
                     pairwise_sum(bterm_phi) + pairwise_sum(bterm_tan);
  return std::abs(lhs - rhs) / std::max(rhs, 1e-30);
}

}  // namespace cgolab
