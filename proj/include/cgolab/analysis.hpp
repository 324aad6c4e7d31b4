#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgolab/cgo.hpp"
#include "cgolab/holo.hpp"

namespace cgolab {

namespace detail {

/// Smooth off-grid evaluation on the polar grid: 6-point barycentric Lagrange
/// in the Gauss-Legendre radii tensored with 6-point periodic Lagrange in the
/// angle. Adequate for the smooth integrands fed to the stationary-phase
/// formulas; not intended for functions with grid-scale oscillation.
inline cplx interpolate_at(const GridFunction& g, cplx z) {
  const Domain& dom = *g.domain;
  const QuadratureGrid& qd = dom.quadrature;
  const double r = std::abs(z);
  double th = std::arg(z);
  if (th < 0.0) th += 2.0 * kPi;

  const int nrad = qd.n_radial, nth = qd.n_theta;
  const int pr = std::min(6, nrad), pt = std::min(6, nth);

  int ir0 = static_cast<int>(std::lower_bound(qd.radii.begin(), qd.radii.end(), r) -
                             qd.radii.begin());
  ir0 = std::clamp(ir0 - pr / 2, 0, nrad - pr);

  const int jt = static_cast<int>(std::floor(th / qd.dtheta));
  const int it0 = jt - pt / 2 + 1;  // consecutive angular stencil, wrapped

  // angular interpolation along each selected radius
  std::array<cplx, 6> ring{};
  for (int a = 0; a < pr; ++a) {
    cplx num{};
    double den = 0.0;
    bool exact = false;
    for (int b = 0; b < pt; ++b) {
      const int it = ((it0 + b) % nth + nth) % nth;
      const double tb = (it0 + b) * qd.dtheta;  // unwrapped abscissa
      double w = 1.0;
      for (int c = 0; c < pt; ++c)
        if (c != b) w /= (it0 + b - (it0 + c)) * qd.dtheta;
      const double d = th - tb;
      const cplx v = g.values[qd.index(ir0 + a, it)];
      if (std::abs(d) < 1e-14) {
        ring[a] = v;
        exact = true;
        break;
      }
      num += w / d * v;
      den += w / d;
    }
    if (!exact) ring[a] = num / den;
  }

  // radial barycentric Lagrange on the selected Gauss-Legendre abscissas
  cplx num{};
  double den = 0.0;
  for (int a = 0; a < pr; ++a) {
    const double ra = qd.radii[ir0 + a];
    double w = 1.0;
    for (int c = 0; c < pr; ++c)
      if (c != a) w /= ra - qd.radii[ir0 + c];
    const double d = r - ra;
    if (std::abs(d) < 1e-14) return ring[a];
    num += w / d * ring[a];
    den += w / d;
  }
  return num / den;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stationary-phase data at a critical point
// ---------------------------------------------------------------------------

struct HessianData {
  double det_im_hessian = 0.0;  // det Im Φ'' = −|Φ''(z̃)|²
  int signature = 0;            // always 0 for holomorphic Φ (saddle)
  double im_phi = 0.0;          // Im Φ(z̃)
};

/// Hessian bookkeeping of Im Φ at a validated critical point: the
/// Cauchy-Riemann equations give det Im Φ'' = −|Φ''|² and signature 0.
inline HessianData hessian_data(const PhaseFunction& Phi, cplx zt) {
  const CriticalPoint* cp = nullptr;
  for (const auto& c : Phi.critical_points)
    if (std::abs(c.z - zt) < 1e-8) cp = &c;
  if (!cp) throw error("hessian_data: point is not a validated critical point of the phase");
  const double mag = std::abs(cp->second_derivative);
  if (mag < 1e-10) throw error("hessian_data: degenerate critical point");
  return {-mag * mag, 0, cp->im_phi};
}

// ---------------------------------------------------------------------------
// Oscillatory integral and its stationary-phase leading term
// ---------------------------------------------------------------------------

/// ∫ h·(e^{τ(Φ−Φ̄)} + e^{τ(Φ̄−Φ)}) dx = ∫ h·2cos(2τψ) dx by direct quadrature.
inline cplx oscillatory_integral(const GridFunction& h, const PhaseFunction& Phi,
                                 double tau) {
  const Domain& dom = *h.domain;
  check_oscillation_budget(dom, Phi, tau);
  std::vector<cplx> terms(dom.n_nodes());
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const auto& nd = dom.quadrature.nodes[i];
    terms[i] = nd.weight * h.values[i] * 2.0 * std::cos(2.0 * tau * Phi.psi(nd.position));
  }
  return pairwise_sum(terms);
}

/// 2π Σ_k h(z̃_k)·Re e^{2iτ Im Φ(z̃_k)} / (τ·|det Im Φ''(z̃_k)|^{1/2});
/// signature 0 contributes no phase factor.
inline cplx stationary_phase_leading(const GridFunction& h, const PhaseFunction& Phi,
                                     double tau) {
  if (!(tau > 0.0)) throw error("stationary_phase_leading: tau must be positive");
  if (Phi.critical_points.empty())
    throw error("stationary_phase_leading: phase has no critical points");
  cplx acc{};
  for (const auto& cp : Phi.critical_points) {
    const HessianData hd = hessian_data(Phi, cp.z);
    acc += detail::interpolate_at(h, cp.z) * std::cos(2.0 * tau * hd.im_phi) /
           std::sqrt(std::abs(hd.det_im_hessian));
  }
  return 2.0 * kPi / tau * acc;
}

// ---------------------------------------------------------------------------
// The orthogonality identity, term by term
// ---------------------------------------------------------------------------

struct IdentityBreakdown {
  double tau = 0.0;
  cplx direct{};              // ∫ q·u·v dx from the assembled totals
  cplx constant_integral{};   // ∫ q(a² + ā²) dx — reported, not assumed zero
  cplx stationary_sum{};      // 2π Σ (q|a|²)(z̃)Re e^{2iτImΦ}/|det ImΦ''|^{1/2}
  cplx corrector_integral{};  // ∫ q(a₀b₀ + ā₁b̄₁) dx
  cplx linear_corrector{};    // ∫ q(a(a₀+b₀) + conj(a(a₁+b₁))) dx
  cplx plus_integrals{};      // +¼∫ q(a·F₂/Φ' + ā·F₄/Φ'‾) dx (the q₂-side pair)
  cplx minus_integrals{};     // −¼∫ q(a·F₁/Φ' + ā·F₃/Φ'‾) dx (the q₁-side pair)
  std::array<cplx, 4> i_terms{};  // u-layer cross terms I₁..I₄
  std::array<cplx, 4> j_terms{};  // v-layer cross terms J₁..J₄
  cplx expansion_total{};
  double gap = 0.0;           // |direct − expansion_total|
};

inline nlohmann::json to_json(const IdentityBreakdown& b) {
  auto c = [](cplx v) { return nlohmann::json::array({v.real(), v.imag()}); };
  auto arr = [&](const std::array<cplx, 4>& a) {
    return nlohmann::json::array({c(a[0]), c(a[1]), c(a[2]), c(a[3])});
  };
  return nlohmann::json{{"tau", b.tau},
                        {"direct", c(b.direct)},
                        {"constant_integral", c(b.constant_integral)},
                        {"stationary_sum", c(b.stationary_sum)},
                        {"corrector_integral", c(b.corrector_integral)},
                        {"linear_corrector", c(b.linear_corrector)},
                        {"plus_integrals", c(b.plus_integrals)},
                        {"minus_integrals", c(b.minus_integrals)},
                        {"i_terms", arr(b.i_terms)},
                        {"j_terms", arr(b.j_terms)},
                        {"expansion_total", c(b.expansion_total)},
                        {"gap", b.gap}};
}

namespace detail {

/// Cross terms of one first-corrector layer against the opposite pure leading
/// amplitudes: with E = e^{2iTψ} (T the layer's own signed exponent),
///   t₁ = −¼∫q(a·Rt + ā·Rm),  t₂ = −¼∫q(ā·Rt·E + a·Rm/E),
///   t₃ = −∫q(ā·G₁·E + a·G₃/E),  t₄ = −∫q(a·G₁ + ā·G₃).
inline std::array<cplx, 4> layer_cross_terms(const Domain& dom, const PhaseFunction& Phi,
                                             const std::vector<cplx>& qd,
                                             const std::vector<cplx>& av,
                                             const CGOSolution& c, double T) {
  const std::size_t n = dom.n_nodes();
  std::vector<cplx> t1(n), t2(n), t3(n), t4(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nd = dom.quadrature.nodes[i];
    const cplx a = av[i], ab = std::conj(a);
    const cplx E = std::exp(cplx(0.0, 2.0 * T * Phi.psi(nd.position)));
    const cplx w = nd.weight * qd[i];
    t1[i] = -0.25 * w * (a * c.Rt.values[i] + ab * c.Rm.values[i]);
    t2[i] = -0.25 * w * (ab * c.Rt.values[i] * E + a * c.Rm.values[i] / E);
    t3[i] = -w * (ab * c.G1.values[i] * E + a * c.G3.values[i] / E);
    t4[i] = -w * (a * c.G1.values[i] + ab * c.G3.values[i]);
  }
  return {pairwise_sum(t1), pairwise_sum(t2), pairwise_sum(t3), pairwise_sum(t4)};
}

}  // namespace detail

/// Term-by-term bookkeeping of 0 = ∫q u v dx for a (+τ, q₁) build u and a
/// (−τ, q₂) build v sharing phase and amplitude, q = q₁ − q₂. The expansion
/// total uses the exact non-oscillatory leading×leading product, the
/// stationary-phase value of its oscillatory part, and the measured
/// first-corrector cross terms; the gap collects only contributions the
/// asymptotic argument discards as o(1/τ) (stationary-phase truncation,
/// corrector×oscillation cross terms, and products of small layers).
inline IdentityBreakdown identity_terms(const CgoShared& su, const CGOSolution& cu,
                                        const CgoShared& sv, const CGOSolution& cv) {
  const Domain& dom = *su.dom;
  const PhaseFunction& Phi = *su.Phi;
  if (su.sign != 1 || sv.sign != -1)
    throw error("identity_terms: expected a sign +1 build and a sign -1 build");
  if (std::abs(cu.tau - cv.tau) > 1e-12 * std::max(1.0, cu.tau))
    throw error("identity_terms: builds use different tau");
  if (su.dom != sv.dom) throw error("identity_terms: builds use different domains");
  const auto& crit = Phi.critical_points;
  if (sv.Phi->critical_points.size() != crit.size())
    throw error("identity_terms: mismatched phase between builds");
  for (std::size_t k = 0; k < crit.size(); ++k) {
    const cplx z = crit[k].z;
    if (std::abs(z - sv.Phi->critical_points[k].z) > 1e-10 ||
        std::abs((*su.Phi)(z) - (*sv.Phi)(z)) > 1e-10)
      throw error("identity_terms: mismatched phase between builds");
    if (std::abs(su.a(z) - sv.a(z)) > 1e-10)
      throw error("identity_terms: mismatched amplitude between builds");
  }

  const double tau = cu.tau;
  const std::size_t n = dom.n_nodes();
  std::vector<cplx> qd(n), av(n);
  for (std::size_t i = 0; i < n; ++i) {
    qd[i] = su.q.values[i] - sv.q.values[i];
    av[i] = su.a(dom.quadrature.nodes[i].position);
  }

  IdentityBreakdown out;
  out.tau = tau;

  std::vector<cplx> td(n), tc(n), tl(n), tq(n), tp(n), tm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nd = dom.quadrature.nodes[i];
    const cplx z = nd.position;
    const cplx w = nd.weight * qd[i];
    const cplx a = av[i];
    const cplx a0 = su.corr.c0(z), a1 = su.corr.c1(z);
    const cplx b0 = sv.corr.c0(z), b1 = sv.corr.c1(z);
    const cplx dp = Phi.dz(z);
    td[i] = w * cu.total.values[i] * cv.total.values[i];
    tc[i] = w * (a * a + std::conj(a * a));
    tl[i] = w * (a * (a0 + b0) + std::conj(a * (a1 + b1)));
    tq[i] = w * (a0 * b0 + std::conj(a1 * b1));
    tm[i] = -0.25 * w * (a * su.F1.values[i] / dp +
                         std::conj(a) * su.F3.values[i] / std::conj(dp));
    tp[i] = 0.25 * w * (a * sv.F1.values[i] / dp +
                        std::conj(a) * sv.F3.values[i] / std::conj(dp));
  }
  out.direct = pairwise_sum(td);
  out.constant_integral = pairwise_sum(tc);
  out.linear_corrector = pairwise_sum(tl);
  out.corrector_integral = pairwise_sum(tq);
  out.minus_integrals = pairwise_sum(tm);
  out.plus_integrals = pairwise_sum(tp);

  for (const auto& cp : crit) {
    const HessianData hd = hessian_data(Phi, cp.z);
    const cplx qz = su.qf.value(cp.z) - sv.qf.value(cp.z);
    out.stationary_sum += 2.0 * kPi * qz * std::norm(su.a(cp.z)) *
                          std::cos(2.0 * tau * hd.im_phi) /
                          std::sqrt(std::abs(hd.det_im_hessian));
  }

  out.i_terms = detail::layer_cross_terms(dom, Phi, qd, av, cu, tau);
  out.j_terms = detail::layer_cross_terms(dom, Phi, qd, av, cv, -tau);

  out.expansion_total = out.constant_integral +
                        (out.stationary_sum + out.linear_corrector) / tau +
                        out.corrector_integral / (tau * tau);
  for (int k = 0; k < 4; ++k)
    out.expansion_total += out.i_terms[k] + out.j_terms[k];
  out.gap = std::abs(out.direct - out.expansion_total);
  return out;
}

// ---------------------------------------------------------------------------
// Pointwise recovery probe
// ---------------------------------------------------------------------------

struct RecoveryResult {
  cplx xhat{};
  std::vector<double> tau_sweep;
  std::vector<cplx> signal;  // D(τ): direct minus every non-stationary term
  std::vector<double> model; // 2π·cos(2τ Im Φ(x̂))/(τ|det Im Φ''(x̂)|^{1/2})
  cplx fitted{};             // least-squares coefficient ≈ q(x̂)
  cplx truth{};              // q₁(x̂) − q₂(x̂)
  double relative_error = 0.0;
  double condition = 0.0;    // design-column conditioning of the 1-parameter fit
};

inline nlohmann::json to_json(const RecoveryResult& r) {
  auto c = [](cplx v) { return nlohmann::json::array({v.real(), v.imag()}); };
  nlohmann::json sig = nlohmann::json::array();
  for (cplx v : r.signal) sig.push_back(c(v));
  return nlohmann::json{{"xhat", c(r.xhat)},
                        {"tau_sweep", r.tau_sweep},
                        {"signal", sig},
                        {"model", r.model},
                        {"fitted", c(r.fitted)},
                        {"truth", c(r.truth)},
                        {"relative_error", r.relative_error},
                        {"condition", r.condition}};
}

struct RecoveryOptions {
  int amplitude_degree = 12;
  CgoOptions cgo = {0.10, 0.10, 16, 1e-2, {}};  // headroom for off-center probes
  double flat_phase_eps = 0.0, flat_phase_delta = 0.0;
};

/// Probe q₁ − q₂ at x̂: build the flat phase with its saddle at x̂, an
/// amplitude with a(x̂) = 1, CGO pairs over the τ sweep, and fit the
/// stationary-phase model to D(τ) = direct − (all non-stationary terms).
/// With a single critical point at x̂ the fit separates the oscillation
/// exactly, standing in for the almost-periodic separation of the limit.
inline RecoveryResult recover_pointwise(const AnalyticField& q1, const AnalyticField& q2,
                                        const Domain& dom, cplx xhat,
                                        const std::vector<double>& tau_sweep,
                                        RecoveryOptions opt = {}) {
  if (tau_sweep.size() < 4)
    throw error("recover_pointwise: need at least 4 tau values for the fit");
  const PhaseFunction Phi =
      build_flat_phase(dom, xhat, opt.flat_phase_eps, opt.flat_phase_delta);
  const HolomorphicFunction a = fit_amplitude(dom, opt.amplitude_degree, xhat);
  const HessianData hd = hessian_data(Phi, Phi.critical_points[0].z);

  const CgoShared su = prepare_cgo(q1, Phi, a, 1, dom, opt.cgo);
  const CgoShared sv = prepare_cgo(q2, Phi, a, -1, dom, opt.cgo);

  RecoveryResult out;
  out.xhat = xhat;
  out.tau_sweep = tau_sweep;
  for (double tau : tau_sweep) {
    const CGOSolution cu = build_cgo_at(su, tau);
    const CGOSolution cv = build_cgo_at(sv, tau);
    const IdentityBreakdown b = identity_terms(su, cu, sv, cv);
    out.signal.push_back(b.direct - (b.expansion_total - b.stationary_sum / tau));
    out.model.push_back(2.0 * kPi * std::cos(2.0 * tau * hd.im_phi) /
                        (tau * std::sqrt(std::abs(hd.det_im_hessian))));
  }

  double mm = 0.0, scale = 0.0;
  cplx md{};
  for (std::size_t k = 0; k < tau_sweep.size(); ++k) {
    mm += out.model[k] * out.model[k];
    md += out.model[k] * out.signal[k];
    scale = std::max(scale, 2.0 * kPi / (tau_sweep[k] *
                                         std::sqrt(std::abs(hd.det_im_hessian))));
  }
  out.condition = scale * std::sqrt(static_cast<double>(tau_sweep.size())) /
                  std::max(std::sqrt(mm), 1e-300);
  if (!(out.condition <= 1e6))
    throw error("recover_pointwise: fit design ill-conditioned (oscillation factor "
                "vanishes across the sweep); widen the tau sweep");
  out.fitted = md / mm;
  out.truth = q1.value(xhat) - q2.value(xhat);
  const double denom = std::abs(out.truth);
  out.relative_error = std::abs(out.fitted - out.truth) / (denom > 0.0 ? denom : 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Recovery scan
// ---------------------------------------------------------------------------

struct RecoveryPoint {
  cplx xhat{};
  cplx fitted{};
  cplx truth{};
  double relative_error = 0.0;
  bool ok = false;
  std::string message;  // failure diagnostic when !ok
};

struct RecoveryMap {
  std::vector<RecoveryPoint> points;
};

/// recover_pointwise per probe; per-point failures are recorded and the scan
/// continues.
inline RecoveryMap recovery_map(const AnalyticField& q1, const AnalyticField& q2,
                                const Domain& dom, const std::vector<cplx>& probes,
                                const std::vector<double>& tau_sweep,
                                RecoveryOptions opt = {}) {
  RecoveryMap out;
  out.points.reserve(probes.size());
  for (cplx p : probes) {
    RecoveryPoint pt;
    pt.xhat = p;
    try {
      const RecoveryResult r = recover_pointwise(q1, q2, dom, p, tau_sweep, opt);
      pt.fitted = r.fitted;
      pt.truth = r.truth;
      pt.relative_error = r.relative_error;
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.truth = q1.value(p) - q2.value(p);
      pt.relative_error = std::numeric_limits<double>::quiet_NaN();
      pt.message = e.what();
    }
    out.points.push_back(std::move(pt));
  }
  return out;
}

inline void write_recovery_csv(const RecoveryMap& map, std::ostream& os) {
  os << "x1,x2,re_c,im_c,truth_re,truth_im,rel_err\n";
  os.precision(17);
  for (const auto& p : map.points) {
    const cplx c = p.ok ? p.fitted : cplx(std::numeric_limits<double>::quiet_NaN(),
                                          std::numeric_limits<double>::quiet_NaN());
    os << p.xhat.real() << ',' << p.xhat.imag() << ',' << c.real() << ',' << c.imag()
       << ',' << p.truth.real() << ',' << p.truth.imag() << ',' << p.relative_error
       << '\n';
  }
}

inline void write_recovery_csv(const RecoveryMap& map, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw error("write_recovery_csv: cannot open " + path);
  write_recovery_csv(map, os);
}

}  // namespace cgolab
