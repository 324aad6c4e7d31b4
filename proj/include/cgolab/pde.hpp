#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <json.hpp>

#include "cgolab/catalog.hpp"
#include "cgolab/gridfn.hpp"
#include "cgolab/holomorphic.hpp"

namespace cgolab {

// ---------------------------------------------------------------------------
// Potential
// ---------------------------------------------------------------------------

struct Potential {
  enum class Tag { analytic_expr, sampled };

  std::vector<cplx> values;            // one per quadrature node
  Tag tag = Tag::sampled;
  std::function<cplx(cplx)> expr;      // set when tag == analytic_expr

  void check_finite(const char* who) const {
    for (const cplx& v : values)
      if (!is_finite(v)) throw error(std::string(who) + ": non-finite potential value");
  }
};

inline Potential make_potential(const Domain& dom, const std::function<cplx(cplx)>& q) {
  Potential p;
  p.tag = Potential::Tag::analytic_expr;
  p.expr = q;
  p.values.resize(dom.n_nodes());
  for (std::size_t i = 0; i < dom.n_nodes(); ++i)
    p.values[i] = q(dom.quadrature.nodes[i].position);
  p.check_finite("make_potential");
  return p;
}

inline Potential make_potential(const Domain& dom, std::vector<cplx> values) {
  if (values.size() != dom.n_nodes())
    throw error("make_potential: sample count does not match the quadrature grid");
  Potential p;
  p.tag = Potential::Tag::sampled;
  p.values = std::move(values);
  p.check_finite("make_potential");
  return p;
}

/// q = Δ√γ / √γ for positive γ, via analytic derivatives of γ:
/// q = 2 γ_{zz̄}/γ − γ_z γ_z̄ / γ².
inline Potential conductivity_to_potential(const AnalyticField& gamma, const Domain& dom,
                                           double gamma_min = 1e-8) {
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const cplx v = gamma.value(dom.quadrature.nodes[i].position);
    if (!(v.real() >= gamma_min) || std::abs(v.imag()) > 1e-12 * std::abs(v))
      throw error("conductivity_to_potential: gamma must be real and positive");
  }
  auto q = [gamma](cplx z) {
    const cplx v = gamma.value(z);
    return 2.0 * gamma.dzbar(z) / v - gamma.dz(z) * gamma.dbar(z) / (v * v);
  };
  return make_potential(dom, q);
}

/// Finite-difference fallback: q = Δ√γ / √γ from grid samples of γ.
inline Potential conductivity_to_potential(const GridFunction& gamma,
                                           double gamma_min = 1e-8) {
  if (!gamma.domain) throw error("conductivity_to_potential: grid function lacks a domain");
  const Domain& dom = *gamma.domain;
  GridFunction root(dom);
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const cplx v = gamma.values[i];
    if (!(v.real() >= gamma_min) || std::abs(v.imag()) > 1e-12 * std::abs(v))
      throw error("conductivity_to_potential: gamma must be real and positive");
    root.values[i] = std::sqrt(v.real());
  }
  const GridFunction lap = laplacian_fd(root);
  std::vector<cplx> q(dom.n_nodes());
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) q[i] = lap.values[i] / root.values[i];
  Potential p = make_potential(dom, std::move(q));
  return p;
}

// ---------------------------------------------------------------------------
// Finite-difference Dirichlet solver on a uniform polar mesh
// ---------------------------------------------------------------------------

struct SolveOptions {
  int radial_nodes = 128;          // uniform FD rings (mesh spacing R / radial_nodes)
  double singular_threshold = 1e3; // refuse when the ‖A⁻¹‖ estimate exceeds this
};

struct DirichletSolution {
  GridFunction u;                  // on the quadrature grid, boundary trace filled
  std::vector<cplx> flux;          // ∂u/∂ν at the mesh boundary ring angles
  std::vector<double> flux_theta;  // matching angles
  double residual = 0.0;           // discrete interior residual max |Au - b|
  double condition_proxy = 0.0;    // ‖A‖_∞ · inverse-power estimate of ‖A⁻¹‖
  double tolerance = 0.0;          // h² · sup|u|, crude discretization error scale
};

namespace detail {

/// Cubic Lagrange interpolation of a column sampled at nodes `xs` (ascending).
inline cplx lagrange4(const std::vector<double>& xs, const std::vector<cplx>& ys,
                      double x) {
  const int n = static_cast<int>(xs.size());
  int k = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  int lo = std::clamp(k - 2, 0, n - 4);
  cplx acc{};
  for (int a = lo; a < lo + 4; ++a) {
    double w = 1.0;
    for (int b = lo; b < lo + 4; ++b)
      if (b != a) w *= (x - xs[b]) / (xs[a] - xs[b]);
    acc += w * ys[a];
  }
  return acc;
}

/// Factorized (Δ + q) operator on a uniform polar mesh sharing the domain's
/// angular grid. Unknowns: center node then rings i = 1..nr-1.
class FdOperator {
 public:
  FdOperator(const Potential& q, const Domain& dom, const SolveOptions& opt)
      : dom_(dom), opt_(opt), nr_(opt.radial_nodes), nt_(dom.quadrature.n_theta),
        h_(dom.radius() / opt.radial_nodes), dtheta_(dom.quadrature.dtheta) {
    if (nr_ < 16) throw error("solve_dirichlet: need at least 16 radial mesh nodes");
    q_mesh_ = sample_to_mesh(q);
    assemble();
    factorize();
  }

  int nr() const { return nr_; }
  int nt() const { return nt_; }
  double h() const { return h_; }
  const Domain& dom() const { return dom_; }

  /// Mesh values of a quadrature-grid function via radial cubic interpolation
  /// (angular grids coincide). Index 0 is the center, then ring i angle j.
  std::vector<cplx> sample_to_mesh(const GridFunction& f) const {
    std::vector<cplx> out(1 + static_cast<std::size_t>(nr_ - 1) * nt_, cplx{});
    if (f.values.empty()) return out;
    const auto& radii = dom_.quadrature.radii;
    std::vector<cplx> col(radii.size());
    // center: average the per-angle radial extrapolations at r = 0
    cplx c{};
    for (int j = 0; j < nt_; ++j) {
      for (std::size_t ir = 0; ir < radii.size(); ++ir)
        col[ir] = f.values[dom_.quadrature.index(static_cast<int>(ir), j)];
      c += lagrange4(radii, col, 0.0);
      for (int i = 1; i < nr_; ++i)
        out[idx(i, j)] = lagrange4(radii, col, i * h_);
    }
    out[0] = c / static_cast<double>(nt_);
    return out;
  }

  std::vector<cplx> sample_to_mesh(const Potential& q) const {
    if (q.tag == Potential::Tag::analytic_expr) {
      std::vector<cplx> out(1 + static_cast<std::size_t>(nr_ - 1) * nt_);
      out[0] = q.expr(cplx{});
      for (int i = 1; i < nr_; ++i)
        for (int j = 0; j < nt_; ++j)
          out[idx(i, j)] = q.expr(std::polar(i * h_, j * dtheta_));
      return out;
    }
    GridFunction g(dom_);
    g.values = q.values;
    return sample_to_mesh(g);
  }

  /// Solve (Δ + q)u = f with u = g on the boundary ring.
  /// f_mesh may be empty (meaning 0); g has nt() entries at angles j·dθ.
  DirichletSolution solve(const std::vector<cplx>& f_mesh,
                          const std::vector<cplx>& g) const {
    if (static_cast<int>(g.size()) != nt_)
      throw error("solve_dirichlet: boundary data size must match the angular grid");
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(n_);
    if (!f_mesh.empty()) {
      if (f_mesh.size() != static_cast<std::size_t>(n_))
        throw error("solve_dirichlet: source mesh size mismatch");
      for (int k = 0; k < n_; ++k) b[k] = f_mesh[k];
    }
    // boundary contributions from the i = nr-1 ring
    const double ri = (nr_ - 1) * h_;
    const double cp = 1.0 / (h_ * h_) + 1.0 / (2.0 * h_ * ri);
    for (int j = 0; j < nt_; ++j) b[idx(nr_ - 1, j)] -= cp * g[j];

    Eigen::VectorXcd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success)
      throw error("solve_dirichlet: factor solve failed; perturb q");

    DirichletSolution out;
    out.condition_proxy = condition_proxy_;
    out.residual = (mat_ * x - b).cwiseAbs().maxCoeff();

    // interpolate back to the quadrature grid (mesh radii 0..R, boundary = g)
    out.u = GridFunction(dom_);
    std::vector<double> xs(nr_ + 1);
    for (int i = 0; i <= nr_; ++i) xs[i] = i * h_;
    std::vector<cplx> col(nr_ + 1);
    for (int j = 0; j < nt_; ++j) {
      col[0] = x[0];
      for (int i = 1; i < nr_; ++i) col[i] = x[idx(i, j)];
      col[nr_] = g[j];
      for (int ir = 0; ir < dom_.quadrature.n_radial; ++ir)
        out.u.values[dom_.quadrature.index(ir, j)] =
            lagrange4(xs, col, dom_.quadrature.radii[ir]);
    }
    // boundary angles coincide with the mesh when counts match; otherwise
    // interpolate g periodically with cubic Lagrange.
    out.u.boundary_trace.resize(dom_.boundary_points.size());
    for (std::size_t k = 0; k < dom_.boundary_points.size(); ++k)
      out.u.boundary_trace[k] = periodic_lagrange(g, dom_.boundary_points[k].theta);

    // one-sided second-order flux at the mesh boundary ring
    out.flux.resize(nt_);
    out.flux_theta.resize(nt_);
    for (int j = 0; j < nt_; ++j) {
      const cplx um1 = x[idx(nr_ - 1, j)];
      const cplx um2 = x[idx(nr_ - 2, j)];
      out.flux[j] = (3.0 * g[j] - 4.0 * um1 + um2) / (2.0 * h_);
      out.flux_theta[j] = j * dtheta_;
    }

    double su = 0.0;
    for (const cplx& v : out.u.values) su = std::max(su, std::abs(v));
    out.tolerance = h_ * h_ * std::max(su, 1.0);
    out.u.check_finite("solve_dirichlet");
    return out;
  }

  cplx periodic_lagrange(const std::vector<cplx>& g, double theta) const {
    const double t = theta / dtheta_;
    const int j0 = static_cast<int>(std::floor(t));
    if (std::abs(t - j0) < 1e-12) return g[((j0 % nt_) + nt_) % nt_];
    cplx acc{};
    for (int a = j0 - 1; a <= j0 + 2; ++a) {
      double w = 1.0;
      for (int b = j0 - 1; b <= j0 + 2; ++b)
        if (b != a) w *= (t - b) / static_cast<double>(a - b);
      acc += w * g[((a % nt_) + nt_) % nt_];
    }
    return acc;
  }

 private:
  int idx(int i, int j) const { return 1 + (i - 1) * nt_ + j; }

  void assemble() {
    n_ = 1 + (nr_ - 1) * nt_;
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<std::size_t>(n_) * 5);
    const double h2 = h_ * h_;
    // center: Δu(0) ≈ (4/h²)(mean of first ring − u(0))
    trip.emplace_back(0, 0, cplx(-4.0 / h2, 0) + q_mesh_[0]);
    for (int j = 0; j < nt_; ++j)
      trip.emplace_back(0, idx(1, j), cplx(4.0 / (h2 * nt_), 0));
    for (int i = 1; i < nr_; ++i) {
      const double r = i * h_;
      const double cm = 1.0 / h2 - 1.0 / (2.0 * h_ * r);
      const double cp = 1.0 / h2 + 1.0 / (2.0 * h_ * r);
      const double ca = 1.0 / (r * r * dtheta_ * dtheta_);
      for (int j = 0; j < nt_; ++j) {
        const int row = idx(i, j);
        trip.emplace_back(row, row, cplx(-2.0 / h2 - 2.0 * ca, 0) + q_mesh_[row]);
        trip.emplace_back(row, idx(i, (j + 1) % nt_), cplx(ca, 0));
        trip.emplace_back(row, idx(i, (j + nt_ - 1) % nt_), cplx(ca, 0));
        if (i == 1)
          trip.emplace_back(row, 0, cplx(cm, 0));
        else
          trip.emplace_back(row, idx(i - 1, j), cplx(cm, 0));
        if (i < nr_ - 1) trip.emplace_back(row, idx(i + 1, j), cplx(cp, 0));
        // i == nr-1: the cp coefficient multiplies boundary data, moved to rhs
      }
    }
    mat_.resize(n_, n_);
    mat_.setFromTriplets(trip.begin(), trip.end());
    mat_.makeCompressed();
  }

  void factorize() {
    lu_.compute(mat_);
    if (lu_.info() != Eigen::Success)
      throw error("solve_dirichlet: singular system (interior eigenvalue hit); perturb q");
    // inverse-power estimate of ‖A⁻¹‖ from a deterministic pseudo-random seed
    Eigen::VectorXcd v(n_);
    std::uint64_t s = 0x9e3779b97f4a7c15ull;
    for (int k = 0; k < n_; ++k) {
      s = s * 6364136223846793005ull + 1442695040888963407ull;
      v[k] = cplx((s >> 11) * (1.0 / 9007199254740992.0) - 0.5,
                  ((s >> 32) & 0xfffff) * (1.0 / 1048576.0) - 0.5);
    }
    v /= v.norm();
    double inv_norm = 0.0;
    for (int it = 0; it < 3; ++it) {
      Eigen::VectorXcd w = lu_.solve(v);
      inv_norm = w.norm();
      if (!(inv_norm > 0.0) || !std::isfinite(inv_norm)) break;
      v = w / inv_norm;
    }
    double row_sum = 0.0;
    for (int k = 0; k < mat_.outerSize(); ++k) {
      double s_row = 0.0;
      for (Eigen::SparseMatrix<cplx>::InnerIterator it(mat_, k); it; ++it)
        s_row += std::abs(it.value());
      row_sum = std::max(row_sum, s_row);
    }
    condition_proxy_ = inv_norm * row_sum;
    if (!std::isfinite(inv_norm) || inv_norm > opt_.singular_threshold)
      throw error("solve_dirichlet: near-singular system (interior eigenvalue hit); "
                  "perturb q");
  }

  const Domain& dom_;
  SolveOptions opt_;
  int nr_, nt_, n_ = 0;
  double h_, dtheta_;
  std::vector<cplx> q_mesh_;
  Eigen::SparseMatrix<cplx> mat_;
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu_;
  double condition_proxy_ = 0.0;
};

}  // namespace detail

/// Solve Δu + qu = f with Dirichlet data g on ∂Ω.
inline DirichletSolution solve_dirichlet(const Potential& q, const GridFunction& f,
                                         const std::function<cplx(cplx)>& g,
                                         const Domain& dom, SolveOptions opt = {}) {
  q.check_finite("solve_dirichlet");
  detail::FdOperator op(q, dom, opt);
  std::vector<cplx> g_ring(op.nt());
  for (int j = 0; j < op.nt(); ++j)
    g_ring[j] = g(std::polar(dom.radius(), j * dom.quadrature.dtheta));
  std::vector<cplx> f_mesh;
  if (!f.values.empty()) f_mesh = op.sample_to_mesh(f);
  return op.solve(f_mesh, g_ring);
}

// ---------------------------------------------------------------------------
// Cauchy data sets
// ---------------------------------------------------------------------------

struct CauchyDataSet {
  struct Row {
    int basis_id;
    double theta;
    cplx trace;
    cplx flux;
  };
  int n_basis = 0;
  std::vector<Row> rows;     // Γ̃ mesh nodes, basis-major order
  double solver_tolerance = 0.0;
};

/// Smooth bump (1-s²)³ scaled to a sub-arc of Γ̃; basis element k of n.
inline std::function<cplx(cplx)> gamma_tilde_bump(const Domain& dom, int k, int n) {
  const double a = dom.spec.gamma_tilde_begin, b = dom.spec.gamma_tilde_end;
  const double w = (b - a) / (n + 1);
  const double c = a + (k + 1) * w;
  return [a, b, w, c](cplx z) {
    double th = std::arg(z);
    if (th < 0) th += 2.0 * kPi;
    if (th <= a || th >= b) return cplx{};
    const double s = (th - c) / w;
    if (std::abs(s) >= 1.0) return cplx{};
    const double t = 1.0 - s * s;
    return cplx(t * t * t, 0.0);
  };
}

/// Dirichlet traces and fluxes on Γ̃ for a smooth bump basis, u|Γ₀ = 0.
inline CauchyDataSet cauchy_data(const Potential& q, const Domain& dom, int n_basis,
                                 SolveOptions opt = {}) {
  if (n_basis < 1) throw error("cauchy_data: need at least one basis element");
  const double arc = dom.spec.gamma_tilde_end - dom.spec.gamma_tilde_begin;
  const int tilde_nodes = static_cast<int>(arc / dom.quadrature.dtheta);
  if (n_basis > tilde_nodes)
    throw error("cauchy_data: more basis elements than Gamma_tilde nodes");
  detail::FdOperator op(q, dom, opt);
  CauchyDataSet out;
  out.n_basis = n_basis;
  for (int k = 0; k < n_basis; ++k) {
    const auto bump = gamma_tilde_bump(dom, k, n_basis);
    std::vector<cplx> g(op.nt());
    for (int j = 0; j < op.nt(); ++j)
      g[j] = bump(std::polar(dom.radius(), j * dom.quadrature.dtheta));
    DirichletSolution sol = op.solve({}, g);
    out.solver_tolerance = std::max(out.solver_tolerance, sol.tolerance);
    for (int j = 0; j < op.nt(); ++j) {
      const double th = sol.flux_theta[j];
      if (th >= dom.spec.gamma_tilde_begin && th < dom.spec.gamma_tilde_end)
        out.rows.push_back({k, th, g[j], sol.flux[j]});
    }
  }
  return out;
}

inline std::string to_csv(const CauchyDataSet& cd) {
  std::string out = "basis_id,theta,trace_re,trace_im,flux_re,flux_im\n";
  char line[256];
  for (const auto& r : cd.rows) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.basis_id,
                  r.theta, r.trace.real(), r.trace.imag(), r.flux.real(),
                  r.flux.imag());
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Carleman-weighted solvability
// ---------------------------------------------------------------------------

struct CarlemanSolveOptions {
  SolveOptions solver;
  double tau0 = 5.0;      // minimum admissible |τ|
  double c_max = 1e3;     // bound-ratio flag threshold
};

struct CarlemanSolveResult {
  DirichletSolution solution;
  double bound_ratio = 0.0;    // ‖ue^{−τφ}‖ / (‖fe^{−τφ}‖/√τ + ‖ge^{−τφ}‖_{Γ₀})
  bool ratio_defined = false;  // false when f = g = 0 (0/0 counts as pass)
  bool flagged = false;        // ratio above c_max
};

/// Solve Δu + q₀u = f with u|Γ₀ = g, selecting the solution with u|Γ̃ = 0,
/// then verify the Carleman-weighted bound for the achieved solution.
inline CarlemanSolveResult carleman_solve(const Potential& q0, const GridFunction& f,
                                          const std::function<cplx(cplx)>& g,
                                          const PhaseFunction& Phi, double tau,
                                          const Domain& dom,
                                          CarlemanSolveOptions opt = {}) {
  if (std::abs(tau) < opt.tau0)
    throw error("carleman_solve: |tau| below the configured tau0");
  detail::FdOperator op(q0, dom, opt.solver);
  std::vector<cplx> g_ring(op.nt(), cplx{});
  const double dtheta = dom.quadrature.dtheta;
  for (int j = 0; j < op.nt(); ++j) {
    const double th = j * dtheta;
    const bool on_tilde =
        (th >= dom.spec.gamma_tilde_begin && th < dom.spec.gamma_tilde_end);
    if (!on_tilde) g_ring[j] = g(std::polar(dom.radius(), th));
  }
  std::vector<cplx> f_mesh;
  if (!f.values.empty()) f_mesh = op.sample_to_mesh(f);
  CarlemanSolveResult out;
  out.solution = op.solve(f_mesh, g_ring);

  // signed tau: the weight is e^{−τφ} for both branches of the construction
  double nu = 0.0, nf = 0.0;
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const auto& nd = dom.quadrature.nodes[i];
    const double w = std::exp(-tau * Phi.varphi(nd.position));
    nu += nd.weight * std::norm(out.solution.u.values[i] * w);
    if (!f.values.empty()) nf += nd.weight * std::norm(f.values[i] * w);
  }
  double ng = 0.0;
  for (int j = 0; j < op.nt(); ++j) {
    if (g_ring[j] == cplx{}) continue;
    const cplx z = std::polar(dom.radius(), j * dtheta);
    const double w = std::exp(-tau * Phi.varphi(z));
    ng += dom.radius() * dtheta * std::norm(g_ring[j] * w);
  }
  const double denom = std::sqrt(nf) / std::sqrt(std::abs(tau)) + std::sqrt(ng);
  if (denom > 0.0) {
    out.ratio_defined = true;
    out.bound_ratio = std::sqrt(nu) / denom;
    out.flagged = out.bound_ratio > opt.c_max;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Carleman estimate verification
// ---------------------------------------------------------------------------

struct CarlemanReport {
  std::vector<double> tau_values;
  std::vector<std::array<double, 4>> lhs_terms;  // per τ: L², H¹, τ²-weighted, Γ₀ flux
  std::vector<std::array<double, 2>> rhs_terms;  // per τ: Δu term, Γ̃ flux term
  std::vector<double> ratios;                    // LHS / RHS per τ
  double ratio_max = 0.0;
};

/// Assemble both sides of the weighted estimate for a real u vanishing on ∂Ω:
///   τ‖ue^{τφ}‖² + ‖ue^{τφ}‖²_{H¹} + τ²‖|Φ′|ue^{τφ}‖² + τ∫_{Γ₀}|∂_νu|²e^{2τφ}
///     vs  ‖(Δu)e^{τφ}‖² + τ∫_{Γ̃}|∂_νu|²e^{2τφ}.
inline CarlemanReport carleman_estimate_check(const GridFunction& u,
                                              const PhaseFunction& Phi,
                                              const std::vector<double>& tau_sweep,
                                              const Domain& dom) {
  if (!u.domain || u.domain != &dom)
    throw error("carleman_estimate_check: grid function not on this domain");
  if (u.boundary_trace.empty())
    throw error("carleman_estimate_check: boundary trace required to verify u|dOmega = 0");
  double scale = sup_norm(u);
  for (const cplx& v : u.values)
    if (std::abs(v.imag()) > 1e-10 * std::max(scale, 1.0))
      throw error("carleman_estimate_check: u must be real-valued");
  for (const cplx& v : u.boundary_trace)
    if (std::abs(v) > 1e-10 * std::max(scale, 1.0))
      throw error("carleman_estimate_check: u must vanish on the boundary");

  const GridFunction lap = laplacian_fd(u);
  const auto [ux, uy] = cartesian_gradient(u);

  // boundary normal derivative per angular column: cubic through the last
  // three quadrature rings and the zero boundary value, differentiated at R.
  const int nt = dom.quadrature.n_theta;
  const int nrq = dom.quadrature.n_radial;
  const double R = dom.radius();
  std::vector<double> flux(nt, 0.0);
  {
    const double* r = dom.quadrature.radii.data();
    double xs[4] = {r[nrq - 3], r[nrq - 2], r[nrq - 1], R};
    double dw[4];
    for (int a = 0; a < 4; ++a) {
      // derivative of the Lagrange basis ℓ_a at x = R
      double sum = 0.0;
      for (int m = 0; m < 4; ++m) {
        if (m == a) continue;
        double prod = 1.0;
        for (int b = 0; b < 4; ++b)
          if (b != a && b != m) prod *= (R - xs[b]) / (xs[a] - xs[b]);
        sum += prod / (xs[a] - xs[m]);
      }
      dw[a] = sum;
    }
    for (int j = 0; j < nt; ++j) {
      double d = 0.0;
      for (int a = 0; a < 3; ++a)
        d += dw[a] * u.values[dom.quadrature.index(nrq - 3 + a, j)].real();
      flux[j] = d;  // the boundary sample is 0
    }
  }

  CarlemanReport rep;
  rep.tau_values = tau_sweep;
  for (double tau : tau_sweep) {
    if (!(tau > 0.0)) throw error("carleman_estimate_check: tau must be positive");
    double l1 = 0, l2 = 0, l3 = 0, l4 = 0, r1 = 0, r2 = 0;
    for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
      const auto& nd = dom.quadrature.nodes[i];
      const double e = std::exp(tau * Phi.varphi(nd.position));
      const double e2 = e * e;
      const double u2 = std::norm(u.values[i]);
      l1 += nd.weight * tau * u2 * e2;
      const cplx gphi = Phi.grad_varphi(nd.position);
      const cplx wx = (ux.values[i] + tau * u.values[i] * gphi.real()) * e;
      const cplx wy = (uy.values[i] + tau * u.values[i] * gphi.imag()) * e;
      l2 += nd.weight * (u2 * e2 + std::norm(wx) + std::norm(wy));
      l3 += nd.weight * tau * tau * std::norm(Phi.dz(nd.position)) * u2 * e2;
      r1 += nd.weight * std::norm(lap.values[i]) * e2;
    }
    const double dtheta = dom.quadrature.dtheta;
    for (int j = 0; j < nt; ++j) {
      const double th = j * dtheta;
      const cplx z = std::polar(R, th);
      const double e2 = std::exp(2.0 * tau * Phi.varphi(z));
      const double term = tau * R * dtheta * flux[j] * flux[j] * e2;
      const bool on_tilde =
          (th >= dom.spec.gamma_tilde_begin && th < dom.spec.gamma_tilde_end);
      if (on_tilde)
        r2 += term;
      else
        l4 += term;
    }
    rep.lhs_terms.push_back({l1, l2, l3, l4});
    rep.rhs_terms.push_back({r1, r2});
    const double lhs = l1 + l2 + l3 + l4, rhs = r1 + r2;
    const double ratio = rhs > 0.0 ? lhs / rhs : 0.0;
    rep.ratios.push_back(ratio);
    rep.ratio_max = std::max(rep.ratio_max, ratio);
  }
  return rep;
}

inline nlohmann::json to_json(const CarlemanReport& r) {
  nlohmann::json j;
  j["tau_values"] = r.tau_values;
  j["ratios"] = r.ratios;
  j["ratio_max"] = r.ratio_max;
  auto& lt = j["lhs_terms"] = nlohmann::json::array();
  for (const auto& t : r.lhs_terms) lt.push_back({t[0], t[1], t[2], t[3]});
  auto& rt = j["rhs_terms"] = nlohmann::json::array();
  for (const auto& t : r.rhs_terms) rt.push_back({t[0], t[1]});
  return j;
}

}  // namespace cgolab
