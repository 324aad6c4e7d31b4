#pragma once

#include <algorithm>
#include <vector>

#include <json.hpp>

#include "cgolab/common.hpp"

namespace cgolab {

enum class DomainKind { unit_disk, scaled_disk };

/// Blueprint for a disk domain with a Γ̃/Γ₀ boundary split.
struct DomainSpec {
  DomainKind kind = DomainKind::unit_disk;
  double radius = 1.0;
  double gamma_tilde_begin = 0.0;      // θ_a, radians
  double gamma_tilde_end = kPi;        // θ_b, half-open arc [θ_a, θ_b)
  int boundary_nodes = 256;
  int radial_nodes = 64;
  int angular_nodes = 256;

  void validate() const {
    if (radius <= 0.0) throw error("DomainSpec: radius must be positive");
    if (kind == DomainKind::unit_disk && radius != 1.0)
      throw error("DomainSpec: unit_disk requires radius 1");
    if (!(0.0 <= gamma_tilde_begin && gamma_tilde_begin < gamma_tilde_end &&
          gamma_tilde_end < 2.0 * kPi))
      throw error("DomainSpec: need 0 <= theta_a < theta_b < 2*pi so that both arcs are nonempty");
    if (boundary_nodes < 64) throw error("DomainSpec: boundary_nodes must be >= 64");
    if (radial_nodes < 16) throw error("DomainSpec: radial_nodes must be >= 16");
    if (angular_nodes < 64) throw error("DomainSpec: angular_nodes must be >= 64");
  }
};

struct BoundaryPoint {
  cplx position;
  cplx normal;        // unit outward normal ν
  cplx tangent;       // tangential direction (ν₂, −ν₁), the direction of ∂_τ⃗
  double weight;      // arclength weight
  bool on_gamma0;
  double theta;
};

struct QuadratureNode {
  cplx position;
  double weight;
  double boundary_distance;
  int ir;             // radial index
  int itheta;         // angular index
};

struct QuadratureGrid {
  std::vector<QuadratureNode> nodes;   // layout: ir * n_theta + itheta
  std::vector<double> radii;           // Gauss–Legendre radial nodes, ascending
  std::vector<double> radial_weights;  // matching GL weights on [0, R]
  int n_radial = 0;
  int n_theta = 0;
  double dtheta = 0.0;

  std::size_t index(int ir, int itheta) const {
    return static_cast<std::size_t>(ir) * n_theta + itheta;
  }
};

struct Domain {
  DomainSpec spec;
  std::vector<BoundaryPoint> boundary_points;
  QuadratureGrid quadrature;

  double radius() const { return spec.radius; }
  double inradius() const { return spec.radius; }
  cplx center() const { return {0.0, 0.0}; }

  std::size_t n_nodes() const { return quadrature.nodes.size(); }

  /// Coarsest grid spacing, used for clearance thresholds.
  double grid_spacing() const {
    double hr = 0.0;
    const auto& r = quadrature.radii;
    for (std::size_t i = 1; i < r.size(); ++i) hr = std::max(hr, r[i] - r[i - 1]);
    return std::max(hr, spec.radius * quadrature.dtheta);
  }

  bool contains(cplx z, double slack = 1e-12) const {
    return std::abs(z) <= spec.radius * (1.0 + slack);
  }
};

namespace detail {

/// Gauss–Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double xi = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * xi * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (xi * p0 - p1) / (xi * xi - 1.0);
      const double dx = p0 / pp;
      xi -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    x[i] = -xi;
    x[n - 1 - i] = xi;
    w[i] = 2.0 / ((1.0 - xi * xi) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

}  // namespace detail

/// Polar tensor quadrature (Gauss–Legendre radius x trapezoid angle) plus a
/// uniformly sampled boundary with Γ₀/Γ̃ flags by arc membership.
inline Domain build_domain(const DomainSpec& spec) {
  spec.validate();
  Domain dom;
  dom.spec = spec;

  const double R = spec.radius;

  // Boundary ring.
  dom.boundary_points.reserve(spec.boundary_nodes);
  const double dtheta_b = 2.0 * kPi / spec.boundary_nodes;
  int n_gamma0 = 0;
  for (int j = 0; j < spec.boundary_nodes; ++j) {
    BoundaryPoint bp;
    bp.theta = j * dtheta_b;
    const cplx dir = std::polar(1.0, bp.theta);
    bp.position = R * dir;
    bp.normal = dir;
    bp.tangent = cplx(dir.imag(), -dir.real());  // (ν₂, −ν₁)
    bp.weight = R * dtheta_b;
    const bool in_tilde =
        (bp.theta >= spec.gamma_tilde_begin && bp.theta < spec.gamma_tilde_end);
    bp.on_gamma0 = !in_tilde;
    n_gamma0 += bp.on_gamma0 ? 1 : 0;
    dom.boundary_points.push_back(bp);
  }
  if (n_gamma0 == 0 || n_gamma0 == spec.boundary_nodes)
    throw error("build_domain: boundary split left Gamma_0 or Gamma_tilde empty");

  // Interior grid.
  QuadratureGrid& g = dom.quadrature;
  g.n_radial = spec.radial_nodes;
  g.n_theta = spec.angular_nodes;
  g.dtheta = 2.0 * kPi / spec.angular_nodes;

  std::vector<double> gx, gw;
  detail::gauss_legendre(spec.radial_nodes, gx, gw);
  g.radii.resize(spec.radial_nodes);
  g.radial_weights.resize(spec.radial_nodes);
  for (int i = 0; i < spec.radial_nodes; ++i) {
    g.radii[i] = 0.5 * R * (gx[i] + 1.0);
    g.radial_weights[i] = 0.5 * R * gw[i];
  }

  g.nodes.reserve(static_cast<std::size_t>(g.n_radial) * g.n_theta);
  for (int ir = 0; ir < g.n_radial; ++ir) {
    const double r = g.radii[ir];
    for (int it = 0; it < g.n_theta; ++it) {
      QuadratureNode nd;
      nd.position = std::polar(r, it * g.dtheta);
      nd.weight = g.radial_weights[ir] * r * g.dtheta;
      nd.boundary_distance = R - r;
      nd.ir = ir;
      nd.itheta = it;
      g.nodes.push_back(nd);
    }
  }
  return dom;
}

/// Indices of quadrature nodes within distance ε of the boundary (the
/// collar O_ε). The complement is Ω \ O_ε.
inline std::vector<std::size_t> o_epsilon_mask(const Domain& dom, double eps) {
  if (!(eps > 0.0)) throw error("o_epsilon_mask: epsilon must be positive");
  if (eps >= dom.inradius())
    throw error("o_epsilon_mask: epsilon >= inradius, mask would cover the whole domain");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dom.quadrature.nodes.size(); ++i)
    if (dom.quadrature.nodes[i].boundary_distance <= eps) out.push_back(i);
  return out;
}

inline nlohmann::json to_json(const DomainSpec& s) {
  return nlohmann::json{
      {"kind", s.kind == DomainKind::unit_disk ? "unit_disk" : "scaled_disk"},
      {"radius", s.radius},
      {"gamma_tilde", {s.gamma_tilde_begin, s.gamma_tilde_end}},
      {"boundary_nodes", s.boundary_nodes},
      {"radial_nodes", s.radial_nodes},
      {"angular_nodes", s.angular_nodes}};
}

inline DomainSpec domain_spec_from_json(const nlohmann::json& j) {
  DomainSpec s;
  const std::string kind = j.value("kind", "unit_disk");
  if (kind == "unit_disk")
    s.kind = DomainKind::unit_disk;
  else if (kind == "scaled_disk")
    s.kind = DomainKind::scaled_disk;
  else
    throw error("domain spec: unknown kind '" + kind + "'");
  s.radius = j.value("radius", 1.0);
  if (j.contains("gamma_tilde")) {
    s.gamma_tilde_begin = j["gamma_tilde"].at(0).get<double>();
    s.gamma_tilde_end = j["gamma_tilde"].at(1).get<double>();
  }
  s.boundary_nodes = j.value("boundary_nodes", 256);
  s.radial_nodes = j.value("radial_nodes", 64);
  s.angular_nodes = j.value("angular_nodes", 256);
  s.validate();
  return s;
}

}  // namespace cgolab
