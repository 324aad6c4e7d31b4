#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "cgolab/geometry.hpp"

namespace cgolab {

/// Complex field sampled on the domain quadrature grid.
struct GridFunction {
  const Domain* domain = nullptr;
  std::vector<cplx> values;                 // one per quadrature node
  std::vector<cplx> boundary_trace;         // optional, one per boundary node

  GridFunction() = default;
  explicit GridFunction(const Domain& dom)
      : domain(&dom), values(dom.n_nodes(), cplx{}) {}

  cplx& operator[](std::size_t i) { return values[i]; }
  cplx operator[](std::size_t i) const { return values[i]; }

  void check_finite(const char* who) const {
    for (const cplx& v : values)
      if (!is_finite(v)) throw error(std::string(who) + ": non-finite value in grid function");
  }
};

inline GridFunction sample(const Domain& dom, const std::function<cplx(cplx)>& f,
                           bool with_boundary = false) {
  GridFunction g(dom);
  for (std::size_t i = 0; i < dom.n_nodes(); ++i)
    g.values[i] = f(dom.quadrature.nodes[i].position);
  if (with_boundary) {
    g.boundary_trace.resize(dom.boundary_points.size());
    for (std::size_t i = 0; i < dom.boundary_points.size(); ++i)
      g.boundary_trace[i] = f(dom.boundary_points[i].position);
  }
  return g;
}

// ---- reductions (all deterministic via pairwise summation) ----

inline cplx integral(const GridFunction& g) {
  std::vector<cplx> terms(g.values.size());
  for (std::size_t i = 0; i < terms.size(); ++i)
    terms[i] = g.values[i] * g.domain->quadrature.nodes[i].weight;
  return pairwise_sum(terms);
}

inline cplx inner_product(const GridFunction& f, const GridFunction& g) {
  std::vector<cplx> terms(f.values.size());
  for (std::size_t i = 0; i < terms.size(); ++i)
    terms[i] = f.values[i] * std::conj(g.values[i]) * f.domain->quadrature.nodes[i].weight;
  return pairwise_sum(terms);
}

inline double l2_norm(const GridFunction& g) {
  std::vector<double> terms(g.values.size());
  for (std::size_t i = 0; i < terms.size(); ++i)
    terms[i] = std::norm(g.values[i]) * g.domain->quadrature.nodes[i].weight;
  return std::sqrt(std::max(0.0, pairwise_sum(terms)));
}

inline double l2_norm_on(const GridFunction& g, const std::vector<std::size_t>& mask) {
  std::vector<double> terms(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    terms[i] = std::norm(g.values[mask[i]]) * g.domain->quadrature.nodes[mask[i]].weight;
  return std::sqrt(std::max(0.0, pairwise_sum(terms)));
}

inline double sup_norm(const GridFunction& g) {
  double m = 0.0;
  for (const cplx& v : g.values) m = std::max(m, std::abs(v));
  return m;
}

inline double sup_norm_on(const GridFunction& g, const std::vector<std::size_t>& mask) {
  double m = 0.0;
  for (std::size_t i : mask) m = std::max(m, std::abs(g.values[i]));
  return m;
}

// ---- pointwise algebra ----

inline GridFunction map2(const GridFunction& a, const GridFunction& b,
                         const std::function<cplx(cplx, cplx)>& op) {
  GridFunction out(*a.domain);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = op(a.values[i], b.values[i]);
  return out;
}

inline GridFunction operator+(const GridFunction& a, const GridFunction& b) {
  return map2(a, b, [](cplx x, cplx y) { return x + y; });
}
inline GridFunction operator-(const GridFunction& a, const GridFunction& b) {
  return map2(a, b, [](cplx x, cplx y) { return x - y; });
}
inline GridFunction operator*(const GridFunction& a, const GridFunction& b) {
  return map2(a, b, [](cplx x, cplx y) { return x * y; });
}
inline GridFunction operator*(cplx s, const GridFunction& a) {
  GridFunction out(*a.domain);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = s * a.values[i];
  return out;
}
inline GridFunction conjugate(const GridFunction& a) {
  GridFunction out(*a.domain);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = std::conj(a.values[i]);
  return out;
}

// ---- finite differences on the polar grid ----

namespace detail {

/// Lagrange differentiation weights at xe for three distinct abscissae.
inline void three_point_weights(double xa, double xb, double xc, double xe,
                                double w1[3], double w2[3]) {
  const double dab = xa - xb, dac = xa - xc, dbc = xb - xc;
  w1[0] = (2.0 * xe - xb - xc) / (dab * dac);
  w1[1] = (2.0 * xe - xa - xc) / (-dab * dbc);
  w1[2] = (2.0 * xe - xa - xb) / (dac * dbc);
  w2[0] = 2.0 / (dab * dac);
  w2[1] = 2.0 / (-dab * dbc);
  w2[2] = 2.0 / (dac * dbc);
}

/// Radial stencils for the Gauss–Legendre rings. The innermost ring borrows
/// the antipodal node (same ring, angle + π) as a sample at radius −r₀; the
/// outermost ring is one-sided.
struct RadialStencils {
  struct Row {
    int ring[3];
    bool antipodal[3];
    double w1[3];
    double w2[3];
  };
  std::vector<Row> rows;

  explicit RadialStencils(const Domain& dom) {
    const auto& r = dom.quadrature.radii;
    const int n = static_cast<int>(r.size());
    if (dom.quadrature.n_theta % 2 != 0)
      throw error("radial stencils require an even angular node count");
    rows.resize(n);
    for (int i = 0; i < n; ++i) {
      Row& row = rows[i];
      double xs[3];
      if (i == 0) {
        xs[0] = -r[0]; xs[1] = r[0]; xs[2] = r[1];
        row.ring[0] = 0; row.ring[1] = 0; row.ring[2] = 1;
        row.antipodal[0] = true; row.antipodal[1] = false; row.antipodal[2] = false;
      } else if (i == n - 1) {
        xs[0] = r[n - 3]; xs[1] = r[n - 2]; xs[2] = r[n - 1];
        row.ring[0] = n - 3; row.ring[1] = n - 2; row.ring[2] = n - 1;
        row.antipodal[0] = row.antipodal[1] = row.antipodal[2] = false;
      } else {
        xs[0] = r[i - 1]; xs[1] = r[i]; xs[2] = r[i + 1];
        row.ring[0] = i - 1; row.ring[1] = i; row.ring[2] = i + 1;
        row.antipodal[0] = row.antipodal[1] = row.antipodal[2] = false;
      }
      three_point_weights(xs[0], xs[1], xs[2], r[i], row.w1, row.w2);
    }
  }
};

}  // namespace detail

/// order = 1 or 2.
inline GridFunction radial_derivative(const GridFunction& g, int order) {
  const Domain& dom = *g.domain;
  const detail::RadialStencils st(dom);
  const int nt = dom.quadrature.n_theta;
  const int nr = dom.quadrature.n_radial;
  GridFunction out(dom);
  for (int ir = 0; ir < nr; ++ir) {
    const auto& row = st.rows[ir];
    const double* w = (order == 1) ? row.w1 : row.w2;
    for (int it = 0; it < nt; ++it) {
      cplx acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        const int jt = row.antipodal[k] ? (it + nt / 2) % nt : it;
        acc += w[k] * g.values[dom.quadrature.index(row.ring[k], jt)];
      }
      out.values[dom.quadrature.index(ir, it)] = acc;
    }
  }
  return out;
}

inline GridFunction theta_derivative(const GridFunction& g, int order) {
  const Domain& dom = *g.domain;
  const int nt = dom.quadrature.n_theta;
  const int nr = dom.quadrature.n_radial;
  const double h = dom.quadrature.dtheta;
  GridFunction out(dom);
  for (int ir = 0; ir < nr; ++ir) {
    for (int it = 0; it < nt; ++it) {
      const cplx vm = g.values[dom.quadrature.index(ir, (it + nt - 1) % nt)];
      const cplx v0 = g.values[dom.quadrature.index(ir, it)];
      const cplx vp = g.values[dom.quadrature.index(ir, (it + 1) % nt)];
      out.values[dom.quadrature.index(ir, it)] =
          (order == 1) ? (vp - vm) / (2.0 * h) : (vp - 2.0 * v0 + vm) / (h * h);
    }
  }
  return out;
}

/// Cartesian first derivatives from the polar chain rule.
inline std::pair<GridFunction, GridFunction> cartesian_gradient(const GridFunction& g) {
  const Domain& dom = *g.domain;
  const GridFunction gr = radial_derivative(g, 1);
  const GridFunction gt = theta_derivative(g, 1);
  GridFunction dx1(dom), dx2(dom);
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const auto& nd = dom.quadrature.nodes[i];
    const double r = dom.quadrature.radii[nd.ir];
    const double th = nd.itheta * dom.quadrature.dtheta;
    const double c = std::cos(th), s = std::sin(th);
    dx1.values[i] = c * gr.values[i] - s / r * gt.values[i];
    dx2.values[i] = s * gr.values[i] + c / r * gt.values[i];
  }
  return {dx1, dx2};
}

inline GridFunction dz_fd(const GridFunction& g) {
  auto [dx1, dx2] = cartesian_gradient(g);
  return map2(dx1, dx2, [](cplx a, cplx b) { return 0.5 * (a - cplx(0, 1) * b); });
}

inline GridFunction dbar_fd(const GridFunction& g) {
  auto [dx1, dx2] = cartesian_gradient(g);
  return map2(dx1, dx2, [](cplx a, cplx b) { return 0.5 * (a + cplx(0, 1) * b); });
}

inline GridFunction laplacian_fd(const GridFunction& g) {
  const Domain& dom = *g.domain;
  const GridFunction gr = radial_derivative(g, 1);
  const GridFunction grr = radial_derivative(g, 2);
  const GridFunction gtt = theta_derivative(g, 2);
  GridFunction out(dom);
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const double r = dom.quadrature.radii[dom.quadrature.nodes[i].ir];
    out.values[i] = grr.values[i] + gr.values[i] / r + gtt.values[i] / (r * r);
  }
  return out;
}

/// Spectral polar Laplacian: trigonometric differentiation in θ (exact for
/// resolved angular modes) and global barycentric Lagrange differentiation on
/// the Gauss–Legendre radii. Resolves oscillatory fields that defeat the
/// second-order stencils, provided the oscillation budget holds.
inline GridFunction laplacian_spectral(const GridFunction& g) {
  const Domain& dom = *g.domain;
  const int nr = dom.quadrature.n_radial, nt = dom.quadrature.n_theta;
  const auto& r = dom.quadrature.radii;

  // barycentric weights via logs (plain products underflow for nr ~ 64)
  std::vector<double> lw(nr, 0.0);
  std::vector<double> sgn(nr, 1.0);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nr; ++j) {
      if (j == i) continue;
      lw[i] -= std::log(std::abs(r[i] - r[j]));
      if (r[i] < r[j]) sgn[i] = -sgn[i];
    }
  std::vector<double> D1(static_cast<std::size_t>(nr) * nr, 0.0);
  for (int i = 0; i < nr; ++i) {
    double diag = 0.0;
    for (int j = 0; j < nr; ++j) {
      if (j == i) continue;
      const double d = (sgn[j] / sgn[i]) * std::exp(lw[j] - lw[i]) / (r[i] - r[j]);
      D1[static_cast<std::size_t>(i) * nr + j] = d;
      diag -= d;
    }
    D1[static_cast<std::size_t>(i) * nr + i] = diag;
  }
  std::vector<double> D2(static_cast<std::size_t>(nr) * nr, 0.0);
  for (int i = 0; i < nr; ++i)
    for (int k = 0; k < nr; ++k) {
      const double a = D1[static_cast<std::size_t>(i) * nr + k];
      if (a == 0.0) continue;
      for (int j = 0; j < nr; ++j)
        D2[static_cast<std::size_t>(i) * nr + j] += a * D1[static_cast<std::size_t>(k) * nr + j];
    }

  // periodic second-derivative kernel a(d): u_θθ(θ_j) = Σ_l a(j−l) u_l
  const double dtheta = dom.quadrature.dtheta;
  std::vector<double> ker(nt, 0.0);
  for (int d = 0; d < nt; ++d) {
    double s = 0.0;
    for (int k = 1; k < nt / 2; ++k)
      s += 2.0 * k * k * std::cos(k * d * dtheta);
    s += (nt / 2.0) * (nt / 2.0) * std::cos((nt / 2.0) * d * dtheta);
    ker[d] = -s / nt;
  }

  GridFunction out(dom);
  std::vector<cplx> col(nr), c1(nr), c2(nr);
  for (int j = 0; j < nt; ++j) {
    for (int i = 0; i < nr; ++i) col[i] = g.values[dom.quadrature.index(i, j)];
    for (int i = 0; i < nr; ++i) {
      cplx s1{}, s2{};
      for (int k = 0; k < nr; ++k) {
        s1 += D1[static_cast<std::size_t>(i) * nr + k] * col[k];
        s2 += D2[static_cast<std::size_t>(i) * nr + k] * col[k];
      }
      c1[i] = s1;
      c2[i] = s2;
    }
    for (int i = 0; i < nr; ++i)
      out.values[dom.quadrature.index(i, j)] = c2[i] + c1[i] / r[i];
  }
  std::vector<cplx> ring(nt);
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nt; ++j) ring[j] = g.values[dom.quadrature.index(i, j)];
    const double r2 = r[i] * r[i];
    for (int j = 0; j < nt; ++j) {
      cplx s{};
      for (int l = 0; l < nt; ++l) s += ker[(j - l + nt) % nt] * ring[l];
      out.values[dom.quadrature.index(i, j)] += s / r2;
    }
  }
  return out;
}

/// Spectral first derivatives ∂_z, ∂_z̄ in polar form
///   ∂_z = e^{−iθ}(∂_r − i∂_θ/r)/2,  ∂_z̄ = e^{iθ}(∂_r + i∂_θ/r)/2,
/// with the same global barycentric radial and trigonometric angular
/// differentiation as laplacian_spectral.
inline std::pair<GridFunction, GridFunction> dz_dbar_spectral(const GridFunction& g) {
  const Domain& dom = *g.domain;
  const int nr = dom.quadrature.n_radial, nt = dom.quadrature.n_theta;
  const auto& r = dom.quadrature.radii;

  std::vector<double> lw(nr, 0.0);
  std::vector<double> sgn(nr, 1.0);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nr; ++j) {
      if (j == i) continue;
      lw[i] -= std::log(std::abs(r[i] - r[j]));
      if (r[i] < r[j]) sgn[i] = -sgn[i];
    }
  std::vector<double> D1(static_cast<std::size_t>(nr) * nr, 0.0);
  for (int i = 0; i < nr; ++i) {
    double diag = 0.0;
    for (int j = 0; j < nr; ++j) {
      if (j == i) continue;
      const double d = (sgn[j] / sgn[i]) * std::exp(lw[j] - lw[i]) / (r[i] - r[j]);
      D1[static_cast<std::size_t>(i) * nr + j] = d;
      diag -= d;
    }
    D1[static_cast<std::size_t>(i) * nr + i] = diag;
  }

  // periodic first-derivative kernel (Nyquist mode dropped, odd kernel)
  const double dtheta = dom.quadrature.dtheta;
  std::vector<double> ker(nt, 0.0);
  for (int d = 0; d < nt; ++d) {
    double s = 0.0;
    for (int k = 1; k < nt / 2; ++k) s += -2.0 * k * std::sin(k * d * dtheta);
    ker[d] = s / nt;
  }

  GridFunction gr(dom), gt(dom);
  std::vector<cplx> col(nr);
  for (int j = 0; j < nt; ++j) {
    for (int i = 0; i < nr; ++i) col[i] = g.values[dom.quadrature.index(i, j)];
    for (int i = 0; i < nr; ++i) {
      cplx s1{};
      for (int k = 0; k < nr; ++k)
        s1 += D1[static_cast<std::size_t>(i) * nr + k] * col[k];
      gr.values[dom.quadrature.index(i, j)] = s1;
    }
  }
  std::vector<cplx> ring(nt);
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nt; ++j) ring[j] = g.values[dom.quadrature.index(i, j)];
    for (int j = 0; j < nt; ++j) {
      cplx s{};
      for (int l = 0; l < nt; ++l) s += ker[(j - l + nt) % nt] * ring[l];
      gt.values[dom.quadrature.index(i, j)] = s;
    }
  }

  GridFunction dz(dom), dbar(dom);
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const auto& nd = dom.quadrature.nodes[i];
    const double ri = dom.quadrature.radii[nd.ir];
    const double th = nd.itheta * dtheta;
    const cplx em = std::exp(cplx(0.0, -th));
    const cplx tpart = cplx(0.0, 1.0) * gt.values[i] / ri;
    dz.values[i] = 0.5 * em * (gr.values[i] - tpart);
    dbar.values[i] = 0.5 * std::conj(em) * (gr.values[i] + tpart);
  }
  return {dz, dbar};
}

inline GridFunction dz_spectral(const GridFunction& g) { return dz_dbar_spectral(g).first; }
inline GridFunction dbar_spectral(const GridFunction& g) { return dz_dbar_spectral(g).second; }

/// Nodes away from the boundary ring and the center, where the centered
/// stencils are clean; used by residual checks.
inline std::vector<std::size_t> interior_stencil_mask(const Domain& dom, int ring_margin = 2) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    const int ir = dom.quadrature.nodes[i].ir;
    if (ir >= ring_margin && ir < dom.quadrature.n_radial - ring_margin) out.push_back(i);
  }
  return out;
}

// ---- serialization ----

inline void write_csv(const GridFunction& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw error("write_csv: cannot open " + path);
  out << "x1,x2,re,im\n";
  char buf[160];
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const cplx z = g.domain->quadrature.nodes[i].position;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", z.real(), z.imag(),
                  g.values[i].real(), g.values[i].imag());
    out << buf;
  }
}

inline GridFunction read_csv(const Domain& dom, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("read_csv: cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  GridFunction g(dom);
  std::size_t i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (i >= g.values.size()) throw error("read_csv: more rows than grid nodes");
    double x1, x2, re, im;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg", &x1, &x2, &re, &im) != 4)
      throw error("read_csv: malformed row '" + line + "'");
    g.values[i++] = cplx(re, im);
  }
  if (i != g.values.size()) throw error("read_csv: fewer rows than grid nodes");
  return g;
}

}  // namespace cgolab
