#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cgolab/catalog.hpp"
#include "cgolab/gridfn.hpp"
#include "cgolab/holomorphic.hpp"
#include "cgolab/polynomial2.hpp"

using namespace cgolab;

static Domain make_domain() {
  DomainSpec s;
  s.gamma_tilde_begin = 0.0;
  s.gamma_tilde_end = kPi;
  return build_domain(s);
}

TEST_CASE("finite differences reproduce wirtinger derivatives of smooth fields") {
  Domain dom = make_domain();
  // f = z² z̄ has ∂_z f = 2 z z̄, ∂_z̄ f = z², Δf = 4∂_z∂_z̄ f = 8z.
  GridFunction f = sample(dom, [](cplx z) { return z * z * std::conj(z); });
  GridFunction dzf = dz_fd(f);
  GridFunction dbf = dbar_fd(f);
  GridFunction lap = laplacian_fd(f);
  const auto mask = interior_stencil_mask(dom);
  double e1 = 0, e2 = 0, e3 = 0;
  for (auto i : mask) {
    const cplx z = dom.quadrature.nodes[i].position;
    e1 = std::max(e1, std::abs(dzf.values[i] - 2.0 * z * std::conj(z)));
    e2 = std::max(e2, std::abs(dbf.values[i] - z * z));
    e3 = std::max(e3, std::abs(lap.values[i] - 8.0 * z));
  }
  CHECK(e1 < 2e-3);
  CHECK(e2 < 2e-3);
  CHECK(e3 < 2e-2);

  // f = z z̄ = r² is exactly representable by the stencils: ∂_z f = z̄, Δf = 4.
  GridFunction g = sample(dom, [](cplx z) { return z * std::conj(z); });
  GridFunction dzg = dz_fd(g);
  GridFunction lapg = laplacian_fd(g);
  double ex1 = 0, ex2 = 0;
  for (auto i : mask) {
    const cplx z = dom.quadrature.nodes[i].position;
    ex1 = std::max(ex1, std::abs(dzg.values[i] - std::conj(z)));
    ex2 = std::max(ex2, std::abs(lapg.values[i] - 4.0));
  }
  CHECK(ex1 < 1e-11);
  CHECK(ex2 < 1e-9);
}

TEST_CASE("finite differences are second order on a generic smooth field") {
  auto residual = [](int nr, int nt) {
    DomainSpec s;
    s.radial_nodes = nr;
    s.angular_nodes = nt;
    s.boundary_nodes = 256;
    Domain dom = build_domain(s);
    GridFunction f = sample(dom, [](cplx z) { return std::exp(z) * std::conj(z) * std::conj(z); });
    GridFunction dbf = dbar_fd(f);
    const auto mask = interior_stencil_mask(dom);
    double e = 0;
    for (auto i : mask) {
      const cplx z = dom.quadrature.nodes[i].position;
      e = std::max(e, std::abs(dbf.values[i] - 2.0 * std::exp(z) * std::conj(z)));
    }
    return e;
  };
  const double coarse = residual(32, 128);
  const double fine = residual(64, 256);
  CHECK(fine < 0.35 * coarse);  // ~4x drop expected at second order
}

TEST_CASE("monomial cauchy transform closed forms satisfy dbar T = g") {
  for (int m = 0; m <= 3; ++m)
    for (int n = 0; n <= 3; ++n) {
      Polynomial2 g;
      g.add(m, n, cplx(0.7, -0.3));
      const Polynomial2 T = g.cauchy_transform(1.0);
      const Polynomial2 resid = T.dbar() - g;
      for (cplx z : {cplx(0.3, 0.2), cplx(-0.5, 0.1), cplx(0.0, -0.8)})
        CHECK(std::abs(resid.eval(z)) < 1e-14);
    }
}

TEST_CASE("monomial cauchy transform matches direct quadrature") {
  DomainSpec s;
  s.radial_nodes = 96;
  s.angular_nodes = 384;
  Domain dom = build_domain(s);
  Polynomial2 g;
  g.add(2, 0, 1.0);  // ζ², the branch with the reflection term
  const Polynomial2 T = g.cauchy_transform(1.0);
  const cplx z0(0.35, -0.2);
  // direct singular quadrature with the smooth-remainder split:
  // ∫ g(ζ)/(ζ−z) = ∫ (g(ζ)−g(z))/(ζ−z) + g(z)·∫ 1/(ζ−z)
  std::vector<cplx> terms;
  const cplx gz = g.eval(z0);
  for (const auto& nd : dom.quadrature.nodes) {
    const cplx d = nd.position - z0;
    if (std::abs(d) < 1e-13) continue;
    terms.push_back((g.eval(nd.position) - gz) / d * nd.weight);
  }
  const cplx direct = -pairwise_sum(terms) / kPi + gz * std::conj(z0);
  CHECK(std::abs(direct - T.eval(z0)) < 2e-3);
}

TEST_CASE("holomorphic function algebra is exact") {
  HolomorphicFunction f(cplx(0.2, 0.1), {cplx(1, 0), cplx(0, 2), cplx(3, 0)});
  const cplx z(0.4, -0.3);
  SUBCASE("recentring preserves values and derivatives") {
    HolomorphicFunction g = f.recentred(cplx(-0.1, 0.5));
    CHECK(std::abs(f(z) - g(z)) < 1e-14);
    CHECK(std::abs(f.derivative_at(z, 1) - g.derivative_at(z, 1)) < 1e-14);
    CHECK(std::abs(f.derivative_at(z, 2) - g.derivative_at(z, 2)) < 1e-14);
  }
  SUBCASE("product and sum") {
    HolomorphicFunction p = f * f + f * cplx(2.0);
    CHECK(std::abs(p(z) - (f(z) * f(z) + 2.0 * f(z))) < 1e-14);
  }
  SUBCASE("polynomial2 view") {
    const Polynomial2 p = f.as_polynomial2();
    CHECK(std::abs(p.eval(z) - f(z)) < 1e-14);
  }
}

TEST_CASE("poly_from_roots expands correctly") {
  const auto p = poly_from_roots({cplx(0.5, 0), cplx(-0.5, 0)});
  // (z−1/2)(z+1/2) = z² − 1/4
  CHECK(std::abs(p[0] - cplx(-0.25, 0)) < 1e-15);
  CHECK(std::abs(p[1]) < 1e-15);
  CHECK(std::abs(p[2] - cplx(1, 0)) < 1e-15);
}

static void check_field_derivatives(const AnalyticField& f, cplx z0) {
  const double h = 1e-5;
  auto num_dz = [&](const std::function<cplx(cplx)>& g) {
    const cplx gx = (g(z0 + h) - g(z0 - h)) / (2 * h);
    const cplx gy = (g(z0 + cplx(0, h)) - g(z0 - cplx(0, h))) / (2 * h);
    return 0.5 * (gx - cplx(0, 1) * gy);
  };
  auto num_dbar = [&](const std::function<cplx(cplx)>& g) {
    const cplx gx = (g(z0 + h) - g(z0 - h)) / (2 * h);
    const cplx gy = (g(z0 + cplx(0, h)) - g(z0 - cplx(0, h))) / (2 * h);
    return 0.5 * (gx + cplx(0, 1) * gy);
  };
  CHECK(std::abs(f.dz(z0) - num_dz(f.value)) < 1e-7);
  CHECK(std::abs(f.dbar(z0) - num_dbar(f.value)) < 1e-7);
  CHECK(std::abs(f.dzz(z0) - num_dz(f.dz)) < 1e-7);
  CHECK(std::abs(f.dzbar(z0) - num_dbar(f.dz)) < 1e-7);
  CHECK(std::abs(f.dbarbar(z0) - num_dbar(f.dbar)) < 1e-7);
}

TEST_CASE("catalog fields have consistent analytic derivatives") {
  check_field_derivatives(gaussian_bump(cplx(0.2, -0.1), 0.5, 1.3), cplx(0.3, 0.25));
  check_field_derivatives(exp_linear(1.0), cplx(0.1, 0.4));
  check_field_derivatives(one_plus_x1_sq_sq(), cplx(-0.3, 0.2));
  check_field_derivatives(compact_bump(cplx(0, 0), 0.7, 2.0), cplx(0.2, 0.1));
  const AnalyticField prod =
      from_holomorphic(HolomorphicFunction(cplx{}, {cplx(1, 0), cplx(0, 1), cplx(0.5, 0)})) *
      gaussian_bump(cplx(0.1, 0.1), 0.6, 1.0);
  check_field_derivatives(prod, cplx(0.25, -0.15));
  check_field_derivatives(conjugated(prod), cplx(0.25, -0.15));
}

TEST_CASE("conductivity catalog sanity via the laplacian") {
  // γ = e^{x1}: Δ√γ/√γ = 1/4 exactly.
  const AnalyticField g = exp_linear(1.0);
  const cplx z(0.2, -0.4);
  const cplx q = g.lap(z) / (2.0 * g.value(z)) -
                 [&] {
                   auto [gx, gy] = g.grad(z);
                   return (gx * gx + gy * gy) / (4.0 * g.value(z) * g.value(z));
                 }();
  CHECK(std::abs(q - cplx(0.25, 0)) < 1e-12);
}

TEST_CASE("grid function csv round trip") {
  Domain dom = make_domain();
  GridFunction f = sample(dom, [](cplx z) { return z * z + cplx(0, 1); });
  const std::string path = "/tmp/cgolab_test_gridfn.csv";
  write_csv(f, path);
  GridFunction g = read_csv(dom, path);
  for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(f.values[i] == g.values[i]);
}
