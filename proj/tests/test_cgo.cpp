#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cgolab/cgo.hpp"
#include "cgolab/holo.hpp"

using namespace cgolab;

namespace {

Domain small_domain() {
  DomainSpec s;
  s.radial_nodes = 48;
  s.angular_nodes = 256;
  s.boundary_nodes = 256;
  return build_domain(s);
}

CgoOptions thin_partition() {
  CgoOptions opt;
  opt.eps = 0.10;
  opt.rho = 0.10;
  return opt;
}

}  // namespace

TEST_CASE("hermite interpolation polynomials") {
  Domain dom = small_domain();
  const AnalyticField g = compact_bump(cplx(-0.3, 0.25), 0.35, cplx(1.0, 0.0));
  const GridFunction gv = sample(dom, g.value, true);

  SUBCASE("single point: quadratic matches the transform jets") {
    const std::vector<CriticalPoint> crit{{cplx(0.3, 0.2), cplx(1.0, 0.0), 0.0}};
    HermitePolynomial mz =
        hermite_polynomials(dom, gv, g, crit, HermitePolynomial::Kind::m1);
    CHECK_FALSE(mz.in_zbar());
    CHECK(mz.coeffs.size() == 3);
    CHECK(mz.jet_residual < 1e-10);
    const auto jets = dbar_inverse_jets(dom, gv.values, g, crit[0].z);
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(mz.derivative_in_w(crit[0].z, j) - jets[j]) < 1e-9);

    HermitePolynomial mzb =
        hermite_polynomials(dom, gv, g, crit, HermitePolynomial::Kind::m3);
    CHECK(mzb.in_zbar());
    const auto jets_b = dz_inverse_jets(dom, gv.values, g, crit[0].z);
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(mzb.derivative_in_w(std::conj(crit[0].z), j) - jets_b[j]) < 1e-9);
  }

  SUBCASE("two points: degree-5 polynomial carries all six jets") {
    const std::vector<CriticalPoint> crit{{cplx(0.3, 0.2), cplx(1.0, 0.0), 0.0},
                                          {cplx(-0.25, 0.1), cplx(1.0, 0.0), 0.1}};
    HermitePolynomial m =
        hermite_polynomials(dom, gv, g, crit, HermitePolynomial::Kind::m1);
    CHECK(m.coeffs.size() == 6);
    CHECK(m.jet_residual < 1e-8);
    for (const auto& cp : crit) {
      const auto jets = dbar_inverse_jets(dom, gv.values, g, cp.z);
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(m.derivative_in_w(cp.z, j) - jets[j]) < 1e-7);
    }
  }

  SUBCASE("confluent critical points rejected") {
    const std::vector<CriticalPoint> crit{{cplx(0.3, 0.2), cplx(1.0, 0.0), 0.0},
                                          {cplx(0.3, 0.2) + cplx(1e-9, 0.0),
                                           cplx(1.0, 0.0), 0.0}};
    CHECK_THROWS_AS(
        hermite_polynomials(dom, gv, g, crit, HermitePolynomial::Kind::m1), error);
  }

  SUBCASE("empty critical set rejected") {
    CHECK_THROWS_AS(hermite_polynomials(dom, gv, g, {}, HermitePolynomial::Kind::m1),
                    error);
  }
}

TEST_CASE("collar partition of unity") {
  Domain dom = small_domain();
  const std::vector<CriticalPoint> crit{{cplx(0.0, 0.3), cplx(1.0, 0.0), 0.0}};

  SUBCASE("sums to one, supported where announced") {
    Partition p = partition_e1e2(dom, crit, 0.15, 0.15);
    CHECK(p.width == doctest::Approx(0.375));  // min(2.5·eps, bd_crit − rho − eps)
    double worst = 0.0;
    for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
      worst = std::max(worst,
                       std::abs(p.e1.values[i] + p.e2.values[i] - cplx(1.0, 0.0)));
      const double bd = dom.radius() - std::abs(dom.quadrature.nodes[i].position);
      if (bd <= 0.15) CHECK(p.e1.values[i].real() == 0.0);
      if (bd >= 0.15 + p.width) CHECK(p.e1.values[i].real() == 1.0);
      CHECK(p.e1.values[i].real() >= 0.0);
      CHECK(p.e1.values[i].real() <= 1.0);
    }
    CHECK(worst < 1e-14);
  }

  SUBCASE("critical halo near the collar rejected") {
    const std::vector<CriticalPoint> close{{cplx(0.0, 0.8), cplx(1.0, 0.0), 0.0}};
    CHECK_THROWS_AS(partition_e1e2(dom, close, 0.15, 0.15), error);
  }

  SUBCASE("nonpositive radii rejected") {
    CHECK_THROWS_AS(partition_e1e2(dom, crit, 0.0, 0.1), error);
  }
}

TEST_CASE("corrector boundary fit") {
  Domain dom = small_domain();
  PhaseFunction Phi =
      phase_from_holomorphic(HolomorphicFunction::monomial(cplx{}, 2, 0.5), dom);

  SUBCASE("recovers a manufactured holomorphic pair") {
    const HolomorphicFunction c0(cplx{}, {cplx(0.4, -0.3), cplx(1.0, 2.0), cplx(0.0, 1.0)});
    const HolomorphicFunction c1(cplx{}, {cplx(-0.2, 0.1), cplx(0.5, -1.0)});
    auto datum = [&](cplx z) { return c0(z) + std::conj(c1(z)); };
    CorrectorPair fit = fit_correctors(dom, Phi, datum, 8, 1e-6);
    CHECK(fit.gamma0_misfit < 1e-8 * fit.datum_sup);
    for (double t : {1.1, 1.4, 1.8}) {  // Γ₀ angles, as multiples of π
      const cplx z = std::exp(cplx(0.0, t * kPi));
      CHECK(std::abs(fit.c0(z) + std::conj(fit.c1(z)) - datum(z)) < 1e-7);
    }
  }

  SUBCASE("zero datum gives zero correctors") {
    CorrectorPair fit = fit_correctors(dom, Phi, [](cplx) { return cplx{}; }, 8, 1e-2);
    CHECK(fit.datum_sup == 0.0);
    CHECK(std::abs(fit.c0(cplx(0.3, -0.4))) < 1e-12);
    CHECK(std::abs(fit.c1(cplx(0.3, -0.4))) < 1e-12);
  }

  SUBCASE("throws when the degree cannot meet the tolerance") {
    auto datum = [](cplx z) { return std::exp(3.0 * z.real()) * cplx(1.0, 0.0); };
    CHECK_THROWS_AS(fit_correctors(dom, Phi, datum, 0, 1e-3), error);
  }
}

TEST_CASE("cgo with zero potential is the pure leading layer") {
  Domain dom = small_domain();
  PhaseFunction Phi = build_flat_phase(dom, cplx(0.0, 0.55));
  const HolomorphicFunction a = HolomorphicFunction::constant(cplx(0.0, 1.0));
  const AnalyticField q0 = constant_field(cplx{});
  CGOSolution c = build_cgo(q0, Phi, a, 20.0, 1, dom, thin_partition());

  CHECK(sup_norm(c.u11) == 0.0);
  CHECK(c.norm_U < 1e-6 * c.norm_leading);
  CHECK(c.pde_residual < 1e-4 * l2_norm(c.total));
  CHECK(c.gamma0_trace_sup < 1e-10 * c.total_sup);
  CHECK(c.corrector_misfit == 0.0);
  double dev = 0.0, lead = 0.0;
  for (std::size_t i = 0; i < dom.n_nodes(); ++i) {
    dev = std::max(dev, std::abs(c.total.values[i] - c.leading.values[i]));
    lead = std::max(lead, std::abs(c.leading.values[i]));
  }
  CHECK(dev < 1e-6 * lead);
}

TEST_CASE("cgo guards") {
  Domain dom = small_domain();
  PhaseFunction Phi = build_flat_phase(dom, cplx(0.0, 0.55));
  const HolomorphicFunction a = HolomorphicFunction::constant(cplx(0.0, 1.0));
  const AnalyticField q0 = constant_field(cplx{});

  SUBCASE("oscillation budget enforced") {
    CHECK_THROWS_AS(build_cgo(q0, Phi, a, 500.0, 1, dom, thin_partition()), error);
  }

  SUBCASE("sign restricted to ±1") {
    CHECK_THROWS_AS(build_cgo(q0, Phi, a, 10.0, 2, dom, thin_partition()), error);
  }
}
