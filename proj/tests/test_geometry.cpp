#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cgolab/geometry.hpp"

using namespace cgolab;

static DomainSpec default_spec() {
  DomainSpec s;
  s.gamma_tilde_begin = 0.0;
  s.gamma_tilde_end = kPi;
  return s;
}

TEST_CASE("boundary split for arc [0,pi) is symmetric") {
  Domain dom = build_domain(default_spec());
  int n0 = 0, nt = 0;
  for (const auto& bp : dom.boundary_points) (bp.on_gamma0 ? n0 : nt)++;
  CHECK(n0 == 128);
  CHECK(nt == 128);
}

TEST_CASE("quadrature weights sum to the disk area") {
  Domain dom = build_domain(default_spec());
  std::vector<double> w;
  for (const auto& nd : dom.quadrature.nodes) w.push_back(nd.weight);
  CHECK(pairwise_sum(w) == doctest::Approx(kPi).epsilon(1e-8));
}

TEST_CASE("boundary length for radius 2 disk") {
  DomainSpec s = default_spec();
  s.kind = DomainKind::scaled_disk;
  s.radius = 2.0;
  Domain dom = build_domain(s);
  double len = 0.0;
  for (const auto& bp : dom.boundary_points) len += bp.weight;
  CHECK(std::abs(len - 4.0 * kPi) < 1e-10);
}

TEST_CASE("polynomial moments up to total degree 6") {
  Domain dom = build_domain(default_spec());
  // ∫ x1^a x2^b over the unit disk = 2·B((a+1)/2,(b+1)/2)/(a+b+2) for a,b even.
  auto moment = [&](int a, int b) {
    std::vector<double> terms;
    for (const auto& nd : dom.quadrature.nodes)
      terms.push_back(std::pow(nd.position.real(), a) * std::pow(nd.position.imag(), b) *
                      nd.weight);
    return pairwise_sum(terms);
  };
  auto exact = [](int a, int b) {
    if (a % 2 || b % 2) return 0.0;
    const double num = std::tgamma((a + 1) / 2.0) * std::tgamma((b + 1) / 2.0);
    return 2.0 * num / std::tgamma((a + b + 2) / 2.0) / (a + b + 2);
  };
  for (int a = 0; a <= 6; ++a)
    for (int b = 0; a + b <= 6; ++b) {
      const double e = exact(a, b);
      if (e == 0.0)
        CHECK(std::abs(moment(a, b)) < 1e-10);
      else
        CHECK(moment(a, b) == doctest::Approx(e).epsilon(1e-8));
    }
}

TEST_CASE("normals and tangents are unit and orthogonal") {
  Domain dom = build_domain(default_spec());
  for (const auto& bp : dom.boundary_points) {
    CHECK(std::abs(std::abs(bp.normal) - 1.0) < 1e-14);
    CHECK(std::abs(std::abs(bp.tangent) - 1.0) < 1e-14);
    const double dot = bp.normal.real() * bp.tangent.real() + bp.normal.imag() * bp.tangent.imag();
    CHECK(std::abs(dot) < 1e-14);
  }
}

TEST_CASE("collar mask matches annulus area") {
  Domain dom = build_domain(default_spec());
  auto mask_area = [&](double eps) {
    const auto mask = o_epsilon_mask(dom, eps);
    std::vector<double> w;
    for (auto i : mask) w.push_back(dom.quadrature.nodes[i].weight);
    return pairwise_sum(w);
  };
  // A binary nodal mask resolves the cut radius only to the local radial
  // spacing (~2e-2 at 64 Gauss nodes), so that is the honest tolerance.
  CHECK(mask_area(0.5) == doctest::Approx(kPi - kPi * 0.25).epsilon(2e-2));
  CHECK(mask_area(0.25) == doctest::Approx(kPi - kPi * 0.75 * 0.75).epsilon(2e-2));
}

TEST_CASE("validation rejects bad specs") {
  DomainSpec s = default_spec();
  s.boundary_nodes = 32;
  CHECK_THROWS_AS(build_domain(s), error);
  s = default_spec();
  s.gamma_tilde_begin = 1.0;
  s.gamma_tilde_end = 0.5;
  CHECK_THROWS_AS(build_domain(s), error);
  Domain dom = build_domain(default_spec());
  CHECK_THROWS_AS(o_epsilon_mask(dom, 1.5), error);
  CHECK_THROWS_AS(o_epsilon_mask(dom, 0.0), error);
}

TEST_CASE("domain spec json round trip") {
  DomainSpec s = default_spec();
  const auto j = to_json(s);
  const DomainSpec t = domain_spec_from_json(j);
  CHECK(t.radius == s.radius);
  CHECK(t.gamma_tilde_begin == s.gamma_tilde_begin);
  CHECK(t.gamma_tilde_end == s.gamma_tilde_end);
  CHECK(t.boundary_nodes == s.boundary_nodes);
}
