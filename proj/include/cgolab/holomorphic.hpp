#pragma once

#include <vector>

#include <json.hpp>

#include "cgolab/common.hpp"
#include "cgolab/polynomial2.hpp"

namespace cgolab {

/// Finite power series about a center point. Evaluation and all z-derivatives
/// are exact polynomial operations; the ∂_z̄ derivative is identically zero by
/// representation.
class HolomorphicFunction {
 public:
  HolomorphicFunction() : center_(0.0), coef_{cplx{}} {}
  HolomorphicFunction(cplx center, std::vector<cplx> coef)
      : center_(center), coef_(std::move(coef)) {
    if (coef_.empty()) coef_.push_back(cplx{});
  }

  static HolomorphicFunction constant(cplx c) { return {cplx{}, {c}}; }
  /// c·(z−z₀)^k
  static HolomorphicFunction monomial(cplx z0, int k, cplx c = 1.0) {
    std::vector<cplx> v(k + 1, cplx{});
    v[k] = c;
    return {z0, std::move(v)};
  }

  cplx center() const { return center_; }
  const std::vector<cplx>& coefficients() const { return coef_; }
  int degree() const { return static_cast<int>(coef_.size()) - 1; }

  cplx operator()(cplx z) const {
    const cplx w = z - center_;
    cplx acc = 0.0;
    for (std::size_t k = coef_.size(); k-- > 0;) acc = acc * w + coef_[k];
    return acc;
  }

  HolomorphicFunction derivative() const {
    if (coef_.size() == 1) return constant(0.0);
    std::vector<cplx> d(coef_.size() - 1);
    for (std::size_t k = 1; k < coef_.size(); ++k) d[k - 1] = double(k) * coef_[k];
    return {center_, std::move(d)};
  }

  /// j-th z-derivative value, exact.
  cplx derivative_at(cplx z, int j) const {
    HolomorphicFunction f = *this;
    for (int i = 0; i < j; ++i) f = f.derivative();
    return f(z);
  }

  HolomorphicFunction operator+(const HolomorphicFunction& o) const {
    HolomorphicFunction a = recentred(cplx{}), b = o.recentred(cplx{});
    std::vector<cplx> s(std::max(a.coef_.size(), b.coef_.size()), cplx{});
    for (std::size_t k = 0; k < a.coef_.size(); ++k) s[k] += a.coef_[k];
    for (std::size_t k = 0; k < b.coef_.size(); ++k) s[k] += b.coef_[k];
    return {cplx{}, std::move(s)};
  }

  HolomorphicFunction operator*(cplx s) const {
    std::vector<cplx> v = coef_;
    for (cplx& c : v) c *= s;
    return {center_, std::move(v)};
  }

  HolomorphicFunction operator*(const HolomorphicFunction& o) const {
    HolomorphicFunction a = recentred(cplx{}), b = o.recentred(cplx{});
    std::vector<cplx> p(a.coef_.size() + b.coef_.size() - 1, cplx{});
    for (std::size_t i = 0; i < a.coef_.size(); ++i)
      for (std::size_t j = 0; j < b.coef_.size(); ++j) p[i + j] += a.coef_[i] * b.coef_[j];
    return {cplx{}, std::move(p)};
  }

  /// Same polynomial expressed about a new center (exact Taylor shift).
  HolomorphicFunction recentred(cplx c) const {
    if (c == center_) return *this;
    const int n = degree();
    std::vector<cplx> out(n + 1, cplx{});
    HolomorphicFunction f = *this;
    double fact = 1.0;
    for (int k = 0; k <= n; ++k) {
      if (k > 0) fact *= k;
      out[k] = f(c) / fact;
      f = f.derivative();
    }
    return {c, std::move(out)};
  }

  /// View as a Polynomial2 in global (z, z̄) monomials.
  Polynomial2 as_polynomial2() const {
    const HolomorphicFunction f = recentred(cplx{});
    Polynomial2 p;
    for (int k = 0; k <= f.degree(); ++k) p.add(k, 0, f.coef_[k]);
    return p;
  }

 private:
  cplx center_;
  std::vector<cplx> coef_;
};

inline HolomorphicFunction operator-(const HolomorphicFunction& a,
                                     const HolomorphicFunction& b) {
  return a + b * cplx(-1.0);
}

struct CriticalPoint {
  cplx z;                      // z̃_k
  cplx second_derivative;      // Φ''(z̃_k)
  double im_phi;               // Im Φ(z̃_k)
};

/// Holomorphic phase Φ = φ + iψ with its validated critical-point set and the
/// critical polynomial r(z) = Π (z − z̃_k).
struct PhaseFunction {
  HolomorphicFunction phi;
  std::vector<CriticalPoint> critical_points;
  std::vector<cplx> r_poly;    // ascending coefficients of r(z)
  double epsilon = 0.0;
  double delta = 0.0;

  cplx operator()(cplx z) const { return phi(z); }
  cplx dz(cplx z) const { return phi.derivative_at(z, 1); }
  cplx dzz(cplx z) const { return phi.derivative_at(z, 2); }
  double varphi(cplx z) const { return phi(z).real(); }
  double psi(cplx z) const { return phi(z).imag(); }

  /// ∇φ = (Re Φ′, −Im Φ′) for holomorphic Φ.
  cplx grad_varphi(cplx z) const {
    const cplx d = dz(z);
    return {d.real(), -d.imag()};
  }

  cplx r_of(cplx z) const {
    cplx acc = 0.0;
    for (std::size_t k = r_poly.size(); k-- > 0;) acc = acc * z + r_poly[k];
    return acc;
  }
};

inline std::vector<cplx> poly_from_roots(const std::vector<cplx>& roots) {
  std::vector<cplx> p{1.0};
  for (cplx r : roots) {
    std::vector<cplx> q(p.size() + 1, cplx{});
    for (std::size_t k = 0; k < p.size(); ++k) {
      q[k + 1] += p[k];
      q[k] -= r * p[k];
    }
    p = std::move(q);
  }
  return p;
}

inline nlohmann::json to_json(const HolomorphicFunction& f) {
  nlohmann::json coefs = nlohmann::json::array();
  for (cplx c : f.coefficients()) coefs.push_back({c.real(), c.imag()});
  return nlohmann::json{{"center", {f.center().real(), f.center().imag()}},
                        {"coefficients", coefs}};
}

inline nlohmann::json to_json(const PhaseFunction& p) {
  nlohmann::json cps = nlohmann::json::array();
  for (const auto& cp : p.critical_points)
    cps.push_back({{"z", {cp.z.real(), cp.z.imag()}},
                   {"second_derivative", {cp.second_derivative.real(), cp.second_derivative.imag()}},
                   {"im_phi", cp.im_phi}});
  nlohmann::json rp = nlohmann::json::array();
  for (cplx c : p.r_poly) rp.push_back({c.real(), c.imag()});
  return nlohmann::json{{"phi", to_json(p.phi)},
                        {"critical_points", cps},
                        {"r_polynomial", rp},
                        {"epsilon", p.epsilon},
                        {"delta", p.delta}};
}

}  // namespace cgolab
