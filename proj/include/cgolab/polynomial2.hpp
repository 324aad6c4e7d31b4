#pragma once

#include <map>
#include <utility>

#include "cgolab/common.hpp"

namespace cgolab {

/// Polynomial in (z, z̄): Σ c_{m,n} z^m z̄^n.
struct Polynomial2 {
  std::map<std::pair<int, int>, cplx> coef;

  void add(int m, int n, cplx c) {
    if (c == cplx{}) return;
    coef[{m, n}] += c;
  }

  cplx eval(cplx z) const {
    const cplx zb = std::conj(z);
    cplx acc = 0.0;
    for (const auto& [mn, c] : coef)
      acc += c * std::pow(z, mn.first) * std::pow(zb, mn.second);
    return acc;
  }

  Polynomial2 dz() const {
    Polynomial2 out;
    for (const auto& [mn, c] : coef)
      if (mn.first > 0) out.add(mn.first - 1, mn.second, c * double(mn.first));
    return out;
  }

  Polynomial2 dbar() const {
    Polynomial2 out;
    for (const auto& [mn, c] : coef)
      if (mn.second > 0) out.add(mn.first, mn.second - 1, c * double(mn.second));
    return out;
  }

  Polynomial2 conjugated() const {
    Polynomial2 out;
    for (const auto& [mn, c] : coef) out.add(mn.second, mn.first, std::conj(c));
    return out;
  }

  /// Area Cauchy transform T g(z) = −(1/π)∫_{|ζ|<R} g(ζ)/(ζ−z) dA on the disk
  /// of radius R. Closed form per monomial:
  ///   T[ζ^m ζ̄^n] = z^m z̄^{n+1}/(n+1)                          for n ≥ m,
  ///   T[ζ^m ζ̄^n] = (z^m z̄^{n+1} − R^{2n+2} z^{m−n−1})/(n+1)    for m ≥ n+1.
  /// Both branches satisfy ∂_z̄ T g = g; the second carries the reflection
  /// term that keeps T g single-valued on the disk.
  Polynomial2 cauchy_transform(double R) const {
    Polynomial2 out;
    for (const auto& [mn, c] : coef) {
      const int m = mn.first, n = mn.second;
      out.add(m, n + 1, c / double(n + 1));
      if (m >= n + 1)
        out.add(m - n - 1, 0, -c * std::pow(R * R, n + 1) / double(n + 1));
    }
    return out;
  }
};

inline Polynomial2 operator*(const Polynomial2& a, const Polynomial2& b) {
  Polynomial2 out;
  for (const auto& [mn, c] : a.coef)
    for (const auto& [pq, d] : b.coef)
      out.add(mn.first + pq.first, mn.second + pq.second, c * d);
  return out;
}

inline Polynomial2 operator+(const Polynomial2& a, const Polynomial2& b) {
  Polynomial2 out = a;
  for (const auto& [mn, c] : b.coef) out.add(mn.first, mn.second, c);
  return out;
}

inline Polynomial2 operator-(const Polynomial2& a, const Polynomial2& b) {
  Polynomial2 out = a;
  for (const auto& [mn, c] : b.coef) out.add(mn.first, mn.second, -c);
  return out;
}

/// Expand Σ_{j,k} t_{j,k} (z−c)^j (z̄−c̄)^k into global monomials.
inline Polynomial2 expand_shifted(cplx c,
                                  const std::map<std::pair<int, int>, cplx>& shifted) {
  // binomial(j, i) table up to the maximum order present
  auto binom = [](int n, int k) {
    double b = 1.0;
    for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
    return b;
  };
  Polynomial2 out;
  const cplx cb = std::conj(c);
  for (const auto& [jk, t] : shifted) {
    const int j = jk.first, k = jk.second;
    for (int p = 0; p <= j; ++p)
      for (int q = 0; q <= k; ++q)
        out.add(p, q,
                t * binom(j, p) * binom(k, q) * std::pow(-c, j - p) * std::pow(-cb, k - q));
  }
  return out;
}

}  // namespace cgolab
