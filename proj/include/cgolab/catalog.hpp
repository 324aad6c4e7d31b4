#pragma once

#include <functional>
#include <string>

#include <json.hpp>

#include "cgolab/gridfn.hpp"
#include "cgolab/holomorphic.hpp"

namespace cgolab {

/// Smooth scalar field with analytic Wirtinger derivatives through total
/// order two. Everything downstream that needs jets (transform jets, Taylor
/// subtraction, conductivity reduction) consumes these instead of numerical
/// differentiation.
struct AnalyticField {
  std::function<cplx(cplx)> value;
  std::function<cplx(cplx)> dz;
  std::function<cplx(cplx)> dbar;
  std::function<cplx(cplx)> dzz;
  std::function<cplx(cplx)> dzbar;
  std::function<cplx(cplx)> dbarbar;

  cplx lap(cplx z) const { return 4.0 * dzbar(z); }
  /// Gradient as (∂_{x1}, ∂_{x2}).
  std::pair<cplx, cplx> grad(cplx z) const {
    const cplx a = dz(z), b = dbar(z);
    return {a + b, cplx(0, 1) * (a - b)};
  }
};

inline GridFunction sample(const Domain& dom, const AnalyticField& f,
                           bool with_boundary = false) {
  return sample(dom, f.value, with_boundary);
}

inline AnalyticField constant_field(cplx c) {
  auto zero = [](cplx) { return cplx{}; };
  return {[c](cplx) { return c; }, zero, zero, zero, zero, zero};
}

/// h·exp(−|z−c|²/w²)
inline AnalyticField gaussian_bump(cplx c, double width, cplx height) {
  const double s = 1.0 / (width * width);
  auto v = [c, s, height](cplx z) {
    const cplx u = z - c;
    return height * std::exp(-s * std::norm(u));
  };
  return {v,
          [c, s, v](cplx z) { return -s * std::conj(z - c) * v(z); },
          [c, s, v](cplx z) { return -s * (z - c) * v(z); },
          [c, s, v](cplx z) { const cplx ub = std::conj(z - c); return s * s * ub * ub * v(z); },
          [c, s, v](cplx z) { return (-s + s * s * std::norm(z - c)) * v(z); },
          [c, s, v](cplx z) { const cplx u = z - c; return s * s * u * u * v(z); }};
}

/// h·exp(α x₁)
inline AnalyticField exp_linear(double alpha, cplx height = 1.0) {
  const double a = 0.5 * alpha;
  auto v = [alpha, height](cplx z) { return height * std::exp(alpha * z.real()); };
  return {v,
          [a, v](cplx z) { return a * v(z); },
          [a, v](cplx z) { return a * v(z); },
          [a, v](cplx z) { return a * a * v(z); },
          [a, v](cplx z) { return a * a * v(z); },
          [a, v](cplx z) { return a * a * v(z); }};
}

/// (1 + x₁²)²
inline AnalyticField one_plus_x1_sq_sq() {
  auto x1 = [](cplx z) { return z.real(); };
  auto v = [x1](cplx z) { const double t = 1.0 + sq(x1(z)); return cplx(t * t); };
  // f(x1) = (1+x1²)², f' = 4x1(1+x1²), f'' = 4 + 12x1²; ∂_z x1 = ∂_z̄ x1 = 1/2.
  auto d1 = [x1](cplx z) { const double t = x1(z); return cplx(2.0 * t * (1.0 + t * t)); };
  auto d2 = [x1](cplx z) { const double t = x1(z); return cplx(1.0 + 3.0 * t * t); };
  return {v, d1, d1, d2, d2, d2};
}

/// C² bump: h·(1 − |z−c|²/ρ²)³ inside the disk of radius ρ, 0 outside.
inline AnalyticField compact_bump(cplx c, double rho, cplx height) {
  const double s = 1.0 / (rho * rho);
  auto t_of = [c, s](cplx z) { return 1.0 - s * std::norm(z - c); };
  return {[=](cplx z) { const double t = t_of(z); return t > 0 ? height * t * t * t : cplx{}; },
          [=](cplx z) {
            const double t = t_of(z);
            return t > 0 ? height * (-3.0 * s) * t * t * std::conj(z - c) : cplx{};
          },
          [=](cplx z) {
            const double t = t_of(z);
            return t > 0 ? height * (-3.0 * s) * t * t * (z - c) : cplx{};
          },
          [=](cplx z) {
            const double t = t_of(z);
            const cplx ub = std::conj(z - c);
            return t > 0 ? height * 6.0 * s * s * t * ub * ub : cplx{};
          },
          [=](cplx z) {
            const double t = t_of(z);
            return t > 0 ? height * (6.0 * s * s * t * std::norm(z - c) - 3.0 * s * t * t)
                         : cplx{};
          },
          [=](cplx z) {
            const double t = t_of(z);
            const cplx u = z - c;
            return t > 0 ? height * 6.0 * s * s * t * u * u : cplx{};
          }};
}

inline AnalyticField from_holomorphic(const HolomorphicFunction& f) {
  const HolomorphicFunction d1 = f.derivative();
  const HolomorphicFunction d2 = d1.derivative();
  auto zero = [](cplx) { return cplx{}; };
  return {[f](cplx z) { return f(z); },
          [d1](cplx z) { return d1(z); },
          zero,
          [d2](cplx z) { return d2(z); },
          zero, zero};
}

inline AnalyticField from_polynomial2(const Polynomial2& p) {
  auto ev = [](Polynomial2 q) {
    return [q](cplx z) { return q.eval(z); };
  };
  return {ev(p),        ev(p.dz()),        ev(p.dbar()),
          ev(p.dz().dz()), ev(p.dz().dbar()), ev(p.dbar().dbar())};
}

inline AnalyticField conjugated(const AnalyticField& f) {
  auto cj = [](std::function<cplx(cplx)> g) {
    return [g](cplx z) { return std::conj(g(z)); };
  };
  return {cj(f.value), cj(f.dbar), cj(f.dz), cj(f.dbarbar), cj(f.dzbar), cj(f.dzz)};
}

inline AnalyticField operator*(const AnalyticField& f, const AnalyticField& g) {
  return {[=](cplx z) { return f.value(z) * g.value(z); },
          [=](cplx z) { return f.dz(z) * g.value(z) + f.value(z) * g.dz(z); },
          [=](cplx z) { return f.dbar(z) * g.value(z) + f.value(z) * g.dbar(z); },
          [=](cplx z) {
            return f.dzz(z) * g.value(z) + 2.0 * f.dz(z) * g.dz(z) + f.value(z) * g.dzz(z);
          },
          [=](cplx z) {
            return f.dzbar(z) * g.value(z) + f.dz(z) * g.dbar(z) + f.dbar(z) * g.dz(z) +
                   f.value(z) * g.dzbar(z);
          },
          [=](cplx z) {
            return f.dbarbar(z) * g.value(z) + 2.0 * f.dbar(z) * g.dbar(z) +
                   f.value(z) * g.dbarbar(z);
          }};
}

inline AnalyticField operator+(const AnalyticField& f, const AnalyticField& g) {
  auto s = [](std::function<cplx(cplx)> a, std::function<cplx(cplx)> b) {
    return [a, b](cplx z) { return a(z) + b(z); };
  };
  return {s(f.value, g.value), s(f.dz, g.dz),       s(f.dbar, g.dbar),
          s(f.dzz, g.dzz),     s(f.dzbar, g.dzbar), s(f.dbarbar, g.dbarbar)};
}

inline AnalyticField operator*(cplx c, const AnalyticField& f) {
  auto s = [c](std::function<cplx(cplx)> a) {
    return [c, a](cplx z) { return c * a(z); };
  };
  return {s(f.value), s(f.dz), s(f.dbar), s(f.dzz), s(f.dzbar), s(f.dbarbar)};
}

/// Named catalog entry resolution for config files.
/// Supported: {"name":"gaussian_bump","center":[x,y],"width":w,"height":h},
/// {"name":"constant","value":c}, {"name":"exp_linear","alpha":a,"height":h},
/// {"name":"compact_bump","center":[x,y],"radius":r,"height":h},
/// {"name":"zero"}, {"name":"sum","terms":[...]}.
inline AnalyticField field_from_json(const nlohmann::json& j) {
  const std::string name = j.at("name").get<std::string>();
  auto get_center = [&j]() {
    return cplx(j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>());
  };
  if (name == "zero") return constant_field(0.0);
  if (name == "constant") return constant_field(j.at("value").get<double>());
  if (name == "gaussian_bump")
    return gaussian_bump(get_center(), j.at("width").get<double>(),
                         j.value("height", 1.0));
  if (name == "compact_bump")
    return compact_bump(get_center(), j.at("radius").get<double>(), j.value("height", 1.0));
  if (name == "exp_linear") return exp_linear(j.at("alpha").get<double>(), j.value("height", 1.0));
  if (name == "one_plus_x1_sq_sq") return one_plus_x1_sq_sq();
  if (name == "sum") {
    AnalyticField acc = constant_field(0.0);
    for (const auto& t : j.at("terms")) acc = acc + field_from_json(t);
    return acc;
  }
  throw error("field catalog: unknown entry '" + name + "'");
}

}  // namespace cgolab
