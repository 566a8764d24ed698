#pragma once

namespace deepsvm {

/// A price value with the input partials the Heston operator needs, in
/// strike-normalized price units and physical (x, nu, tau) coordinates.
struct Jet2 {
  double u = 0.0;
  double du_dx = 0.0;
  double du_dnu = 0.0;
  double du_dtau = 0.0;
  double d2u_dx2 = 0.0;
  double d2u_dnu2 = 0.0;
  double d2u_dxdnu = 0.0;

  bool operator==(const Jet2&) const = default;
};

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  return {a.u + b.u,           a.du_dx + b.du_dx,       a.du_dnu + b.du_dnu,
          a.du_dtau + b.du_dtau, a.d2u_dx2 + b.d2u_dx2, a.d2u_dnu2 + b.d2u_dnu2,
          a.d2u_dxdnu + b.d2u_dxdnu};
}

inline Jet2 operator*(double c, const Jet2& a) {
  return {c * a.u,        c * a.du_dx,    c * a.du_dnu,   c * a.du_dtau,
          c * a.d2u_dx2, c * a.d2u_dnu2, c * a.d2u_dxdnu};
}

}  // namespace deepsvm
