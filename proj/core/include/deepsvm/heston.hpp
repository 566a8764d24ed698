#pragma once

#include <array>
#include <string_view>

namespace deepsvm {

/// Heston model parameters (kappa, theta, sigma, rho, r). Zero dividend yield.
struct HestonParams {
  double kappa = 2.0;
  double theta = 0.04;
  double sigma = 0.3;
  double rho = -0.5;
  double r = 0.02;

  std::array<double, 5> as_array() const { return {kappa, theta, sigma, rho, r}; }
  static HestonParams from_array(const std::array<double, 5>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
  bool operator==(const HestonParams&) const = default;
};

/// A point of the (x, nu, tau) solution domain; x = ln(S/K), tau = T - t.
struct DomainPoint {
  double x = 0.0;
  double nu = 0.04;
  double tau = 0.5;
  bool operator==(const DomainPoint&) const = default;
};

struct Interval {
  double lo;
  double hi;
  double mid() const { return 0.5 * (lo + hi); }
  double half() const { return 0.5 * (hi - lo); }
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Training domain. Defaults are the operator's trained ranges.
struct DomainBounds {
  Interval x{-2.0, 2.0};
  Interval nu{0.01, 0.40};
  Interval tau{0.0, 1.0};
  Interval kappa{0.5, 3.0};
  Interval theta{0.01, 0.20};
  Interval sigma{0.1, 1.0};
  Interval rho{-0.95, -0.05};
  Interval r{0.00, 0.08};

  /// Axes in network input order: kappa, theta, sigma, rho, r, x, nu, tau.
  std::array<Interval, 8> axes() const { return {kappa, theta, sigma, rho, r, x, nu, tau}; }
  static constexpr std::array<std::string_view, 8> kAxisNames{
      "kappa", "theta", "sigma", "rho", "r", "x", "nu", "tau"};

  /// Throws ArgumentError unless lo < hi on every axis.
  void validate() const;
  bool operator==(const DomainBounds&) const = default;
};

/// Strict Feller condition 2*kappa*theta > sigma^2.
bool feller_holds(const HestonParams& p) noexcept;

/// Call payoff in strike units: max(e^x - 1, 0).
double payoff(double x) noexcept;

/// Target at the upper x boundary: e^{x_max} - e^{-r tau}.
double boundary_upper(double x_max, double r, double tau) noexcept;

/// Target at the lower x boundary.
constexpr double boundary_lower() noexcept { return 0.0; }

using NormalizedInputs = std::array<double, 8>;

/// Affine map of every input onto [-1, 1]. Throws DomainError naming the axis
/// when an input falls outside `bounds`.
NormalizedInputs normalize_inputs(const HestonParams& p, const DomainPoint& d,
                                  const DomainBounds& bounds = {});

/// Inverse of normalize_inputs (no range checking).
void denormalize_inputs(const NormalizedInputs& z, const DomainBounds& bounds,
                        HestonParams& p, DomainPoint& d);

/// Throws DomainError if any component of (p, d) lies outside bounds or the
/// parameters violate the Feller condition.
void check_in_bounds(const HestonParams& p, const DomainPoint& d, const DomainBounds& bounds = {});

/// Slope of the affine normalization on an interval: 2 / (hi - lo).
inline double normalization_slope(const Interval& iv) { return 2.0 / (iv.hi - iv.lo); }

}  // namespace deepsvm
