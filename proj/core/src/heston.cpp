#include "deepsvm/heston.hpp"

#include <cmath>
#include <sstream>

#include "deepsvm/errors.hpp"

namespace deepsvm {

void DomainBounds::validate() const {
  const auto a = axes();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].lo < a[i].hi)) {
      throw ArgumentError("domain bounds: empty range on axis " + std::string(kAxisNames[i]));
    }
  }
}

bool feller_holds(const HestonParams& p) noexcept {
  return 2.0 * p.kappa * p.theta > p.sigma * p.sigma;
}

double payoff(double x) noexcept { return std::max(std::exp(x) - 1.0, 0.0); }

double boundary_upper(double x_max, double r, double tau) noexcept {
  return std::exp(x_max) - std::exp(-r * tau);
}

namespace {

std::array<double, 8> raw_inputs(const HestonParams& p, const DomainPoint& d) {
  return {p.kappa, p.theta, p.sigma, p.rho, p.r, d.x, d.nu, d.tau};
}

void check_axes(const std::array<double, 8>& v, const DomainBounds& bounds) {
  const auto a = bounds.axes();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || !a[i].contains(v[i])) {
      std::ostringstream os;
      os << "input " << DomainBounds::kAxisNames[i] << "=" << v[i] << " outside [" << a[i].lo
         << ", " << a[i].hi << "]";
      throw DomainError(std::string(DomainBounds::kAxisNames[i]), os.str());
    }
  }
}

}  // namespace

void check_in_bounds(const HestonParams& p, const DomainPoint& d, const DomainBounds& bounds) {
  check_axes(raw_inputs(p, d), bounds);
  if (!feller_holds(p)) {
    std::ostringstream os;
    os << "Feller condition violated: 2*kappa*theta=" << 2.0 * p.kappa * p.theta
       << " <= sigma^2=" << p.sigma * p.sigma;
    throw DomainError("feller", os.str());
  }
}

NormalizedInputs normalize_inputs(const HestonParams& p, const DomainPoint& d,
                                  const DomainBounds& bounds) {
  const auto v = raw_inputs(p, d);
  check_axes(v, bounds);
  const auto a = bounds.axes();
  NormalizedInputs z{};
  for (std::size_t i = 0; i < v.size(); ++i) {
    z[i] = 2.0 * (v[i] - a[i].lo) / (a[i].hi - a[i].lo) - 1.0;
  }
  return z;
}

void denormalize_inputs(const NormalizedInputs& z, const DomainBounds& bounds, HestonParams& p,
                        DomainPoint& d) {
  const auto a = bounds.axes();
  std::array<double, 8> v{};
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = a[i].lo + 0.5 * (z[i] + 1.0) * (a[i].hi - a[i].lo);
  }
  p = {v[0], v[1], v[2], v[3], v[4]};
  d = {v[5], v[6], v[7]};
}

}  // namespace deepsvm
