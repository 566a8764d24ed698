#include "deepsvm/physics.hpp"

#include <cmath>
#include <sstream>

#include "deepsvm/autodiff.hpp"
#include "deepsvm/errors.hpp"

namespace deepsvm {

OperatorCoefficients operator_coefficients(const HestonParams& p, double nu) noexcept {
  return {-p.r,
          p.r - 0.5 * nu,
          p.kappa * (p.theta - nu),
          0.5 * nu,
          0.5 * p.sigma * p.sigma * nu,
          p.rho * p.sigma * nu};
}

double heston_operator(const HestonParams& p, const DomainPoint& d, const Jet2& j) noexcept {
  const OperatorCoefficients c = operator_coefficients(p, d.nu);
  return c.x * j.du_dx + c.xnu * j.d2u_dxdnu + c.nunu * j.d2u_dnu2 + c.xx * j.d2u_dx2 +
         c.nu * j.du_dnu + c.u * j.u;
}

double residual(const HestonParams& p, const DomainPoint& d, const Jet2& j) noexcept {
  return j.du_dtau - heston_operator(p, d, j);
}

double loss_phys(std::span<const double> residuals, double lambda_max) {
  if (residuals.empty()) throw ArgumentError("loss_phys: empty residual set");
  double s2 = 0.0, s4 = 0.0;
  for (double r : residuals) {
    const double r2 = r * r;
    s2 += r2;
    s4 += r2 * r2;
  }
  const double n = static_cast<double>(residuals.size());
  return s2 / n + lambda_max * s4 / n;
}

namespace {

void check_boundary_tags(const DeepONetModel& model, std::span<const BoundaryPoint> points) {
  const Interval& xr = model.bounds().x;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& b = points[i];
    const double want = b.side == BoundarySide::kLower ? xr.lo : xr.hi;
    if (b.at.point.x != want) {
      std::ostringstream os;
      os << "boundary point " << i << " at x=" << b.at.point.x << " is not on its tagged side";
      throw ArgumentError(os.str());
    }
  }
}

void check_atm_band(std::span<const CollocationPoint> points, double half_width) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::abs(points[i].point.x) > half_width) {
      std::ostringstream os;
      os << "ATM point " << i << " at x=" << points[i].point.x << " lies outside |x| <= "
         << half_width;
      throw ArgumentError(os.str());
    }
  }
}

}  // namespace

double loss_bound(const DeepONetModel& model, std::span<const BoundaryPoint> points) {
  if (points.empty()) throw ArgumentError("loss_bound: empty boundary set");
  check_boundary_tags(model, points);
  LossWeights w;
  return evaluate_loss(model, LossBatch{{}, {}, points}, w).bound;
}

double loss_atm(const DeepONetModel& model, std::span<const CollocationPoint> points,
                double lambda_max, double half_width) {
  if (points.empty()) throw ArgumentError("loss_atm: empty ATM set");
  check_atm_band(points, half_width);
  LossWeights w;
  w.lambda_max = lambda_max;
  return evaluate_loss(model, LossBatch{{}, points, {}}, w).atm;
}

std::vector<double> compute_residuals(const DeepONetModel& model,
                                      std::span<const CollocationPoint> points) {
  const auto jets = forward_jets(model, points);
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i] = residual(points[i].params, points[i].point, jets[i]);
  }
  return out;
}

LossReport combine_losses(double phys, double bound, double atm, const LossWeights& w) {
  LossReport r;
  r.phys = phys;
  r.bound = bound;
  r.atm = atm;
  r.weights = w;
  r.total = phys + w.lambda_bound * bound + w.lambda_atm * atm;
  return r;
}

LossReport total_loss(const DeepONetModel& model, const CollocationSet& sets,
                      const LossWeights& w) {
  check_boundary_tags(model, sets.boundary);
  check_atm_band(sets.atm, 0.05);
  return evaluate_loss(model, LossBatch{sets.interior, sets.atm, sets.boundary}, w);
}

}  // namespace deepsvm
