#pragma once

#include <span>
#include <vector>

#include "deepsvm/heston.hpp"
#include "deepsvm/jet.hpp"
#include "deepsvm/network.hpp"
#include "deepsvm/sampling.hpp"

namespace deepsvm {

/// N[u] = c_u u + c_x u_x + c_nu u_nu + c_xx u_xx + c_nunu u_nunu + c_xnu u_xnu.
struct OperatorCoefficients {
  double u;
  double x;
  double nu;
  double xx;
  double nunu;
  double xnu;
};

OperatorCoefficients operator_coefficients(const HestonParams& p, double nu) noexcept;

/// Heston operator in log-moneyness:
/// (r - nu/2) u_x + rho sigma nu u_xnu + sigma^2 nu / 2 u_nunu + nu/2 u_xx
/// + kappa (theta - nu) u_nu - r u.
double heston_operator(const HestonParams& p, const DomainPoint& d, const Jet2& j) noexcept;

/// R = u_tau - N[u].
double residual(const HestonParams& p, const DomainPoint& d, const Jet2& j) noexcept;

struct LossWeights {
  double lambda_bound = 1.0;
  double lambda_atm = 1.0;
  double lambda_max = 0.1;  // weight of the quartic residual penalty
};

struct LossReport {
  double phys = 0.0;
  double bound = 0.0;
  double atm = 0.0;
  double total = 0.0;
  LossWeights weights;
};

/// mean(R^2) + lambda_max * mean(R^4). Throws ArgumentError on empty input.
double loss_phys(std::span<const double> residuals, double lambda_max = 0.1);

/// Pooled MSE of u_pred against the boundary targets of both sides.
double loss_bound(const DeepONetModel& model, std::span<const BoundaryPoint> points);

/// loss_phys on the ATM set. Throws ArgumentError if a point has |x| > half_width.
double loss_atm(const DeepONetModel& model, std::span<const CollocationPoint> points,
                double lambda_max = 0.1, double half_width = 0.05);

/// Residuals of the model at every point (parallel, batched).
std::vector<double> compute_residuals(const DeepONetModel& model,
                                      std::span<const CollocationPoint> points);

/// total = phys + lambda_b * bound + lambda_a * atm.
LossReport combine_losses(double phys, double bound, double atm, const LossWeights& w = {});

LossReport total_loss(const DeepONetModel& model, const CollocationSet& sets,
                      const LossWeights& w = {});

}  // namespace deepsvm
