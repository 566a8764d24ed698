#pragma once

#include <complex>
#include <cstdint>

#include "deepsvm/heston.hpp"

namespace deepsvm::oracle {

/// Composite Gauss-Legendre quadrature on [0, upper] for the Fourier
/// probability integrals. The panel count doubles until two successive
/// estimates agree to `tolerance`.
struct QuadratureSpec {
  int nodes = 64;             // initial node count, >= 64
  double upper = 200.0;       // integration limit in the transform variable
  double tolerance = 1e-10;
  int max_nodes = 1 << 16;
  /// The limit is doubled (up to this cap) while the characteristic function
  /// envelope at `upper` still exceeds the tolerance, e.g. for tiny nu*tau.
  double max_upper = 12800.0;

  void validate() const;
};

enum class McScheme { kEulerFullTruncation, kQuadraticExponential };

struct MCSpec {
  std::uint64_t paths = 100000;
  int steps_per_year = 252;
  McScheme scheme = McScheme::kEulerFullTruncation;
  std::uint64_t seed = 1;
  bool antithetic = false;

  void validate() const;
};

/// E[exp(i u ln(S_tau / S_0))] under the risk-neutral measure, evaluated with
/// the rotation-free ("little trap") branch. Returns 1 at u = 0 and e^{r tau}
/// at u = -i. Throws NumericalError if any intermediate is non-finite.
std::complex<double> heston_char_fn(std::complex<double> u, const HestonParams& p, double nu0,
                                    double tau);

/// Characteristic function of ln S_tau itself for a given log-spot ln S_0.
std::complex<double> heston_char_fn_log_spot(std::complex<double> u, const HestonParams& p,
                                             double log_spot, double nu0, double tau);

/// P1 (stock-measure) and P2 (risk-neutral) exercise probabilities at
/// log-moneyness x.
struct FourierProbabilities {
  double p1 = 0.0;
  double p2 = 0.0;
  int nodes = 0;         // node count at convergence
  double upper = 0.0;    // integration limit used
  double residual = 0.0; // last successive-estimate difference
};

FourierProbabilities fourier_probabilities(const HestonParams& p, double x, double nu0,
                                           double tau, const QuadratureSpec& q = {});

/// Semi-analytic European call in currency units, V = K * u with
/// u = e^x P1 - e^{-r tau} P2.
double price_call(const HestonParams& p, double x, double nu0, double tau, double strike = 1.0,
                  const QuadratureSpec& q = {});

/// European put from the same P1/P2 integrals.
double price_put(const HestonParams& p, double x, double nu0, double tau, double strike = 1.0,
                 const QuadratureSpec& q = {});

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo call price with per-path seeded streams; the estimate does not
/// depend on the worker count.
McEstimate price_call_mc(const HestonParams& p, double x, double nu0, double tau, double strike,
                         const MCSpec& spec);

/// dV/dS = P1.
double delta_oracle(const HestonParams& p, double x, double nu0, double tau,
                    const QuadratureSpec& q = {});

/// d2V/dS2 by Richardson-extrapolated central differences of price_call in S
/// (relative step 1e-3).
double gamma_oracle(const HestonParams& p, double x, double nu0, double tau, double strike = 1.0,
                    const QuadratureSpec& q = {});

/// Black-Scholes call, used for the small vol-of-vol limit check.
double black_scholes_call(double spot, double strike, double vol, double r, double tau);

}  // namespace deepsvm::oracle
