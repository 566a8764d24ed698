#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepsvm/autodiff.hpp"
#include "deepsvm/heston.hpp"
#include "deepsvm/network.hpp"
#include "deepsvm/sampling.hpp"

namespace deepsvm {

/// Batched jet provider: the trained model or an analytic stand-in.
using JetSurface = std::function<std::vector<Jet2>(std::span<const CollocationPoint>)>;

JetSurface model_surface(const DeepONetModel& model);
JetSurface pointwise_surface(JetFunction fn);

struct Greeks {
  double delta = 0.0;
  double gamma = 0.0;
};

/// Delta = e^{-x} u_x, Gamma = e^{-2x} / K (u_xx - u_x).
Greeks greeks_from_jet(const Jet2& j, double x, double strike = 1.0);

struct Quote {
  double u = 0.0;      // strike-normalized price
  double price = 0.0;  // K * u
};

/// Throws DomainError for out-of-bounds or Feller-violating inputs.
Quote quote_price(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d,
                  double strike = 1.0);
Greeks quote_greeks(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d,
                    double strike = 1.0);

/// n Feller-valid parameter vectors from a seeded Sobol stream.
std::vector<HestonParams> draw_parameter_vectors(std::size_t n, std::uint64_t seed);

/// Interior points at least 2h inside every domain edge and outside the
/// payoff kink band |x| < 4h, suitable for finite-difference checks.
std::vector<CollocationPoint> grad_check_points(std::size_t n, std::uint64_t seed, double h);

struct ComparisonRow {
  HestonParams params;
  double x = 0.0;
  double nu0 = 0.0;
  double tau = 0.0;
  double model_price = 0.0;
  double oracle_price = 0.0;
  double abs_error = 0.0;
  double model_delta = 0.0;
  double oracle_delta = 0.0;
  double model_gamma = 0.0;
  double oracle_gamma = 0.0;
};

struct ComparisonSpec {
  std::size_t n_params = 3;
  std::uint64_t seed = 0;
  std::vector<double> nu0_slices{0.04, 0.2};
  std::vector<double> tau_slices{0.25, 1.0};
  std::size_t x_points = 81;
  double x_lo = -2.0;
  double x_hi = 2.0;
  double strike = 1.0;
  bool greeks = true;
};

/// Sweeps x on a uniform grid for every (mu, nu0, tau) slice.
std::vector<ComparisonRow> compare_with_oracle(const JetSurface& surface, const ComparisonSpec& spec);

/// Same, for explicit parameter vectors.
std::vector<ComparisonRow> compare_with_oracle(const JetSurface& surface,
                                               std::span<const HestonParams> params,
                                               const ComparisonSpec& spec);

struct ErrorSummary {
  std::size_t count = 0;
  double mae = 0.0;
  double max_error = 0.0;
  std::size_t atm_count = 0;
  double atm_mae = 0.0;
  double atm_max = 0.0;
  double off_atm_mae = 0.0;
  double off_atm_max = 0.0;
};

/// Pure function of the rows; the ATM band |x| <= atm_band is reported separately.
ErrorSummary summarize(std::span<const ComparisonRow> rows, double atm_band = 0.05);

void write_comparison_csv(std::ostream& os, std::span<const ComparisonRow> rows);
void write_summary_csv(std::ostream& os, const ErrorSummary& s);

enum class ResidualMapMode { kTauSlices, kParameterSlices };

struct ResidualMapSpec {
  ResidualMapMode mode = ResidualMapMode::kTauSlices;
  std::size_t nx = 101;
  std::size_t nnu = 101;
  std::size_t n_params = 16;                    // draws averaged over in tau-slice mode
  std::vector<double> tau_slices{0.1, 0.5, 1.0};
  std::size_t n_representative = 3;             // parameter vectors in parameter mode
  std::size_t n_tau = 21;                       // uniform tau grid on (0, 1] in parameter mode
  std::uint64_t seed = 0;
};

struct ResidualMapSlice {
  std::string label;
  std::vector<double> x;
  std::vector<double> nu;
  std::vector<double> mean_r2;
};

std::vector<ResidualMapSlice> residual_map(const JetSurface& surface, const ResidualMapSpec& spec);

void write_residual_slice_csv(std::ostream& os, const ResidualMapSlice& slice);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Oracle, autodiff, ansatz and sampler self-tests. A checkpoint that fails to
/// load is reported as a failed check; the remaining checks still run.
std::vector<CheckResult> run_self_checks(const std::optional<std::string>& checkpoint,
                                         std::uint64_t seed);

}  // namespace deepsvm
