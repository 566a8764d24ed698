#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "deepsvm/jet.hpp"
#include "deepsvm/network.hpp"
#include "deepsvm/physics.hpp"
#include "deepsvm/sampling.hpp"

namespace deepsvm {

/// Exact value and input partials of u_pred at one point. The value field is
/// bit-identical to u_pred. At the payoff kink x = 0 the convention is
/// phi'(0) = 0.5, phi''(0) = 0.
Jet2 forward_jet(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d);

/// Batched forward_jet over many points; agrees with forward_jet to rounding
/// (the GEMM kernel depends on batch width).
std::vector<Jet2> forward_jets(const DeepONetModel& model, std::span<const CollocationPoint> points);

/// Batched u_pred (value channel only).
std::vector<double> evaluate_prices(const DeepONetModel& model,
                                    std::span<const CollocationPoint> points);

/// Any surface that can report jets; lets analytic solutions stand in for
/// the network in diagnostics.
using JetFunction = std::function<Jet2(const HestonParams&, const DomainPoint&)>;

JetFunction model_jet_function(const DeepONetModel& model);

/// Jets of u*(x, tau) = e^x - e^{-r tau}, an exact solution of the pricing PDE.
Jet2 discounted_forward_jet(const HestonParams& p, const DomainPoint& d) noexcept;

/// Weight gradient in the model's flat parameter layout.
struct ParamGradient {
  AlignedVector values;

  std::span<const double> weights(const LayerLayout& l) const {
    return std::span(values).subspan(l.weight_offset, l.rows * l.cols);
  }
  std::span<const double> bias(const LayerLayout& l) const {
    return std::span(values).subspan(l.bias_offset, l.rows);
  }
  double norm() const;
};

/// Point sets entering one loss evaluation. Any set may be empty, but not all.
struct LossBatch {
  std::span<const CollocationPoint> interior;
  std::span<const CollocationPoint> atm;
  std::span<const BoundaryPoint> boundary;
};

struct LossAndGradient {
  LossReport report;
  ParamGradient gradient;
};

/// Default number of points per reduction chunk.
inline constexpr std::size_t kDefaultChunk = 256;

/// Loss and its exact gradient with respect to every weight (reverse mode
/// over the input-derivative jets). Chunks are reduced in a fixed order, so
/// the result does not depend on the worker count. Throws NonFiniteLossError
/// carrying the first offending point.
LossAndGradient backward_params(const DeepONetModel& model, const LossBatch& batch,
                                const LossWeights& weights = {},
                                std::size_t chunk = kDefaultChunk);

/// Forward-only evaluation with the same reduction order as backward_params.
LossReport evaluate_loss(const DeepONetModel& model, const LossBatch& batch,
                         const LossWeights& weights = {}, std::size_t chunk = kDefaultChunk);

struct GradCheckField {
  std::string name;
  double max_error = 0.0;  // relative; absolute/1e-4 where |reference| < 1e-6
  std::size_t argmax = 0;
};

struct GradCheckReport {
  std::array<GradCheckField, 6> fields;
  double max_error() const;
  /// Columnar table: field, max_rel_err, argmax_point.
  void write_table(std::ostream& os) const;
};

/// Compares every derivative field of `jets` with 5-point central stencils of
/// its value at step h. Points must sit at least 2h inside the domain and
/// away from the payoff kink in x.
GradCheckReport grad_check(const JetFunction& jets, std::span<const CollocationPoint> points,
                           double h);

}  // namespace deepsvm
