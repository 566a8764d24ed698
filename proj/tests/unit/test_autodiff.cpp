#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "deepsvm/autodiff.hpp"
#include "deepsvm/errors.hpp"
#include "deepsvm/evaluation.hpp"
#include "deepsvm/parallel.hpp"

namespace deepsvm {
namespace {

ModelSpec small_spec() {
  ModelSpec s;
  s.branch = {5, 12, 3, 6};
  s.trunk = {3, 12, 3, 6};
  return s;
}

const HestonParams kP{2.0, 0.05, 0.3, -0.6, 0.03};

LossBatch batch_of(const CollocationSet& s) { return {s.interior, s.atm, s.boundary}; }

CollocationSet small_sets(std::uint64_t seed, std::size_t n = 300) {
  Sampler s(seed);
  return {s.interior(n), s.atm(n / 4), s.boundary(n / 4)};
}

TEST(ForwardJet, ValueMatchesUPred) {
  const auto m = init_model(small_spec(), 1);
  Sampler s(2);
  const auto pts = s.interior(200);
  const auto jets = forward_jets(m, pts);
  const auto prices = evaluate_prices(m, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double u = u_pred(m, pts[i].params, pts[i].point);
    const Jet2 one = forward_jet(m, pts[i].params, pts[i].point);
    EXPECT_EQ(one.u, u);
    // Batch width changes the GEMM kernel, so batched results agree to rounding.
    EXPECT_NEAR(jets[i].u, u, 1e-14 * (1.0 + std::abs(u)));
    EXPECT_EQ(prices[i], jets[i].u);
    const double a[] = {one.du_dx, one.du_dnu, one.du_dtau, one.d2u_dx2, one.d2u_dnu2, one.d2u_dxdnu};
    const double b[] = {jets[i].du_dx,   jets[i].du_dnu,   jets[i].du_dtau,
                        jets[i].d2u_dx2, jets[i].d2u_dnu2, jets[i].d2u_dxdnu};
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(a[k], b[k], 1e-12 * (1.0 + std::abs(b[k])));
  }
}

TEST(ForwardJet, TerminalSlices) {
  const auto m = init_model(small_spec(), 3);
  const DomainPoint d{0.5, 0.1, 0.0};
  const Jet2 j = forward_jet(m, kP, d);
  EXPECT_NEAR(j.du_dx, std::exp(0.5), 1e-15);
  EXPECT_NEAR(j.du_dx, 1.648721, 1e-6);
  EXPECT_NEAR(j.du_dtau, softplus(raw_output(m, kP, d)), 1e-15);
  EXPECT_EQ(j.du_dnu, 0.0);
}

TEST(ForwardJet, KinkConvention) {
  const auto m = init_model(small_spec(), 3);
  const Jet2 j = forward_jet(m, kP, {0.0, 0.1, 0.0});
  EXPECT_EQ(j.u, 0.0);
  EXPECT_EQ(j.du_dx, 0.5);
  EXPECT_EQ(j.d2u_dx2, 0.0);
}

TEST(ForwardJet, ConstantNetworkHasNoCurvature) {
  DeepONetModel m(small_spec());
  for (const auto* layers : {&m.branch_layers(), &m.trunk_layers()})
    for (std::size_t i = 0; i < layers->back().rows; ++i) m.parameters()[layers->back().bias_offset + i] = 0.3;
  // Out of the money the payoff term vanishes, leaving tau * softplus(const).
  const Jet2 j = forward_jet(m, kP, {-0.5, 0.2, 0.7});
  EXPECT_EQ(j.d2u_dx2, 0.0);
  EXPECT_EQ(j.d2u_dnu2, 0.0);
  EXPECT_EQ(j.d2u_dxdnu, 0.0);
  EXPECT_NEAR(j.du_dtau, softplus(6 * 0.09), 1e-15);
}

TEST(GradCheck, NetworkJetsAgreeWithStencils) {
  const auto m = init_model(small_spec(), 4);
  const auto pts = grad_check_points(100, 7, 1e-3);
  const auto report = grad_check(model_jet_function(m), pts, 1e-3);
  for (const auto& f : report.fields) EXPECT_LT(f.max_error, 1e-4) << f.name;
}

TEST(GradCheck, FullSizeNetwork) {
  const auto m = init_model(ModelSpec{}, 0);
  const auto pts = grad_check_points(20, 1, 1e-3);
  EXPECT_LT(grad_check(model_jet_function(m), pts, 1e-3).max_error(), 1e-4);
}

TEST(GradCheck, AnalyticSolutionExact) {
  const auto pts = grad_check_points(50, 3, 1e-3);
  const auto report = grad_check(discounted_forward_jet, pts, 1e-3);
  // Only rounding remains; du_dtau = r e^{-r tau} can be tiny, so it gets the
  // loosest bound.
  EXPECT_LT(report.fields[0].max_error, 1e-8);
  EXPECT_LT(report.fields[3].max_error, 1e-7);
  EXPECT_LT(report.max_error(), 1e-4);
}

TEST(GradCheck, StencilErrorShrinksWithStep) {
  // Pure truncation error: e^x has O(h^4) stencil error, so halving h must
  // cut it by well over the 4x of a second-order scheme.
  const auto pts = grad_check_points(10, 5, 0.05);
  const double e1 = grad_check(discounted_forward_jet, pts, 0.05).fields[3].max_error;
  const double e2 = grad_check(discounted_forward_jet, pts, 0.025).fields[3].max_error;
  EXPECT_GT(e1, 4.0 * e2);
}

TEST(GradCheck, TableFormat) {
  const auto pts = grad_check_points(3, 5, 1e-3);
  std::ostringstream os;
  grad_check(discounted_forward_jet, pts, 1e-3).write_table(os);
  EXPECT_NE(os.str().find("d2u_dxdnu"), std::string::npos);
  EXPECT_THROW(grad_check(discounted_forward_jet, pts, 0.0), ArgumentError);
}

TEST(Backward, ZeroLossGivesZeroGradient) {
  // At tau = 0 the ansatz is exactly the payoff, which matches both boundary
  // targets, and the network term carries a factor tau.
  const auto m = init_model(small_spec(), 6);
  Sampler s(1);
  auto bnd = s.boundary(64);
  for (auto& b : bnd) b.at.point.tau = 0.0;
  const auto res = backward_params(m, {{}, {}, bnd});
  EXPECT_EQ(res.report.bound, 0.0);
  EXPECT_LT(res.gradient.norm(), 1e-10);
}

TEST(Backward, DuplicatedBatchSameGradient) {
  const auto m = init_model(small_spec(), 6);
  const auto sets = small_sets(2, 200);
  CollocationSet twice = sets;
  twice.interior.insert(twice.interior.end(), sets.interior.begin(), sets.interior.end());
  twice.atm.insert(twice.atm.end(), sets.atm.begin(), sets.atm.end());
  twice.boundary.insert(twice.boundary.end(), sets.boundary.begin(), sets.boundary.end());
  const auto a = backward_params(m, batch_of(sets));
  const auto b = backward_params(m, batch_of(twice));
  EXPECT_NEAR(a.report.total, b.report.total, 1e-13 * a.report.total);
  for (std::size_t i = 0; i < a.gradient.values.size(); ++i)
    EXPECT_NEAR(a.gradient.values[i], b.gradient.values[i], 1e-12 * (1.0 + a.gradient.norm()));
}

TEST(Backward, MatchesFiniteDifferences) {
  auto m = init_model(small_spec(), 8);
  const auto sets = small_sets(3, 64);
  const auto batch = batch_of(sets);
  const auto g = backward_params(m, batch);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, m.parameter_count() - 1);
  const double h = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = pick(rng);
    const double w = m.parameters()[k];
    m.parameters()[k] = w + h;
    const double up = evaluate_loss(m, batch).total;
    m.parameters()[k] = w - h;
    const double down = evaluate_loss(m, batch).total;
    m.parameters()[k] = w;
    const double fd = (up - down) / (2.0 * h);
    const double an = g.gradient.values[k];
    EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(std::abs(an), 1e-3)) << "weight " << k;
  }
}

TEST(Backward, SinglePointDirectional) {
  auto m = init_model(small_spec(), 9);
  Sampler s(5);
  const auto one = s.interior(1);
  const LossBatch batch{one, {}, {}};
  const auto g = backward_params(m, batch);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::vector<double> dir(m.parameter_count());
  for (auto& v : dir) v = n01(rng);
  double an = 0.0;
  for (std::size_t i = 0; i < dir.size(); ++i) an += dir[i] * g.gradient.values[i];
  const std::vector<double> w(m.parameters().begin(), m.parameters().end());
  const double h = 1e-4;
  auto loss_at = [&](double t) {
    for (std::size_t i = 0; i < w.size(); ++i) m.parameters()[i] = w[i] + t * dir[i];
    return evaluate_loss(m, batch).total;
  };
  const double fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
  EXPECT_NEAR(fd, an, 1e-4 * std::abs(an));
}

TEST(Backward, LinearInLossScale) {
  const auto m = init_model(small_spec(), 10);
  const auto sets = small_sets(4, 64);
  const LossBatch bnd{{}, {}, sets.boundary};
  LossWeights w1, w2;
  w2.lambda_bound = 2.0;
  const auto a = backward_params(m, bnd, w1);
  const auto b = backward_params(m, bnd, w2);
  for (std::size_t i = 0; i < a.gradient.values.size(); ++i)
    EXPECT_EQ(b.gradient.values[i], 2.0 * a.gradient.values[i]);
}

TEST(Backward, ReportMatchesForwardOnlyLoss) {
  const auto m = init_model(small_spec(), 11);
  const auto sets = small_sets(6, 256);
  const auto a = backward_params(m, batch_of(sets));
  const auto b = evaluate_loss(m, batch_of(sets));
  EXPECT_EQ(a.report.total, b.total);
  EXPECT_EQ(a.report.phys, b.phys);
  const auto ref = total_loss(m, sets);
  EXPECT_NEAR(a.report.total, ref.total, 1e-12 * ref.total);
}

TEST(Backward, ThreadCountInvariant) {
  const auto m = init_model(small_spec(), 12);
  const auto sets = small_sets(7, 3000);
  set_thread_count(1);
  const auto a = backward_params(m, batch_of(sets));
  set_thread_count(4);
  const auto b = backward_params(m, batch_of(sets));
  set_thread_count(0);
  EXPECT_EQ(a.report.total, b.report.total);
  EXPECT_EQ(a.gradient.values, b.gradient.values);
}

TEST(Backward, NonFiniteLossCarriesIndex) {
  auto m = init_model(small_spec(), 13);
  m.parameters()[m.trunk_layers()[0].weight_offset] = std::numeric_limits<double>::quiet_NaN();
  const auto sets = small_sets(8, 64);
  try {
    backward_params(m, batch_of(sets));
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.set(), "interior");
    EXPECT_EQ(e.index(), 0u);
  }
}

TEST(Backward, RejectsEmptyBatch) {
  const auto m = init_model(small_spec(), 13);
  EXPECT_THROW(backward_params(m, {}), ArgumentError);
}

}  // namespace
}  // namespace deepsvm
