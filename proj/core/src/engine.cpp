#include "engine.hpp"

#include <cmath>
#include <numbers>

#include "deepsvm/heston.hpp"

namespace deepsvm::detail {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajor>;
using Weights = Eigen::Map<RowMajor>;

constexpr double kInvSqrt2Pi = 0.3989422804014327;

// GELU g(a) = a Phi(a) and its first three derivatives.
struct GeluDerivs {
  Arr g0, g1, g2, g3;
};

GeluDerivs gelu_derivs(const Eigen::Ref<const Mat>& a, bool third) {
  GeluDerivs out;
  out.g0.resize(a.rows(), a.cols());
  out.g1.resize(a.rows(), a.cols());
  out.g2.resize(a.rows(), a.cols());
  if (third) out.g3.resize(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double z = a(i, j);
      const double cdf = 0.5 * std::erfc(-z * std::numbers::sqrt2 * 0.5);
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
      out.g0(i, j) = z * cdf;
      out.g1(i, j) = cdf + z * pdf;
      out.g2(i, j) = pdf * (2.0 - z * z);
      if (third) out.g3(i, j) = pdf * (z * z * z - 4.0 * z);
    }
  }
  return out;
}

Mat gelu_forward(const Mat& a, int channels, Eigen::Index n) {
  const GeluDerivs g = gelu_derivs(a.leftCols(n), false);
  Mat y(a.rows(), a.cols());
  auto blk = [n](auto& m, int c) { return m.middleCols(c * n, n).array(); };
  blk(y, kV) = g.g0;
  if (channels == kJetChannels) {
    const auto ax = blk(a, kX), an = blk(a, kN);
    blk(y, kX) = g.g1 * ax;
    blk(y, kN) = g.g1 * an;
    blk(y, kT) = g.g1 * blk(a, kT);
    blk(y, kXX) = g.g2 * ax * ax + g.g1 * blk(a, kXX);
    blk(y, kNN) = g.g2 * an * an + g.g1 * blk(a, kNN);
    blk(y, kXN) = g.g2 * ax * an + g.g1 * blk(a, kXN);
  }
  return y;
}

Mat gelu_backward(const Mat& a, const Mat& ybar, int channels, Eigen::Index n) {
  const GeluDerivs g = gelu_derivs(a.leftCols(n), channels == kJetChannels);
  Mat abar(a.rows(), a.cols());
  auto blk = [n](auto& m, int c) { return m.middleCols(c * n, n).array(); };
  if (channels == 1) {
    blk(abar, kV) = blk(ybar, kV) * g.g1;
    return abar;
  }
  const auto ax = blk(a, kX), an = blk(a, kN), at = blk(a, kT);
  const auto bx = blk(ybar, kX), bn = blk(ybar, kN), bt = blk(ybar, kT);
  const auto bxx = blk(ybar, kXX), bnn = blk(ybar, kNN), bxn = blk(ybar, kXN);
  blk(abar, kV) = blk(ybar, kV) * g.g1 + (bx * ax + bn * an + bt * at) * g.g2 +
                  (bxx * ax * ax + bnn * an * an + bxn * ax * an) * g.g3 +
                  (bxx * blk(a, kXX) + bnn * blk(a, kNN) + bxn * blk(a, kXN)) * g.g2;
  blk(abar, kX) = bx * g.g1 + g.g2 * (2.0 * bxx * ax + bxn * an);
  blk(abar, kN) = bn * g.g1 + g.g2 * (2.0 * bnn * an + bxn * ax);
  blk(abar, kT) = bt * g.g1;
  blk(abar, kXX) = bxx * g.g1;
  blk(abar, kNN) = bnn * g.g1;
  blk(abar, kXN) = bxn * g.g1;
  return abar;
}

}  // namespace

void mlp_forward(std::span<const double> params, const std::vector<LayerLayout>& layers,
                 Mat input, int channels, Eigen::Index batch, MlpTape& tape) {
  tape.inputs.resize(layers.size());
  tape.pre.resize(layers.size());
  Mat h = std::move(input);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerLayout& layer = layers[l];
    const ConstWeights w(params.data() + layer.weight_offset, static_cast<Eigen::Index>(layer.rows),
                         static_cast<Eigen::Index>(layer.cols));
    const Eigen::Map<const Eigen::VectorXd> b(params.data() + layer.bias_offset,
                                              static_cast<Eigen::Index>(layer.rows));
    Mat a = w * h;
    a.leftCols(batch).colwise() += b;
    tape.inputs[l] = std::move(h);
    if (layer.gelu) {
      Mat y = gelu_forward(a, channels, batch);
      h = layer.skip ? Mat(tape.inputs[l] + y) : std::move(y);
      tape.pre[l] = std::move(a);
    } else {
      h = std::move(a);
      tape.pre[l].resize(0, 0);
    }
  }
  tape.output = std::move(h);
}

void mlp_backward(std::span<const double> params, const std::vector<LayerLayout>& layers,
                  const MlpTape& tape, Mat grad_out, int channels, Eigen::Index batch,
                  std::span<double> grad) {
  Mat g = std::move(grad_out);
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerLayout& layer = layers[l];
    const auto rows = static_cast<Eigen::Index>(layer.rows);
    const auto cols = static_cast<Eigen::Index>(layer.cols);
    const ConstWeights w(params.data() + layer.weight_offset, rows, cols);
    Mat abar = layer.gelu ? gelu_backward(tape.pre[l], g, channels, batch) : g;
    Weights gw(grad.data() + layer.weight_offset, rows, cols);
    gw.noalias() += abar * tape.inputs[l].transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + layer.bias_offset, rows);
    gb += abar.leftCols(batch).rowwise().sum();
    if (l == 0) break;
    Mat hbar = w.transpose() * abar;
    if (layer.skip) hbar += g;
    g = std::move(hbar);
  }
}

void forward_batch(const DeepONetModel& model, std::span<const CollocationPoint> points,
                   int channels, BatchState& state) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const DomainBounds& bounds = model.bounds();
  state.channels = channels;
  state.batch = n;
  state.x.resize(n);
  state.tau.resize(n);

  Mat branch_in(5, n);
  Mat trunk_in = Mat::Zero(3, channels * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const CollocationPoint& cp = points[static_cast<std::size_t>(j)];
    const NormalizedInputs z = normalize_inputs(cp.params, cp.point, bounds);
    for (int i = 0; i < 5; ++i) branch_in(i, j) = z[i];
    for (int i = 0; i < 3; ++i) trunk_in(i, j) = z[5 + i];
    state.x(j) = cp.point.x;
    state.tau(j) = cp.point.tau;
  }
  if (channels == kJetChannels) {
    trunk_in.middleCols(kX * n, n).row(0).setConstant(normalization_slope(bounds.x));
    trunk_in.middleCols(kN * n, n).row(1).setConstant(normalization_slope(bounds.nu));
    trunk_in.middleCols(kT * n, n).row(2).setConstant(normalization_slope(bounds.tau));
  }

  const auto params = model.parameters();
  mlp_forward(params, model.branch_layers(), std::move(branch_in), 1, n, state.branch);
  mlp_forward(params, model.trunk_layers(), std::move(trunk_in), channels, n, state.trunk);

  const Mat& b = state.branch.output;
  const Mat& t = state.trunk.output;
  state.net.resize(channels, n);
  for (int c = 0; c < channels; ++c) {
    state.net.row(c) = (b.array() * t.middleCols(c * n, n).array()).colwise().sum();
  }

  const Arr& net = state.net;
  const auto& x = state.x;
  const auto& tau = state.tau;
  state.u.resize(channels, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double z = net(kV, j);
    const double s = softplus(z);
    const double ex = std::exp(x(j));
    state.u(kV, j) = payoff(x(j)) + tau(j) * s;
    if (channels != kJetChannels) continue;
    const double s1 = sigmoid(z);
    const double s2 = s1 * (1.0 - s1);
    const double dphi = x(j) > 0.0 ? ex : (x(j) == 0.0 ? 0.5 : 0.0);
    const double d2phi = x(j) > 0.0 ? ex : 0.0;
    const double nx = net(kX, j), nn = net(kN, j);
    state.u(kX, j) = dphi + tau(j) * s1 * nx;
    state.u(kN, j) = tau(j) * s1 * nn;
    state.u(kT, j) = s + tau(j) * s1 * net(kT, j);
    state.u(kXX, j) = d2phi + tau(j) * (s2 * nx * nx + s1 * net(kXX, j));
    state.u(kNN, j) = tau(j) * (s2 * nn * nn + s1 * net(kNN, j));
    state.u(kXN, j) = tau(j) * (s2 * nx * nn + s1 * net(kXN, j));
  }
}

void backward_batch(const DeepONetModel& model, const BatchState& state, const Arr& u_bar,
                    std::span<double> grad) {
  const int channels = state.channels;
  const Eigen::Index n = state.batch;
  const Arr& net = state.net;
  Arr net_bar(channels, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double tau = state.tau(j);
    const double s1 = sigmoid(net(kV, j));
    if (channels != kJetChannels) {
      net_bar(kV, j) = tau * s1 * u_bar(kV, j);
      continue;
    }
    const double s2 = s1 * (1.0 - s1);
    const double s3 = s2 * (1.0 - 2.0 * s1);
    const double nx = net(kX, j), nn = net(kN, j);
    const double bv = u_bar(kV, j), bx = u_bar(kX, j), bn = u_bar(kN, j), bt = u_bar(kT, j);
    const double bxx = u_bar(kXX, j), bnn = u_bar(kNN, j), bxn = u_bar(kXN, j);
    net_bar(kV, j) = tau * (bv * s1 + bx * s2 * nx + bn * s2 * nn +
                            bxx * (s3 * nx * nx + s2 * net(kXX, j)) +
                            bnn * (s3 * nn * nn + s2 * net(kNN, j)) +
                            bxn * (s3 * nx * nn + s2 * net(kXN, j))) +
                     bt * (s1 + tau * s2 * net(kT, j));
    net_bar(kX, j) = tau * (bx * s1 + 2.0 * bxx * s2 * nx + bxn * s2 * nn);
    net_bar(kN, j) = tau * (bn * s1 + 2.0 * bnn * s2 * nn + bxn * s2 * nx);
    net_bar(kT, j) = tau * bt * s1;
    net_bar(kXX, j) = tau * bxx * s1;
    net_bar(kNN, j) = tau * bnn * s1;
    net_bar(kXN, j) = tau * bxn * s1;
  }

  const Mat& b = state.branch.output;
  const Mat& t = state.trunk.output;
  Mat t_bar(t.rows(), t.cols());
  Mat b_bar = Mat::Zero(b.rows(), b.cols());
  for (int c = 0; c < channels; ++c) {
    t_bar.middleCols(c * n, n).array() = b.array().rowwise() * net_bar.row(c);
    b_bar.array() += t.middleCols(c * n, n).array().rowwise() * net_bar.row(c);
  }
  const auto params = model.parameters();
  mlp_backward(params, model.trunk_layers(), state.trunk, std::move(t_bar), channels, n, grad);
  mlp_backward(params, model.branch_layers(), state.branch, std::move(b_bar), 1, n, grad);
}

}  // namespace deepsvm::detail
