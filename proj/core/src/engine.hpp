#pragma once

// Batched forward/backward kernels shared by the network and autodiff
// modules. Activations are stored channel-blocked: a (width x C*B) matrix
// whose column block c holds channel c for all B points. Channel order is
// value, d/dx, d/dnu, d/dtau, d2/dx2, d2/dnu2, d2/dxdnu; a value-only pass
// uses C = 1.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "deepsvm/network.hpp"
#include "deepsvm/sampling.hpp"

namespace deepsvm::detail {

using Mat = Eigen::MatrixXd;
using Arr = Eigen::ArrayXXd;

inline constexpr int kJetChannels = 7;
enum Channel : int { kV = 0, kX, kN, kT, kXX, kNN, kXN };

struct MlpTape {
  std::vector<Mat> inputs;
  std::vector<Mat> pre;
  Mat output;
};

void mlp_forward(std::span<const double> params, const std::vector<LayerLayout>& layers,
                 Mat input, int channels, Eigen::Index batch, MlpTape& tape);

/// Accumulates weight gradients into `grad` (same layout as params).
void mlp_backward(std::span<const double> params, const std::vector<LayerLayout>& layers,
                  const MlpTape& tape, Mat grad_out, int channels, Eigen::Index batch,
                  std::span<double> grad);

struct BatchState {
  int channels = 1;
  Eigen::Index batch = 0;
  MlpTape branch;
  MlpTape trunk;
  Arr net;  // channels x batch: raw network output and its input partials
  Arr u;    // channels x batch: ansatz output and its input partials
  Eigen::ArrayXd x;
  Eigen::ArrayXd tau;
};

/// Throws DomainError for out-of-bounds inputs.
void forward_batch(const DeepONetModel& model, std::span<const CollocationPoint> points,
                   int channels, BatchState& state);

/// u_bar holds dLoss/du per channel (channels x batch).
void backward_batch(const DeepONetModel& model, const BatchState& state, const Arr& u_bar,
                    std::span<double> grad);

}  // namespace deepsvm::detail
