#include "deepsvm/network.hpp"

#include <cmath>
#include <random>

#include "deepsvm/errors.hpp"
#include "engine.hpp"

namespace deepsvm {

void MLPSpec::validate() const {
  if (input_width < 1 || hidden_width < 1 || output_width < 1) {
    throw ArgumentError("mlp: widths must be >= 1");
  }
  if (hidden_depth < 1) throw ArgumentError("mlp: hidden depth must be >= 1");
}

std::size_t MLPSpec::parameter_count() const {
  return (input_width + 1) * hidden_width + (hidden_depth - 1) * (hidden_width + 1) * hidden_width +
         (hidden_width + 1) * output_width;
}

void ModelSpec::validate() const {
  branch.validate();
  trunk.validate();
  bounds.validate();
  if (branch.input_width != 5) throw ArgumentError("model: branch input width must be 5");
  if (trunk.input_width != 3) throw ArgumentError("model: trunk input width must be 3");
  if (branch.output_width != trunk.output_width) {
    throw ArgumentError("model: branch and trunk embedding widths differ");
  }
}

namespace {

std::vector<LayerLayout> make_layout(const std::string& prefix, const MLPSpec& s,
                                     std::size_t& offset) {
  std::vector<LayerLayout> layers;
  auto add = [&](std::size_t rows, std::size_t cols, bool gelu, bool skip) {
    LayerLayout l;
    l.name = prefix + "." + std::to_string(layers.size());
    l.rows = rows;
    l.cols = cols;
    l.weight_offset = offset;
    offset += rows * cols;
    l.bias_offset = offset;
    offset += rows;
    l.gelu = gelu;
    l.skip = skip;
    layers.push_back(std::move(l));
  };
  add(s.hidden_width, s.input_width, true, false);
  for (std::size_t k = 1; k < s.hidden_depth; ++k) add(s.hidden_width, s.hidden_width, true, true);
  add(s.output_width, s.hidden_width, false, false);
  return layers;
}

}  // namespace

DeepONetModel::DeepONetModel(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  branch_ = make_layout("branch", spec_.branch, offset);
  trunk_ = make_layout("trunk", spec_.trunk, offset);
  params_.assign(offset, 0.0);
}

DeepONetModel init_model(const ModelSpec& spec, std::uint64_t seed) {
  DeepONetModel model(spec);
  std::mt19937_64 rng(seed);
  auto params = model.parameters();
  auto fill = [&](const std::vector<LayerLayout>& layers) {
    for (const auto& l : layers) {
      const double limit = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (std::size_t i = 0; i < l.rows * l.cols; ++i) params[l.weight_offset + i] = dist(rng);
    }
  };
  fill(model.branch_layers());
  fill(model.trunk_layers());
  model.metadata.seed = seed;
  return model;
}

double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

detail::BatchState evaluate_single(const DeepONetModel& model, const HestonParams& p,
                                   const DomainPoint& d) {
  const CollocationPoint cp{p, d};
  detail::BatchState state;
  detail::forward_batch(model, std::span(&cp, 1), detail::kJetChannels, state);
  return state;
}

}  // namespace

double raw_output(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d) {
  return evaluate_single(model, p, d).net(detail::kV, 0);
}

double u_pred(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d) {
  return evaluate_single(model, p, d).u(detail::kV, 0);
}

}  // namespace deepsvm
