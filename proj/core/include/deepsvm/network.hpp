#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "deepsvm/aligned.hpp"
#include "deepsvm/heston.hpp"

namespace deepsvm {

/// GELU MLP: input layer (no skip), hidden_depth - 1 residual hidden layers
/// h <- h + gelu(W h + b), then a linear projection to output_width.
struct MLPSpec {
  std::size_t input_width = 0;
  std::size_t hidden_width = 128;
  std::size_t hidden_depth = 4;
  std::size_t output_width = 128;

  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const MLPSpec&) const = default;
};

/// Placement of one affine layer inside the flat parameter vector. Weights
/// are row-major (rows = fan-out, cols = fan-in).
struct LayerLayout {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  bool gelu = true;
  bool skip = false;
};

struct ModelSpec {
  MLPSpec branch{5, 128, 4, 128};
  MLPSpec trunk{3, 128, 4, 128};
  DomainBounds bounds;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

/// Bookkeeping carried through checkpoints.
struct ModelMetadata {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string stage = "init";
  std::uint64_t step = 0;
  double loss_phys = 0.0;
  double loss_bound = 0.0;
  double loss_atm = 0.0;
  double loss_total = 0.0;
  bool operator==(const ModelMetadata&) const = default;
};

/// Branch/trunk DeepONet with all trainable weights in one flat vector.
class DeepONetModel {
 public:
  DeepONetModel() = default;
  explicit DeepONetModel(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const DomainBounds& bounds() const { return spec_.bounds; }
  std::size_t embedding_width() const { return spec_.branch.output_width; }

  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  const std::vector<LayerLayout>& branch_layers() const { return branch_; }
  const std::vector<LayerLayout>& trunk_layers() const { return trunk_; }

  ModelMetadata metadata;

 private:
  ModelSpec spec_;
  AlignedVector params_;
  std::vector<LayerLayout> branch_;
  std::vector<LayerLayout> trunk_;
};

/// Glorot-uniform weights and zero biases from a seeded generator.
DeepONetModel init_model(const ModelSpec& spec, std::uint64_t seed);

/// <b(mu), t(x, nu, tau)> on normalized inputs. Throws DomainError outside bounds.
double raw_output(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d);

/// phi(x) + tau * softplus(raw_output). Never below the intrinsic value.
double u_pred(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d);

double softplus(double z) noexcept;
double sigmoid(double z) noexcept;

/// Text checkpoint with hex-encoded little-endian doubles; bit-exact.
inline constexpr const char* kCheckpointVersion = "deepsvm-ckpt-1";

void save_checkpoint(const DeepONetModel& model, const std::filesystem::path& path);
/// Throws CorruptCheckpointError, VersionMismatchError or ShapeMismatchError.
DeepONetModel load_checkpoint(const std::filesystem::path& path);

void write_checkpoint(std::ostream& os, const DeepONetModel& model);
DeepONetModel read_checkpoint(std::istream& is);

}  // namespace deepsvm
