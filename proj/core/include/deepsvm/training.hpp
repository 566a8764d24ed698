#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "deepsvm/autodiff.hpp"
#include "deepsvm/network.hpp"
#include "deepsvm/physics.hpp"
#include "deepsvm/sampling.hpp"

namespace deepsvm {

/// Full two-stage schedule. Field names double as config-file keys.
struct TrainConfig {
  // Network.
  std::size_t hidden_width = 128;
  std::size_t hidden_depth = 4;
  std::size_t embedding_width = 128;

  // Stage 1: Adam with step decay and residual-based refinement.
  std::size_t adam_steps = 10000;
  double learning_rate = 1e-4;
  double decay_factor = 0.5;
  std::size_t decay_interval = 2000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 20000;
  std::size_t rar_interval = 500;
  std::size_t interior_size = 200000;
  std::size_t rar_candidates = 50000;
  std::size_t rar_top_k = 20000;
  std::size_t atm_count = 4096;
  std::size_t boundary_count = 2048;

  // Stage 2: L-BFGS on the full deterministic loss.
  std::size_t boundary_augment = 2048;
  std::size_t lbfgs_memory = 20;
  std::size_t lbfgs_iterations = 5000;
  double lbfgs_tolerance = 1e-12;

  // Loss and sampling.
  double lambda_bound = 1.0;
  double lambda_atm = 1.0;
  double lambda_max = 0.1;
  double alpha_x = 2.0;

  std::uint64_t seed = 0;
  std::size_t chunk_size = kDefaultChunk;
  std::size_t checkpoint_interval = 1000;

  void validate() const;
  ModelSpec model_spec() const;
  LossWeights loss_weights() const;
  bool operator==(const TrainConfig&) const = default;

  /// Reduced profile that trains in minutes on a desktop.
  static TrainConfig desk_scale();
};

/// learning_rate * decay_factor^floor(step / decay_interval).
double lr_schedule(std::size_t step, const TrainConfig& config = {});

struct TrainRecord {
  std::size_t step = 0;
  int stage = 1;
  double lr = 0.0;  // Adam learning rate, or accepted L-BFGS step length
  LossReport loss;
  bool rar_event = false;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;

  /// Throws ArgumentError unless steps strictly increase.
  void append(const TrainRecord& r);
  /// Columnar text, one row per step. Wall time is the only
  /// non-reproducible column and can be omitted.
  void write(std::ostream& os, bool include_wall_time = true) const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t steps_taken = 0;
};

/// One Adam update at learning rate `lr`. Returns the loss at the pre-update
/// weights. Throws TrainingAbort on a non-finite loss or gradient.
LossReport adam_step(AdamState& state, DeepONetModel& model, const LossBatch& batch, double lr,
                     const TrainConfig& config);

/// Everything the two stages share: weights, point sets, generators, log.
struct TrainingState {
  TrainingState(const TrainConfig& config);

  DeepONetModel model;
  Sampler sampler;
  CollocationSet sets;
  std::mt19937_64 rng;
  AdamState adam;
  TrainLog log;
  LossReport initial_loss;  // full-set loss before the first update
  LossReport final_loss;
};

struct TrainHooks {
  std::function<void(const TrainRecord&)> on_record;
  std::function<void(const DeepONetModel&, const std::string& stage, std::size_t step)> on_checkpoint;
  std::function<void(std::size_t step, const CollocationSet& before, const CollocationSet& after,
                     const RarSelection&)>
      on_rar;
};

enum class Stage2Status { kCompleted, kConverged, kLineSearchWarning };

void run_stage1(const TrainConfig& config, TrainingState& state, const TrainHooks& hooks = {});

Stage2Status run_stage2(const TrainConfig& config, TrainingState& state,
                        const TrainHooks& hooks = {});

/// Parses the flat `key = value` format; unknown keys are errors.
TrainConfig parse_train_config(std::istream& is);
TrainConfig load_train_config(const std::string& path);
void write_train_config(std::ostream& os, const TrainConfig& config);
/// Stable FNV-1a digest of the canonical config text.
std::string config_hash(const TrainConfig& config);

}  // namespace deepsvm
