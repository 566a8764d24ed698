#include "deepsvm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "deepsvm/errors.hpp"
#include "deepsvm/format.hpp"
#include "deepsvm/lbfgs.hpp"

namespace deepsvm {

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string("config: ") + name + " must be positive");
  };
  positive(hidden_width, "hidden_width");
  positive(hidden_depth, "hidden_depth");
  positive(embedding_width, "embedding_width");
  positive(decay_interval, "decay_interval");
  positive(batch_size, "batch_size");
  positive(rar_interval, "rar_interval");
  positive(interior_size, "interior_size");
  positive(rar_candidates, "rar_candidates");
  positive(atm_count, "atm_count");
  positive(boundary_count, "boundary_count");
  positive(lbfgs_memory, "lbfgs_memory");
  positive(chunk_size, "chunk_size");
  positive(checkpoint_interval, "checkpoint_interval");
  if (rar_top_k > rar_candidates) throw ConfigError("config: rar_top_k exceeds rar_candidates");
  if (rar_top_k > interior_size) throw ConfigError("config: rar_top_k exceeds interior_size");
  if (boundary_count % 2 != 0 || boundary_augment % 2 != 0) {
    throw ConfigError("config: boundary counts must be even");
  }
  if (!(learning_rate > 0.0) || !(decay_factor > 0.0)) {
    throw ConfigError("config: learning_rate and decay_factor must be positive");
  }
  if (!(alpha_x > 0.0)) throw ConfigError("config: alpha_x must be positive");
}

ModelSpec TrainConfig::model_spec() const {
  ModelSpec s;
  s.branch = {5, hidden_width, hidden_depth, embedding_width};
  s.trunk = {3, hidden_width, hidden_depth, embedding_width};
  return s;
}

LossWeights TrainConfig::loss_weights() const { return {lambda_bound, lambda_atm, lambda_max}; }

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.hidden_width = 64;
  c.hidden_depth = 2;
  c.embedding_width = 64;
  c.adam_steps = 2000;
  c.learning_rate = 1e-3;
  c.decay_interval = 400;
  c.batch_size = 2048;
  c.rar_interval = 250;
  c.interior_size = 20000;
  c.rar_candidates = 5000;
  c.rar_top_k = 2000;
  c.atm_count = 1024;
  c.boundary_count = 512;
  c.boundary_augment = 512;
  c.lbfgs_iterations = 200;
  c.checkpoint_interval = 500;
  return c;
}

double lr_schedule(std::size_t step, const TrainConfig& config) {
  const auto halvings = static_cast<double>(step / config.decay_interval);
  return config.learning_rate * std::pow(config.decay_factor, halvings);
}

void TrainLog::append(const TrainRecord& r) {
  if (!records.empty() && r.step <= records.back().step) {
    throw ArgumentError("train log: steps must strictly increase");
  }
  records.push_back(r);
}

void TrainLog::write(std::ostream& os, bool include_wall_time) const {
  os << "step,stage,lr,loss_phys,loss_bound,loss_atm,loss_total,rar_event";
  if (include_wall_time) os << ",wall_seconds";
  os << '\n';
  for (const auto& r : records) {
    os << r.step << ',' << r.stage << ',' << format_double(r.lr) << ','
       << format_double(r.loss.phys) << ',' << format_double(r.loss.bound) << ','
       << format_double(r.loss.atm) << ',' << format_double(r.loss.total) << ','
       << (r.rar_event ? 1 : 0);
    if (include_wall_time) os << ',' << format_double(r.wall_seconds);
    os << '\n';
  }
}

LossReport adam_step(AdamState& state, DeepONetModel& model, const LossBatch& batch, double lr,
                     const TrainConfig& config) {
  LossAndGradient lg;
  try {
    lg = backward_params(model, batch, config.loss_weights(), config.chunk_size);
  } catch (const NonFiniteLossError& e) {
    throw TrainingAbort(std::string("adam: ") + e.what());
  }
  const auto& g = lg.gradient.values;
  auto w = model.parameters();
  if (state.m.size() != w.size()) {
    state.m.assign(w.size(), 0.0);
    state.v.assign(w.size(), 0.0);
    state.steps_taken = 0;
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw TrainingAbort("adam: non-finite gradient entry " + std::to_string(i) + " at step " +
                          std::to_string(state.steps_taken));
    }
  }
  ++state.steps_taken;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.steps_taken));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.steps_taken));
  for (std::size_t i = 0; i < g.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + config.adam_epsilon);
  }
  return lg.report;
}

TrainingState::TrainingState(const TrainConfig& config)
    : model(init_model((config.validate(), config.model_spec()), config.seed)),
      sampler(config.seed, SamplingConfig{DomainBounds{}, config.alpha_x, 0.05}),
      rng(config.seed ^ 0x5DEECE66Dull) {
  model.metadata.config_hash = config_hash(config);
  sets.interior = sampler.interior(config.interior_size);
  sets.atm = sampler.atm(config.atm_count);
  sets.boundary = sampler.boundary(config.boundary_count);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void stamp(DeepONetModel& model, const std::string& stage, std::size_t step, const LossReport& l) {
  model.metadata.stage = stage;
  model.metadata.step = step;
  model.metadata.loss_phys = l.phys;
  model.metadata.loss_bound = l.bound;
  model.metadata.loss_atm = l.atm;
  model.metadata.loss_total = l.total;
}

}  // namespace

void run_stage1(const TrainConfig& config, TrainingState& state, const TrainHooks& hooks) {
  config.validate();
  const auto t0 = Clock::now();
  const LossWeights weights = config.loss_weights();
  state.initial_loss = evaluate_loss(
      state.model, LossBatch{state.sets.interior, state.sets.atm, state.sets.boundary}, weights,
      config.chunk_size);

  const std::size_t n_interior = state.sets.interior.size();
  const std::size_t batch = std::min(config.batch_size, n_interior);
  std::vector<std::size_t> order(n_interior);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n_interior;  // forces a shuffle before the first batch
  std::vector<CollocationPoint> minibatch(batch);

  LossReport last;
  for (std::size_t step = 0; step < config.adam_steps; ++step) {
    const bool rar = step > 0 && step % config.rar_interval == 0;
    if (rar) {
      const auto candidates = state.sampler.interior(config.rar_candidates);
      const auto residuals = compute_residuals(state.model, candidates);
      RarSelection selection;
      CollocationSet updated = rar_replace(state.sets, candidates, residuals, config.rar_top_k,
                                           state.rng, &selection);
      if (hooks.on_rar) hooks.on_rar(step, state.sets, updated, selection);
      state.sets = std::move(updated);
    }

    if (batch == n_interior) {
      std::copy(state.sets.interior.begin(), state.sets.interior.end(), minibatch.begin());
    } else {
      if (cursor + batch > n_interior) {
        std::shuffle(order.begin(), order.end(), state.rng);
        cursor = 0;
      }
      for (std::size_t i = 0; i < batch; ++i) minibatch[i] = state.sets.interior[order[cursor + i]];
      cursor += batch;
    }

    const double lr = lr_schedule(step, config);
    last = adam_step(state.adam, state.model,
                     LossBatch{minibatch, state.sets.atm, state.sets.boundary}, lr, config);
    TrainRecord rec;
    rec.step = step;
    rec.stage = 1;
    rec.lr = lr;
    rec.loss = last;
    rec.rar_event = rar;
    rec.wall_seconds = seconds_since(t0);
    state.log.append(rec);
    if (hooks.on_record) hooks.on_record(rec);
    if (hooks.on_checkpoint && (step + 1) % config.checkpoint_interval == 0 &&
        step + 1 != config.adam_steps) {
      stamp(state.model, "adam", step + 1, last);
      hooks.on_checkpoint(state.model, "adam", step + 1);
    }
  }
  stamp(state.model, "adam", config.adam_steps, last);
  if (hooks.on_checkpoint) hooks.on_checkpoint(state.model, "adam", config.adam_steps);
}

Stage2Status run_stage2(const TrainConfig& config, TrainingState& state, const TrainHooks& hooks) {
  config.validate();
  const auto t0 = Clock::now();
  const LossWeights weights = config.loss_weights();
  if (config.boundary_augment > 0) {
    auto extra = state.sampler.boundary(config.boundary_augment);
    state.sets.boundary.insert(state.sets.boundary.end(), extra.begin(), extra.end());
  }
  const LossBatch full{state.sets.interior, state.sets.atm, state.sets.boundary};

  LossReport last_report;
  Objective objective = [&](std::span<const double> x, std::span<double> grad) {
    auto w = state.model.parameters();
    std::copy(x.begin(), x.end(), w.begin());
    LossAndGradient lg;
    try {
      lg = backward_params(state.model, full, weights, config.chunk_size);
    } catch (const NonFiniteLossError&) {
      std::fill(grad.begin(), grad.end(), 0.0);
      return std::numeric_limits<double>::infinity();
    }
    std::copy(lg.gradient.values.begin(), lg.gradient.values.end(), grad.begin());
    last_report = lg.report;
    return lg.report.total;
  };

  LbfgsOptions opt;
  opt.memory = config.lbfgs_memory;
  opt.max_iterations = config.lbfgs_iterations;
  opt.rel_tolerance = config.lbfgs_tolerance;

  const std::size_t base = state.log.records.empty() ? 0 : state.log.records.back().step + 1;
  std::vector<double> x(state.model.parameters().begin(), state.model.parameters().end());
  auto on_iteration = [&](const LbfgsIteration& it) {
    TrainRecord rec;
    rec.step = base + it.iteration - 1;
    rec.stage = 2;
    rec.lr = it.step;
    rec.loss = last_report;
    rec.wall_seconds = seconds_since(t0);
    state.log.append(rec);
    if (hooks.on_record) hooks.on_record(rec);
    if (hooks.on_checkpoint && it.iteration % config.checkpoint_interval == 0) {
      stamp(state.model, "lbfgs", rec.step + 1, last_report);
      hooks.on_checkpoint(state.model, "lbfgs", rec.step + 1);
    }
  };
  const LbfgsResult res = minimize_lbfgs(objective, x, opt, on_iteration);

  auto w = state.model.parameters();
  std::copy(x.begin(), x.end(), w.begin());
  state.final_loss = evaluate_loss(state.model, full, weights, config.chunk_size);
  stamp(state.model, "lbfgs", base + res.iterations, state.final_loss);
  if (hooks.on_checkpoint) hooks.on_checkpoint(state.model, "lbfgs", base + res.iterations);

  switch (res.status) {
    case LbfgsStatus::kLineSearchFailure: return Stage2Status::kLineSearchWarning;
    case LbfgsStatus::kRelativeDecrease:
    case LbfgsStatus::kGradientTolerance: return Stage2Status::kConverged;
    case LbfgsStatus::kIterationCap: break;
  }
  return Stage2Status::kCompleted;
}

}  // namespace deepsvm
