#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "deepsvm/errors.hpp"
#include "deepsvm/lbfgs.hpp"
#include "deepsvm/training.hpp"

namespace deepsvm {
namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.hidden_width = 12;
  c.hidden_depth = 2;
  c.embedding_width = 8;
  c.adam_steps = 60;
  c.learning_rate = 1e-3;
  c.decay_interval = 25;
  c.batch_size = 128;
  c.rar_interval = 20;
  c.interior_size = 400;
  c.rar_candidates = 200;
  c.rar_top_k = 50;
  c.atm_count = 32;
  c.boundary_count = 32;
  c.boundary_augment = 16;
  c.lbfgs_iterations = 15;
  c.checkpoint_interval = 1000;
  c.seed = 17;
  return c;
}

TEST(LrSchedule, DocumentedSpotChecks) {
  const TrainConfig c;
  EXPECT_EQ(lr_schedule(0, c), 1e-4);
  EXPECT_EQ(lr_schedule(1999, c), 1e-4);
  EXPECT_EQ(lr_schedule(2000, c), 5e-5);
  EXPECT_EQ(lr_schedule(4000, c), 2.5e-5);
  EXPECT_EQ(lr_schedule(9999, c), 6.25e-6);
}

TEST(LrSchedule, ClosedFormEverywhere) {
  const TrainConfig c;
  for (std::size_t s = 0; s <= 10000; ++s)
    ASSERT_EQ(lr_schedule(s, c), 1e-4 * std::pow(0.5, static_cast<double>(s / 2000))) << s;
}

TEST(Config, ShippedDeskFileMatchesProfile) {
  EXPECT_EQ(load_train_config(DEEPSVM_SOURCE_DIR "/configs/desk.conf"), TrainConfig::desk_scale());
}

TEST(Config, DeskScaleProfile) {
  const auto c = TrainConfig::desk_scale();
  EXPECT_EQ(c.hidden_width, 64u);
  EXPECT_EQ(c.hidden_depth, 2u);
  EXPECT_EQ(c.embedding_width, 64u);
  EXPECT_EQ(c.interior_size, 20000u);
  EXPECT_EQ(c.atm_count, 1024u);
  EXPECT_EQ(c.boundary_count, 512u);
  EXPECT_EQ(c.boundary_augment, 512u);
  EXPECT_EQ(c.adam_steps, 2000u);
  EXPECT_EQ(c.rar_interval, 250u);
  EXPECT_EQ(c.rar_candidates, 5000u);
  EXPECT_EQ(c.rar_top_k, 2000u);
  EXPECT_EQ(c.lbfgs_iterations, 200u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RoundTrip) {
  const auto c = TrainConfig::desk_scale();
  std::ostringstream os;
  write_train_config(os, c);
  std::istringstream is(os.str());
  EXPECT_EQ(parse_train_config(is), c);
  EXPECT_EQ(config_hash(c), config_hash(TrainConfig::desk_scale()));
  EXPECT_NE(config_hash(c), config_hash(TrainConfig{}));
  EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, CommentsAndPartialOverride) {
  std::istringstream is("# desk run\nadam_steps = 12  # short\n\nlearning_rate=0.5\n");
  const auto c = parse_train_config(is);
  EXPECT_EQ(c.adam_steps, 12u);
  EXPECT_EQ(c.learning_rate, 0.5);
  EXPECT_EQ(c.batch_size, TrainConfig{}.batch_size);
}

TEST(Config, Errors) {
  std::istringstream unknown("adam_stepz = 3\n");
  EXPECT_THROW(parse_train_config(unknown), ConfigError);
  std::istringstream bad("adam_steps = three\n");
  EXPECT_THROW(parse_train_config(bad), ConfigError);
  std::istringstream negative("batch_size = -4\n");
  EXPECT_THROW(parse_train_config(negative), ConfigError);
  std::istringstream invalid("rar_top_k = 60000\n");
  EXPECT_THROW(parse_train_config(invalid), ConfigError);
  try {
    load_train_config("/nonexistent/desk.conf");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/desk.conf"), std::string::npos);
  }
}

TEST(TrainLog, StrictlyIncreasingSteps) {
  TrainLog log;
  log.append({0, 1, 1e-3, {}, false, 0.0});
  log.append({1, 1, 1e-3, {}, false, 0.0});
  EXPECT_THROW(log.append({1, 1, 1e-3, {}, false, 0.0}), ArgumentError);
  std::ostringstream with, without;
  log.write(with);
  log.write(without, false);
  EXPECT_NE(with.str().find("wall_seconds"), std::string::npos);
  EXPECT_EQ(without.str().find("wall_seconds"), std::string::npos);
}

TEST(Adam, ZeroGradientLeavesWeights) {
  const auto cfg = tiny_config();
  auto model = init_model(cfg.model_spec(), 1);
  const std::vector<double> before(model.parameters().begin(), model.parameters().end());
  Sampler s(1);
  auto bnd = s.boundary(16);
  for (auto& b : bnd) b.at.point.tau = 0.0;
  AdamState st;
  for (int i = 0; i < 3; ++i) adam_step(st, model, {{}, {}, bnd}, 1e-3, cfg);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), model.parameters().begin()));
}

TEST(Adam, AbortsOnNonFiniteLoss) {
  const auto cfg = tiny_config();
  auto model = init_model(cfg.model_spec(), 1);
  model.parameters()[0] = std::nan("");
  Sampler s(1);
  const auto pts = s.interior(8);
  AdamState st;
  EXPECT_THROW(adam_step(st, model, {pts, {}, {}}, 1e-3, cfg), TrainingAbort);
}

TEST(Stage1, RarScheduleAndDeterminism) {
  const auto cfg = tiny_config();
  TrainingState a(cfg), b(cfg);
  std::vector<std::size_t> rar_steps;
  TrainHooks hooks;
  hooks.on_rar = [&](std::size_t step, const CollocationSet& before, const CollocationSet& after,
                     const RarSelection& sel) {
    rar_steps.push_back(step);
    EXPECT_EQ(after.interior.size(), before.interior.size());
    EXPECT_EQ(sel.selected.size(), cfg.rar_top_k);
    EXPECT_EQ(after.atm, before.atm);
  };
  run_stage1(cfg, a, hooks);
  run_stage1(cfg, b);
  EXPECT_EQ(rar_steps, (std::vector<std::size_t>{20, 40}));
  ASSERT_EQ(a.log.records.size(), cfg.adam_steps);
  for (const auto& r : a.log.records) EXPECT_EQ(r.rar_event, r.step == 20 || r.step == 40);
  EXPECT_EQ(a.sets.interior.size(), cfg.interior_size);
  std::ostringstream la, lb;
  a.log.write(la, false);
  b.log.write(lb, false);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_TRUE(std::equal(a.model.parameters().begin(), a.model.parameters().end(),
                         b.model.parameters().begin()));
  EXPECT_LT(a.log.records.back().loss.total, a.initial_loss.total);
}

TEST(Stage2, AugmentsBoundaryAndDescends) {
  auto cfg = tiny_config();
  cfg.adam_steps = 10;
  TrainingState st(cfg);
  run_stage1(cfg, st);
  std::vector<std::string> checkpoints;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const DeepONetModel& m, const std::string& stage, std::size_t) {
    checkpoints.push_back(stage + ":" + m.metadata.stage);
  };
  run_stage2(cfg, st, hooks);
  EXPECT_EQ(st.sets.boundary.size(), cfg.boundary_count + cfg.boundary_augment);
  double prev = HUGE_VAL;
  std::size_t prev_step = 0;
  for (const auto& r : st.log.records) {
    if (r.stage != 2) continue;
    EXPECT_LE(r.loss.total, prev);
    EXPECT_GT(r.step, prev_step);
    prev = r.loss.total;
    prev_step = r.step;
  }
  EXPECT_LE(st.final_loss.total, st.log.records[cfg.adam_steps - 1].loss.total);
  ASSERT_FALSE(checkpoints.empty());
  EXPECT_EQ(checkpoints.back(), "lbfgs:lbfgs");
}

TEST(Lbfgs, QuadraticConvergesQuickly) {
  // f(x) = 0.5 sum_i a_i (x_i - c_i)^2 with condition number 100.
  const int n = 10;
  std::vector<double> a(n), c(n);
  for (int i = 0; i < n; ++i) {
    a[i] = 1.0 + 99.0 * i / (n - 1);
    c[i] = 0.1 * (i - 4.5);
  }
  const Objective f = [&](std::span<const double> x, std::span<double> g) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      g[i] = a[i] * (x[i] - c[i]);
      v += 0.5 * a[i] * (x[i] - c[i]) * (x[i] - c[i]);
    }
    return v;
  };
  std::vector<double> x(n, 1.0);
  LbfgsOptions opt;
  opt.gradient_tolerance = 1e-10;
  opt.rel_tolerance = 0.0;
  const auto res = minimize_lbfgs(f, x, opt);
  EXPECT_EQ(res.status, LbfgsStatus::kGradientTolerance);
  EXPECT_LE(res.iterations, 30u);
  EXPECT_LT(res.grad_norm, 1e-10);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(x[i], c[i], 1e-10);
}

TEST(Lbfgs, RosenbrockMonotone) {
  const Objective f = [](std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  std::vector<double> x{-1.2, 1.0};
  double prev = HUGE_VAL;
  LbfgsOptions opt;
  opt.gradient_tolerance = 1e-9;
  const auto res = minimize_lbfgs(f, x, opt, [&](const LbfgsIteration& it) {
    EXPECT_LE(it.f, prev);
    prev = it.f;
  });
  EXPECT_NEAR(x[0], 1.0, 1e-6);
  EXPECT_NEAR(x[1], 1.0, 1e-6);
  EXPECT_LT(res.iterations, 200u);
}

TEST(Lbfgs, NonFiniteObjectiveStops) {
  const Objective f = [](std::span<const double>, std::span<double> g) {
    g[0] = 1.0;
    return std::nan("");
  };
  std::vector<double> x{0.0};
  EXPECT_ANY_THROW(minimize_lbfgs(f, x));
}

}  // namespace
}  // namespace deepsvm
