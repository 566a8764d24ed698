// deepsvm: train, query and audit the Heston DeepONet surrogate.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "deepsvm/autodiff.hpp"
#include "deepsvm/errors.hpp"
#include "deepsvm/evaluation.hpp"
#include "deepsvm/format.hpp"
#include "deepsvm/parallel.hpp"
#include "deepsvm/training.hpp"

namespace fs = std::filesystem;
using namespace deepsvm;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kTrainingAbort = 3,
  kDomain = 4,
  kCheckFailed = 5,
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out = ".";
  std::string config;
  std::string checkpoint;
};

struct Query {
  HestonParams p;
  DomainPoint d;
  double strike = 1.0;
};

std::optional<std::uint64_t> env_u64(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t pos = 0;
    const unsigned long long n = std::stoull(v, &pos);
    if (pos != std::string(v).size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(std::string("environment variable ") + name + " is not an integer: '" + v + "'");
  }
}

// Command-line flags take precedence over DEEPSVM_SEED / DEEPSVM_THREADS.
std::uint64_t resolve_seed(const RunOptions& o, std::uint64_t fallback) {
  if (o.seed) return *o.seed;
  if (auto e = env_u64("DEEPSVM_SEED")) return *e;
  return fallback;
}

void apply_threads(const RunOptions& o) {
  if (o.threads) {
    set_thread_count(*o.threads);
  } else if (auto e = env_u64("DEEPSVM_THREADS")) {
    set_thread_count(static_cast<unsigned>(*e));
  }
}

fs::path output_dir(const RunOptions& o) {
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  return os;
}

void add_query_flags(CLI::App* cmd, Query& q) {
  cmd->add_option("--x", q.d.x, "log-moneyness ln(S/K)")->required();
  cmd->add_option("--nu0", q.d.nu, "instantaneous variance")->required();
  cmd->add_option("--tau", q.d.tau, "time to maturity")->required();
  cmd->add_option("--strike", q.strike, "strike K")->capture_default_str();
  cmd->add_option("--kappa", q.p.kappa)->capture_default_str();
  cmd->add_option("--theta", q.p.theta)->capture_default_str();
  cmd->add_option("--sigma", q.p.sigma)->capture_default_str();
  cmd->add_option("--rho", q.p.rho)->capture_default_str();
  cmd->add_option("--rate", q.p.r)->capture_default_str();
}

int cmd_train(const RunOptions& o, const std::string& profile) {
  TrainConfig cfg = profile == "desk" ? TrainConfig::desk_scale() : TrainConfig{};
  if (profile != "desk" && profile != "full") throw ConfigError("unknown profile '" + profile + "'");
  if (!o.config.empty()) cfg = load_train_config(o.config);
  cfg.seed = resolve_seed(o, cfg.seed);
  cfg.validate();

  const fs::path dir = output_dir(o);
  const fs::path ckpt = o.checkpoint.empty() ? dir / "model.ckpt" : fs::path(o.checkpoint);
  {
    auto os = open_output(dir / "train_config.txt");
    write_train_config(os, cfg);
  }

  TrainingState state(cfg);
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const DeepONetModel& m, const std::string& stage, std::size_t step) {
    save_checkpoint(m, dir / ("checkpoint_" + stage + "_" + std::to_string(step) + ".ckpt"));
  };
  hooks.on_record = [&](const TrainRecord& r) {
    if (r.step % 100 == 0 || r.rar_event)
      std::cerr << "stage " << r.stage << " step " << r.step << " loss " << r.loss.total
                << (r.rar_event ? " [rar]" : "") << '\n';
  };

  run_stage1(cfg, state, hooks);
  const Stage2Status st = run_stage2(cfg, state, hooks);
  save_checkpoint(state.model, ckpt);
  {
    // Wall time is the only non-reproducible column; keep it out of the main log.
    auto os = open_output(dir / "train_log.csv");
    state.log.write(os, false);
    auto timed = open_output(dir / "train_log_timed.csv");
    state.log.write(timed, true);
  }
  std::cout << "initial_loss=" << format_double(state.initial_loss.total) << '\n'
            << "final_loss=" << format_double(state.final_loss.total) << '\n'
            << "stage2=" << (st == Stage2Status::kConverged           ? "converged"
                             : st == Stage2Status::kLineSearchWarning ? "line_search_warning"
                                                                      : "completed")
            << '\n'
            << "checkpoint=" << ckpt.string() << '\n';
  return kOk;
}

int cmd_price(const RunOptions& o, const Query& q) {
  const DeepONetModel model = load_checkpoint(o.checkpoint);
  const Quote v = quote_price(model, q.p, q.d, q.strike);
  std::cout << "u=" << format_double(v.u) << '\n' << "V=" << format_double(v.price) << '\n';
  return kOk;
}

int cmd_greeks(const RunOptions& o, const Query& q, bool analytic) {
  Greeks g;
  if (analytic) {
    check_in_bounds(q.p, q.d);
    if (!(q.d.tau > 0.0)) throw DomainError("tau", "gamma requires tau > 0");
    g = greeks_from_jet(discounted_forward_jet(q.p, q.d), q.d.x, q.strike);
  } else {
    g = quote_greeks(load_checkpoint(o.checkpoint), q.p, q.d, q.strike);
  }
  std::cout << "delta=" << format_double(g.delta) << '\n'
            << "gamma=" << format_double(g.gamma) << '\n';
  return kOk;
}

// The analytic discounted forward stands in for a checkpoint when requested.
struct Surface {
  std::optional<DeepONetModel> model;
  JetSurface jets;
};

Surface make_surface(const RunOptions& o, bool analytic) {
  Surface s;
  if (analytic) {
    s.jets = pointwise_surface(discounted_forward_jet);
  } else {
    if (o.checkpoint.empty()) throw ArgumentError("--checkpoint is required (or --analytic)");
    s.model = load_checkpoint(o.checkpoint);
    s.jets = model_surface(*s.model);
  }
  return s;
}

int cmd_compare(const RunOptions& o, ComparisonSpec spec, bool analytic) {
  spec.seed = resolve_seed(o, spec.seed);
  const Surface s = make_surface(o, analytic);
  const auto rows = compare_with_oracle(s.jets, spec);
  const ErrorSummary sum = summarize(rows);
  const fs::path dir = output_dir(o);
  {
    auto os = open_output(dir / "comparison.csv");
    write_comparison_csv(os, rows);
  }
  {
    auto os = open_output(dir / "comparison_summary.csv");
    write_summary_csv(os, sum);
  }
  std::cout << "rows=" << sum.count << " mae=" << format_double(sum.mae)
            << " max=" << format_double(sum.max_error) << " atm_mae=" << format_double(sum.atm_mae)
            << " off_atm_mae=" << format_double(sum.off_atm_mae) << '\n';
  return kOk;
}

int cmd_residual_map(const RunOptions& o, ResidualMapSpec spec, const std::string& mode,
                     bool analytic) {
  if (mode == "tau") {
    spec.mode = ResidualMapMode::kTauSlices;
  } else if (mode == "params") {
    spec.mode = ResidualMapMode::kParameterSlices;
  } else {
    throw ArgumentError("--mode must be 'tau' or 'params'");
  }
  spec.seed = resolve_seed(o, spec.seed);
  const Surface s = make_surface(o, analytic);
  const fs::path dir = output_dir(o);
  for (const auto& slice : residual_map(s.jets, spec)) {
    const fs::path path = dir / ("residual_" + slice.label + ".csv");
    auto os = open_output(path);
    write_residual_slice_csv(os, slice);
    std::cout << path.string() << '\n';
  }
  return kOk;
}

int cmd_check(const RunOptions& o) {
  const std::optional<std::string> ckpt =
      o.checkpoint.empty() ? std::nullopt : std::optional(o.checkpoint);
  bool ok = true;
  for (const auto& c : run_self_checks(ckpt, resolve_seed(o, 0))) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
    ok = ok && c.passed;
  }
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepONet surrogate for Heston European calls"};
  app.require_subcommand(1);
  RunOptions o;
  app.add_option("--seed", o.seed, "seed override (also DEEPSVM_SEED)");
  app.add_option("--threads", o.threads, "worker threads (also DEEPSVM_THREADS)");
  app.add_option("--out", o.out, "output directory")->capture_default_str();

  std::string profile = "full";
  auto* train = app.add_subcommand("train", "run Adam + RAR, then L-BFGS");
  train->add_option("--config", o.config, "key = value config file");
  train->add_option("--profile", profile, "defaults before --config: full or desk")
      ->capture_default_str();
  train->add_option("--checkpoint", o.checkpoint, "final checkpoint path (default OUT/model.ckpt)");

  Query q;
  auto* price = app.add_subcommand("price", "price one option from a checkpoint");
  price->add_option("--checkpoint", o.checkpoint)->required();
  add_query_flags(price, q);

  bool analytic = false;
  auto* greeks = app.add_subcommand("greeks", "delta and gamma from the network jets");
  greeks->add_option("--checkpoint", o.checkpoint);
  greeks->add_flag("--analytic", analytic, "use u = e^x - e^{-r tau} instead of a checkpoint");
  add_query_flags(greeks, q);

  ComparisonSpec cspec;
  auto* compare = app.add_subcommand("compare", "model vs semi-analytic oracle on x sweeps");
  compare->add_option("--checkpoint", o.checkpoint);
  compare->add_flag("--analytic", analytic);
  compare->add_option("--n-params", cspec.n_params)->capture_default_str();
  compare->add_option("--x-points", cspec.x_points)->capture_default_str();
  compare->add_option("--nu0", cspec.nu0_slices, "nu0 slices")->capture_default_str();
  compare->add_option("--tau", cspec.tau_slices, "tau slices")->capture_default_str();
  compare->add_option("--strike", cspec.strike)->capture_default_str();

  ResidualMapSpec rspec;
  std::string mode = "tau";
  auto* rmap = app.add_subcommand("residual-map", "mean squared PDE residual on (x, nu) grids");
  rmap->add_option("--checkpoint", o.checkpoint);
  rmap->add_flag("--analytic", analytic);
  rmap->add_option("--mode", mode, "tau (average over mu) or params (average over tau)")
      ->capture_default_str();
  rmap->add_option("--nx", rspec.nx)->capture_default_str();
  rmap->add_option("--nnu", rspec.nnu)->capture_default_str();
  rmap->add_option("--n-params", rspec.n_params)->capture_default_str();
  rmap->add_option("--n-tau", rspec.n_tau)->capture_default_str();

  auto* check = app.add_subcommand("check", "oracle, autodiff, ansatz and sampler self-tests");
  check->add_option("--checkpoint", o.checkpoint);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    apply_threads(o);
    if (*train) return cmd_train(o, profile);
    if (*price) return cmd_price(o, q);
    if (*greeks) {
      if (!analytic && o.checkpoint.empty())
        throw ArgumentError("--checkpoint is required (or --analytic)");
      return cmd_greeks(o, q, analytic);
    }
    if (*compare) return cmd_compare(o, cspec, analytic);
    if (*rmap) return cmd_residual_map(o, rspec, mode, analytic);
    if (*check) return cmd_check(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return kConfig;
  } catch (const TrainingAbort& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return kTrainingAbort;
  } catch (const DomainError& e) {
    std::cerr << "domain error (" << e.axis() << "): " << e.what() << '\n';
    return kDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
