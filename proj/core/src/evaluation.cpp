#include "deepsvm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <random>
#include <sstream>

#include "deepsvm/errors.hpp"
#include "deepsvm/format.hpp"
#include "deepsvm/oracle.hpp"
#include "deepsvm/parallel.hpp"
#include "deepsvm/physics.hpp"

namespace deepsvm {

JetSurface model_surface(const DeepONetModel& model) {
  return [&model](std::span<const CollocationPoint> pts) { return forward_jets(model, pts); };
}

JetSurface pointwise_surface(JetFunction fn) {
  return [fn = std::move(fn)](std::span<const CollocationPoint> pts) {
    std::vector<Jet2> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = fn(pts[i].params, pts[i].point);
    return out;
  };
}

Greeks greeks_from_jet(const Jet2& j, double x, double strike) {
  if (!(strike > 0.0)) throw ArgumentError("strike must be positive");
  return {std::exp(-x) * j.du_dx, std::exp(-2.0 * x) / strike * (j.d2u_dx2 - j.du_dx)};
}

Quote quote_price(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d,
                  double strike) {
  if (!(strike > 0.0)) throw ArgumentError("strike must be positive");
  check_in_bounds(p, d, model.bounds());
  const double u = u_pred(model, p, d);
  return {u, strike * u};
}

Greeks quote_greeks(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d,
                    double strike) {
  check_in_bounds(p, d, model.bounds());
  if (!(d.tau > 0.0)) throw DomainError("tau", "gamma requires tau > 0");
  return greeks_from_jet(forward_jet(model, p, d), d.x, strike);
}

std::vector<HestonParams> draw_parameter_vectors(std::size_t n, std::uint64_t seed) {
  Sampler sampler(seed);
  std::vector<HestonParams> out;
  out.reserve(n);
  for (const auto& c : sampler.interior(n)) out.push_back(c.params);
  return out;
}

std::vector<CollocationPoint> grad_check_points(std::size_t n, std::uint64_t seed, double h) {
  if (!(h > 0.0)) throw ArgumentError("grad_check_points: step must be positive");
  Sampler sampler(seed);
  const DomainBounds& b = sampler.config.bounds;
  const double m = 2.0 * h;
  auto inside = [m](const Interval& iv, double v) { return v >= iv.lo + m && v <= iv.hi - m; };
  for (const Interval* iv : {&b.x, &b.nu, &b.tau}) {
    if (iv->hi - iv->lo <= 2.0 * m) throw ArgumentError("grad_check_points: step too large for the domain");
  }
  if (4.0 * h >= b.x.hi) throw ArgumentError("grad_check_points: step too large for the domain");
  std::vector<CollocationPoint> out;
  out.reserve(n);
  while (out.size() < n) {
    for (const auto& c : sampler.interior(n)) {
      const DomainPoint& d = c.point;
      if (!inside(b.x, d.x) || !inside(b.nu, d.nu) || !inside(b.tau, d.tau)) continue;
      if (std::abs(d.x) < 4.0 * h) continue;
      out.push_back(c);
      if (out.size() == n) break;
    }
  }
  return out;
}

std::vector<ComparisonRow> compare_with_oracle(const JetSurface& surface,
                                               std::span<const HestonParams> params,
                                               const ComparisonSpec& spec) {
  if (spec.x_points < 2) throw ArgumentError("compare: need at least two x points");
  if (!(spec.strike > 0.0)) throw ArgumentError("compare: strike must be positive");
  std::vector<CollocationPoint> pts;
  for (const auto& p : params)
    for (double nu0 : spec.nu0_slices)
      for (double tau : spec.tau_slices)
        for (std::size_t i = 0; i < spec.x_points; ++i) {
          const double x = spec.x_lo + (spec.x_hi - spec.x_lo) * static_cast<double>(i) /
                                           static_cast<double>(spec.x_points - 1);
          pts.push_back({p, {x, nu0, tau}});
        }

  const std::vector<Jet2> jets = surface(pts);
  std::vector<ComparisonRow> rows(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto& [p, d] = pts[i];
    ComparisonRow& row = rows[i];
    row.params = p;
    row.x = d.x;
    row.nu0 = d.nu;
    row.tau = d.tau;
    row.model_price = spec.strike * jets[i].u;
    row.oracle_price = oracle::price_call(p, d.x, d.nu, d.tau, spec.strike);
    row.abs_error = std::abs(row.model_price - row.oracle_price);
    if (spec.greeks) {
      const Greeks g = greeks_from_jet(jets[i], d.x, spec.strike);
      row.model_delta = g.delta;
      row.model_gamma = g.gamma;
      if (d.tau > 0.0) {
        row.oracle_delta = oracle::delta_oracle(p, d.x, d.nu, d.tau);
        row.oracle_gamma = oracle::gamma_oracle(p, d.x, d.nu, d.tau, spec.strike);
      } else {
        row.oracle_delta = d.x > 0.0 ? 1.0 : (d.x < 0.0 ? 0.0 : 0.5);
        row.oracle_gamma = 0.0;
      }
    }
  });
  return rows;
}

std::vector<ComparisonRow> compare_with_oracle(const JetSurface& surface,
                                               const ComparisonSpec& spec) {
  const auto params = draw_parameter_vectors(spec.n_params, spec.seed);
  return compare_with_oracle(surface, params, spec);
}

ErrorSummary summarize(std::span<const ComparisonRow> rows, double atm_band) {
  ErrorSummary s;
  double sum = 0.0, atm_sum = 0.0;
  for (const auto& r : rows) {
    ++s.count;
    sum += r.abs_error;
    s.max_error = std::max(s.max_error, r.abs_error);
    if (std::abs(r.x) <= atm_band) {
      ++s.atm_count;
      atm_sum += r.abs_error;
      s.atm_max = std::max(s.atm_max, r.abs_error);
    } else {
      s.off_atm_max = std::max(s.off_atm_max, r.abs_error);
    }
  }
  if (s.count > 0) s.mae = sum / static_cast<double>(s.count);
  if (s.atm_count > 0) s.atm_mae = atm_sum / static_cast<double>(s.atm_count);
  if (s.count > s.atm_count)
    s.off_atm_mae = (sum - atm_sum) / static_cast<double>(s.count - s.atm_count);
  return s;
}

void write_comparison_csv(std::ostream& os, std::span<const ComparisonRow> rows) {
  os << "kappa,theta,sigma,rho,r,x,nu0,tau,model_price,oracle_price,abs_error,"
        "model_delta,oracle_delta,model_gamma,oracle_gamma\n";
  for (const auto& r : rows) {
    const auto& p = r.params;
    write_csv_row(os, {p.kappa, p.theta, p.sigma, p.rho, p.r, r.x, r.nu0, r.tau, r.model_price,
                       r.oracle_price, r.abs_error, r.model_delta, r.oracle_delta, r.model_gamma,
                       r.oracle_gamma});
  }
}

void write_summary_csv(std::ostream& os, const ErrorSummary& s) {
  os << "count,mae,max_error,atm_count,atm_mae,atm_max,off_atm_mae,off_atm_max\n";
  write_csv_row(os, {static_cast<double>(s.count), s.mae, s.max_error,
                     static_cast<double>(s.atm_count), s.atm_mae, s.atm_max, s.off_atm_mae,
                     s.off_atm_max});
}

namespace {

std::vector<double> linspace(const Interval& iv, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = iv.mid();
    return v;
  }
  for (std::size_t i = 0; i < n; ++i)
    v[i] = iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

// Accumulates R^2 over (x, nu) for each (params, tau) pair, in the given order.
ResidualMapSlice average_slice(const JetSurface& surface, const std::vector<double>& xs,
                               const std::vector<double>& nus,
                               std::span<const std::pair<HestonParams, double>> draws,
                               std::string label) {
  ResidualMapSlice slice;
  slice.label = std::move(label);
  const std::size_t n = xs.size() * nus.size();
  slice.x.resize(n);
  slice.nu.resize(n);
  slice.mean_r2.assign(n, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < nus.size(); ++j) {
      slice.x[i * nus.size() + j] = xs[i];
      slice.nu[i * nus.size() + j] = nus[j];
    }
  std::vector<CollocationPoint> pts(n);
  for (const auto& [p, tau] : draws) {
    for (std::size_t k = 0; k < n; ++k) pts[k] = {p, {slice.x[k], slice.nu[k], tau}};
    const auto jets = surface(pts);
    for (std::size_t k = 0; k < n; ++k) {
      const double r = residual(p, pts[k].point, jets[k]);
      slice.mean_r2[k] += r * r;
    }
  }
  for (double& v : slice.mean_r2) v /= static_cast<double>(draws.size());
  return slice;
}

}  // namespace

std::vector<ResidualMapSlice> residual_map(const JetSurface& surface, const ResidualMapSpec& spec) {
  if (spec.nx == 0 || spec.nnu == 0) throw ArgumentError("residual_map: empty grid");
  const DomainBounds bounds;
  const auto xs = linspace(bounds.x, spec.nx);
  const auto nus = linspace(bounds.nu, spec.nnu);
  std::vector<ResidualMapSlice> out;
  std::vector<std::pair<HestonParams, double>> draws;
  if (spec.mode == ResidualMapMode::kTauSlices) {
    if (spec.n_params == 0) throw ArgumentError("residual_map: n_params must be positive");
    const auto params = draw_parameter_vectors(spec.n_params, spec.seed);
    for (double tau : spec.tau_slices) {
      draws.clear();
      for (const auto& p : params) draws.emplace_back(p, tau);
      out.push_back(average_slice(surface, xs, nus, draws, "tau_" + format_double(tau)));
    }
  } else {
    if (spec.n_representative == 0 || spec.n_tau == 0)
      throw ArgumentError("residual_map: need parameter vectors and tau points");
    const auto params = draw_parameter_vectors(spec.n_representative, spec.seed);
    for (std::size_t m = 0; m < params.size(); ++m) {
      draws.clear();
      for (std::size_t k = 1; k <= spec.n_tau; ++k)
        draws.emplace_back(params[m],
                           bounds.tau.hi * static_cast<double>(k) / static_cast<double>(spec.n_tau));
      out.push_back(average_slice(surface, xs, nus, draws, "mu_" + std::to_string(m)));
    }
  }
  return out;
}

void write_residual_slice_csv(std::ostream& os, const ResidualMapSlice& slice) {
  os << "x,nu,mean_r2\n";
  for (std::size_t k = 0; k < slice.x.size(); ++k)
    write_csv_row(os, {slice.x[k], slice.nu[k], slice.mean_r2[k]});
}

namespace {

std::string fmt(double v) { return format_double(v); }

CheckResult check_bs_limit() {
  const HestonParams p{3.0, 0.04, 1e-4, -0.5, 0.02};
  const double heston = oracle::price_call(p, 0.0, 0.04, 1.0);
  const double bs = oracle::black_scholes_call(1.0, 1.0, 0.2, 0.02, 1.0);
  const double err = std::abs(heston - bs);
  return {"oracle_bs_limit", err < 1e-5, "abs_err=" + fmt(err)};
}

CheckResult check_parity(const std::vector<HestonParams>& params) {
  double worst = 0.0;
  for (const auto& p : params)
    for (double x : {-0.5, 0.0, 0.7}) {
      const double c = oracle::price_call(p, x, 0.1, 0.75);
      const double put = oracle::price_put(p, x, 0.1, 0.75);
      worst = std::max(worst, std::abs(c - put - (std::exp(x) - std::exp(-p.r * 0.75))));
    }
  return {"oracle_put_call_parity", worst < 1e-8, "max_abs_err=" + fmt(worst)};
}

CheckResult check_mc(const HestonParams& p, std::uint64_t seed) {
  oracle::MCSpec mc;
  mc.paths = 40000;
  mc.antithetic = true;
  mc.seed = seed + 1;
  const auto est = oracle::price_call_mc(p, 0.0, 0.1, 0.5, 1.0, mc);
  const double exact = oracle::price_call(p, 0.0, 0.1, 0.5);
  const double z = std::abs(est.mean - exact) / est.std_error;
  return {"oracle_mc_agreement", z < 4.0, "z=" + fmt(z) + " se=" + fmt(est.std_error)};
}

CheckResult check_exact_residual(std::uint64_t seed) {
  Sampler sampler(seed);
  double worst = 0.0;
  for (const auto& c : sampler.interior(2000))
    worst = std::max(worst,
                     std::abs(residual(c.params, c.point, discounted_forward_jet(c.params, c.point))));
  return {"exact_solution_residual", worst < 1e-12, "max_abs_R=" + fmt(worst)};
}

CheckResult check_grad(const DeepONetModel& model, std::uint64_t seed) {
  const auto pts = grad_check_points(20, seed, 1e-3);
  const auto report = grad_check(model_jet_function(model), pts, 1e-3);
  return {"autodiff_grad_check", report.max_error() < 1e-4, "max_rel_err=" + fmt(report.max_error())};
}

CheckResult check_ansatz(const DeepONetModel& model, std::uint64_t seed) {
  Sampler sampler(seed);
  const auto pts = sampler.interior(5000);
  const auto u = evaluate_prices(model, pts);
  double terminal = 0.0;
  std::size_t below = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (u[i] < payoff(pts[i].point.x)) ++below;
    DomainPoint d = pts[i].point;
    d.tau = 0.0;
    terminal = std::max(terminal, std::abs(u_pred(model, pts[i].params, d) - payoff(d.x)));
  }
  return {"ansatz_invariants", below == 0 && terminal == 0.0,
          "below_intrinsic=" + std::to_string(below) + " terminal_err=" + fmt(terminal)};
}

CheckResult check_sampler(std::uint64_t seed) {
  Sampler a(seed), b(seed);
  const bool same = a.interior(512) == b.interior(512) && a.atm(64) == b.atm(64) &&
                    a.boundary(64) == b.boundary(64);
  return {"sampler_determinism", same, same ? "identical" : "streams differ"};
}

}  // namespace

std::vector<CheckResult> run_self_checks(const std::optional<std::string>& checkpoint,
                                         std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto guarded = [&out](const char* name, auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };

  std::optional<DeepONetModel> model;
  if (checkpoint) {
    try {
      model = load_checkpoint(*checkpoint);
      out.push_back({"checkpoint_load", true, *checkpoint});
    } catch (const std::exception& e) {
      out.push_back({"checkpoint_load", false, e.what()});
    }
  } else {
    model = init_model(ModelSpec{}, seed);
  }

  const auto params = draw_parameter_vectors(3, seed);
  guarded("oracle_bs_limit", [] { return check_bs_limit(); });
  guarded("oracle_put_call_parity", [&] { return check_parity(params); });
  guarded("oracle_mc_agreement", [&] { return check_mc(params.front(), seed); });
  guarded("exact_solution_residual", [&] { return check_exact_residual(seed); });
  if (model) {
    guarded("autodiff_grad_check", [&] { return check_grad(*model, seed); });
    guarded("ansatz_invariants", [&] { return check_ansatz(*model, seed); });
  }
  guarded("sampler_determinism", [&] { return check_sampler(seed); });
  return out;
}

}  // namespace deepsvm
