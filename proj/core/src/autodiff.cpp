#include "deepsvm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "deepsvm/errors.hpp"
#include "deepsvm/parallel.hpp"
#include "engine.hpp"

namespace deepsvm {

using detail::Arr;
using detail::kJetChannels;

namespace {

Jet2 jet_at(const Arr& u, Eigen::Index j) {
  using namespace detail;
  return {u(kV, j), u(kX, j), u(kN, j), u(kT, j), u(kXX, j), u(kNN, j), u(kXN, j)};
}

std::size_t chunk_count(std::size_t n, std::size_t chunk) { return (n + chunk - 1) / chunk; }

}  // namespace

Jet2 forward_jet(const DeepONetModel& model, const HestonParams& p, const DomainPoint& d) {
  const CollocationPoint cp{p, d};
  detail::BatchState state;
  detail::forward_batch(model, std::span(&cp, 1), kJetChannels, state);
  return jet_at(state.u, 0);
}

std::vector<Jet2> forward_jets(const DeepONetModel& model, std::span<const CollocationPoint> points) {
  std::vector<Jet2> out(points.size());
  const std::size_t chunk = kDefaultChunk;
  parallel_for(chunk_count(points.size(), chunk), [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t len = std::min(chunk, points.size() - begin);
    detail::BatchState state;
    detail::forward_batch(model, points.subspan(begin, len), kJetChannels, state);
    for (std::size_t j = 0; j < len; ++j) out[begin + j] = jet_at(state.u, static_cast<Eigen::Index>(j));
  });
  return out;
}

std::vector<double> evaluate_prices(const DeepONetModel& model,
                                    std::span<const CollocationPoint> points) {
  std::vector<double> out(points.size());
  const std::size_t chunk = kDefaultChunk;
  parallel_for(chunk_count(points.size(), chunk), [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t len = std::min(chunk, points.size() - begin);
    detail::BatchState state;
    detail::forward_batch(model, points.subspan(begin, len), 1, state);
    for (std::size_t j = 0; j < len; ++j) out[begin + j] = state.u(0, static_cast<Eigen::Index>(j));
  });
  return out;
}

JetFunction model_jet_function(const DeepONetModel& model) {
  return [&model](const HestonParams& p, const DomainPoint& d) { return forward_jet(model, p, d); };
}

Jet2 discounted_forward_jet(const HestonParams& p, const DomainPoint& d) noexcept {
  const double ex = std::exp(d.x);
  const double df = std::exp(-p.r * d.tau);
  Jet2 j;
  j.u = ex - df;
  j.du_dx = ex;
  j.du_dtau = p.r * df;
  j.d2u_dx2 = ex;
  return j;
}

double ParamGradient::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

namespace {

enum class SetKind { kInterior, kAtm, kBoundary };

const char* set_name(SetKind k) {
  switch (k) {
    case SetKind::kInterior: return "interior";
    case SetKind::kAtm: return "atm";
    case SetKind::kBoundary: return "boundary";
  }
  return "?";
}

struct ChunkTask {
  SetKind kind;
  std::size_t begin;
  std::size_t end;
};

struct ChunkResult {
  double sum = 0.0;
  AlignedVector grad;
};

[[noreturn]] void non_finite(SetKind kind, std::size_t index) {
  std::ostringstream os;
  os << "non-finite loss contribution at " << set_name(kind) << " point " << index;
  throw NonFiniteLossError(set_name(kind), index, os.str());
}

void residual_chunk(const DeepONetModel& model, std::span<const CollocationPoint> pts,
                    SetKind kind, std::size_t offset, double scale, const LossWeights& w,
                    bool with_grad, ChunkResult& out) {
  using namespace detail;
  BatchState state;
  forward_batch(model, pts, kJetChannels, state);
  const auto n = static_cast<Eigen::Index>(pts.size());
  Arr ubar;
  if (with_grad) ubar.resize(kJetChannels, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& cp = pts[static_cast<std::size_t>(j)];
    const double r = residual(cp.params, cp.point, jet_at(state.u, j));
    const double r2 = r * r;
    const double contrib = r2 + w.lambda_max * r2 * r2;
    if (!std::isfinite(contrib)) non_finite(kind, offset + static_cast<std::size_t>(j));
    out.sum += contrib;
    if (!with_grad) continue;
    const double dr = scale * (2.0 * r + 4.0 * w.lambda_max * r2 * r);
    const OperatorCoefficients c = operator_coefficients(cp.params, cp.point.nu);
    ubar(kV, j) = -dr * c.u;
    ubar(kX, j) = -dr * c.x;
    ubar(kN, j) = -dr * c.nu;
    ubar(kT, j) = dr;
    ubar(kXX, j) = -dr * c.xx;
    ubar(kNN, j) = -dr * c.nunu;
    ubar(kXN, j) = -dr * c.xnu;
  }
  if (with_grad) backward_batch(model, state, ubar, out.grad);
}

void boundary_chunk(const DeepONetModel& model, std::span<const BoundaryPoint> pts,
                    std::size_t offset, double scale, bool with_grad, ChunkResult& out) {
  using namespace detail;
  std::vector<CollocationPoint> at(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) at[i] = pts[i].at;
  BatchState state;
  forward_batch(model, at, 1, state);
  const auto n = static_cast<Eigen::Index>(pts.size());
  Arr ubar;
  if (with_grad) ubar.resize(1, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double diff = state.u(kV, j) - boundary_target(pts[static_cast<std::size_t>(j)]);
    const double contrib = diff * diff;
    if (!std::isfinite(contrib)) non_finite(SetKind::kBoundary, offset + static_cast<std::size_t>(j));
    out.sum += contrib;
    if (with_grad) ubar(kV, j) = scale * 2.0 * diff;
  }
  if (with_grad) backward_batch(model, state, ubar, out.grad);
}

LossAndGradient run_loss(const DeepONetModel& model, const LossBatch& batch, const LossWeights& w,
                         std::size_t chunk, bool with_grad) {
  if (chunk == 0) throw ArgumentError("loss: chunk size must be positive");
  if (batch.interior.empty() && batch.atm.empty() && batch.boundary.empty()) {
    throw ArgumentError("loss: empty batch");
  }
  std::vector<ChunkTask> tasks;
  auto add_tasks = [&](SetKind kind, std::size_t n) {
    for (std::size_t b = 0; b < n; b += chunk) tasks.push_back({kind, b, std::min(n, b + chunk)});
  };
  add_tasks(SetKind::kInterior, batch.interior.size());
  add_tasks(SetKind::kAtm, batch.atm.size());
  add_tasks(SetKind::kBoundary, batch.boundary.size());

  const auto n_int = static_cast<double>(batch.interior.size());
  const auto n_atm = static_cast<double>(batch.atm.size());
  const auto n_bnd = static_cast<double>(batch.boundary.size());
  const std::size_t n_params = model.parameter_count();

  LossAndGradient result;
  if (with_grad) result.gradient.values.assign(n_params, 0.0);
  double sums[3] = {0.0, 0.0, 0.0};

  // Bounded number of live per-chunk gradient buffers; reduction order is the
  // task order regardless of scheduling.
  constexpr std::size_t kBlock = 16;
  std::vector<ChunkResult> results(std::min(kBlock, tasks.size()));
  for (std::size_t first = 0; first < tasks.size(); first += kBlock) {
    const std::size_t count = std::min(kBlock, tasks.size() - first);
    parallel_for(count, [&](std::size_t i) {
      const ChunkTask& t = tasks[first + i];
      ChunkResult& r = results[i];
      r.sum = 0.0;
      if (with_grad) r.grad.assign(n_params, 0.0);
      switch (t.kind) {
        case SetKind::kInterior:
          residual_chunk(model, batch.interior.subspan(t.begin, t.end - t.begin), t.kind, t.begin,
                         1.0 / n_int, w, with_grad, r);
          break;
        case SetKind::kAtm:
          residual_chunk(model, batch.atm.subspan(t.begin, t.end - t.begin), t.kind, t.begin,
                         w.lambda_atm / n_atm, w, with_grad, r);
          break;
        case SetKind::kBoundary:
          boundary_chunk(model, batch.boundary.subspan(t.begin, t.end - t.begin), t.begin,
                         w.lambda_bound / n_bnd, with_grad, r);
          break;
      }
    });
    for (std::size_t i = 0; i < count; ++i) {
      sums[static_cast<int>(tasks[first + i].kind)] += results[i].sum;
      if (with_grad) {
        auto& g = result.gradient.values;
        const auto& rg = results[i].grad;
        for (std::size_t k = 0; k < n_params; ++k) g[k] += rg[k];
      }
    }
  }
  result.report = combine_losses(n_int > 0 ? sums[0] / n_int : 0.0,
                                 n_bnd > 0 ? sums[2] / n_bnd : 0.0,
                                 n_atm > 0 ? sums[1] / n_atm : 0.0, w);
  return result;
}

}  // namespace

LossAndGradient backward_params(const DeepONetModel& model, const LossBatch& batch,
                                const LossWeights& weights, std::size_t chunk) {
  return run_loss(model, batch, weights, chunk, true);
}

LossReport evaluate_loss(const DeepONetModel& model, const LossBatch& batch,
                         const LossWeights& weights, std::size_t chunk) {
  return run_loss(model, batch, weights, chunk, false).report;
}

double GradCheckReport::max_error() const {
  double m = 0.0;
  for (const auto& f : fields) m = std::max(m, f.max_error);
  return m;
}

void GradCheckReport::write_table(std::ostream& os) const {
  os << std::left << std::setw(12) << "field" << std::setw(16) << "max_rel_err"
     << "argmax_point\n";
  for (const auto& f : fields) {
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << f.max_error;
    os << std::left << std::setw(12) << f.name << std::setw(16) << err.str() << f.argmax << '\n';
  }
}

GradCheckReport grad_check(const JetFunction& jets, std::span<const CollocationPoint> points,
                           double h) {
  if (!(h > 0.0)) throw ArgumentError("grad_check: step must be positive");
  GradCheckReport report;
  const char* names[6] = {"du_dx", "du_dnu", "du_dtau", "d2u_dx2", "d2u_dnu2", "d2u_dxdnu"};
  for (int i = 0; i < 6; ++i) report.fields[i].name = names[i];

  constexpr double kC1[5] = {1.0, -8.0, 0.0, 8.0, -1.0};         // / 12h
  constexpr double kC2[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};     // / 12h^2
  auto scaled_error = [](double analytic, double reference) {
    const double diff = std::abs(analytic - reference);
    return std::abs(reference) < 1e-6 ? diff / 1e-4 : diff / std::abs(reference);
  };

  for (std::size_t idx = 0; idx < points.size(); ++idx) {
    const HestonParams& p = points[idx].params;
    const DomainPoint& d = points[idx].point;
    auto f = [&](double dx, double dn, double dt) {
      return jets(p, DomainPoint{d.x + dx, d.nu + dn, d.tau + dt}).u;
    };
    double fx[5], fn[5], ft[5];
    for (int k = 0; k < 5; ++k) {
      const double o = (k - 2) * h;
      fx[k] = f(o, 0, 0);
      fn[k] = f(0, o, 0);
      ft[k] = f(0, 0, o);
    }
    double ref[6] = {0, 0, 0, 0, 0, 0};
    for (int k = 0; k < 5; ++k) {
      ref[0] += kC1[k] * fx[k];
      ref[1] += kC1[k] * fn[k];
      ref[2] += kC1[k] * ft[k];
      ref[3] += kC2[k] * fx[k];
      ref[4] += kC2[k] * fn[k];
    }
    for (int i = 0; i < 3; ++i) ref[i] /= 12.0 * h;
    ref[3] /= 12.0 * h * h;
    ref[4] /= 12.0 * h * h;
    for (int a = 0; a < 5; ++a) {
      if (a == 2) continue;
      for (int b = 0; b < 5; ++b) {
        if (b == 2) continue;
        ref[5] += kC1[a] * kC1[b] * f((a - 2) * h, (b - 2) * h, 0);
      }
    }
    ref[5] /= 144.0 * h * h;

    const Jet2 j = jets(p, d);
    const double got[6] = {j.du_dx, j.du_dnu, j.du_dtau, j.d2u_dx2, j.d2u_dnu2, j.d2u_dxdnu};
    for (int i = 0; i < 6; ++i) {
      const double e = scaled_error(got[i], ref[i]);
      if (e > report.fields[i].max_error || !std::isfinite(e)) {
        report.fields[i].max_error = std::isfinite(e) ? e : HUGE_VAL;
        report.fields[i].argmax = idx;
      }
    }
  }
  return report;
}

}  // namespace deepsvm
