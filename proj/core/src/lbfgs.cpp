#include "deepsvm/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "deepsvm/errors.hpp"

namespace deepsvm {

void LbfgsOptions::validate() const {
  if (memory < 1) throw ArgumentError("lbfgs: memory must be >= 1");
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw ArgumentError("lbfgs: need 0 < c1 < c2 < 1");
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Trial {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;
  std::vector<double> x;
  std::vector<double> g;
};

// Minimizer of the cubic through (a, fa, da), (b, fb, db), clamped to the
// inner 80% of the bracket; bisection when the cubic is degenerate.
double cubic_step(const Trial& lo, const Trial& hi) {
  const double a = lo.alpha, b = hi.alpha;
  const double d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
  const double disc = d1 * d1 - lo.slope * hi.slope;
  const double left = std::min(a, b) + 0.1 * std::abs(b - a);
  const double right = std::max(a, b) - 0.1 * std::abs(b - a);
  if (disc < 0.0) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = hi.slope - lo.slope + 2.0 * d2;
  if (denom == 0.0) return 0.5 * (a + b);
  const double t = b - (b - a) * (hi.slope + d2 - d1) / denom;
  if (!std::isfinite(t)) return 0.5 * (a + b);
  return std::clamp(t, left, right);
}

class LineSearch {
 public:
  LineSearch(const Objective& obj, const LbfgsOptions& opt, std::span<const double> x0,
             std::span<const double> dir, double f0, double slope0)
      : obj_(obj), opt_(opt), x0_(x0), dir_(dir), f0_(f0), slope0_(slope0) {}

  /// Returns true and fills `out` when a strong-Wolfe point is found.
  bool run(double alpha0, Trial& out) {
    Trial prev;
    prev.alpha = 0.0;
    prev.f = f0_;
    prev.slope = slope0_;
    double alpha = alpha0;
    for (std::size_t i = 0; evaluations_ < opt_.max_line_search_evaluations; ++i) {
      Trial cur = evaluate(alpha);
      if (!std::isfinite(cur.f)) {
        alpha *= 0.1;
        continue;
      }
      if (cur.f > f0_ + opt_.c1 * alpha * slope0_ || (i > 0 && cur.f >= prev.f)) {
        return zoom(std::move(prev), std::move(cur), out);
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(std::move(cur), std::move(prev), out);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return false;
  }

  std::size_t evaluations() const { return evaluations_; }

 private:
  Trial evaluate(double alpha) {
    Trial t;
    t.alpha = alpha;
    t.x.resize(x0_.size());
    t.g.resize(x0_.size());
    for (std::size_t i = 0; i < x0_.size(); ++i) t.x[i] = x0_[i] + alpha * dir_[i];
    t.f = obj_(t.x, t.g);
    t.slope = dot(t.g, dir_);
    ++evaluations_;
    return t;
  }

  bool zoom(Trial lo, Trial hi, Trial& out) {
    while (evaluations_ < opt_.max_line_search_evaluations) {
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) return false;
      Trial cur = evaluate(cubic_step(lo, hi));
      if (!std::isfinite(cur.f) || cur.f > f0_ + opt_.c1 * cur.alpha * slope0_ || cur.f >= lo.f) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = std::move(lo);
      lo = std::move(cur);
    }
    return false;
  }

  const Objective& obj_;
  const LbfgsOptions& opt_;
  std::span<const double> x0_;
  std::span<const double> dir_;
  double f0_;
  double slope0_;
  std::size_t evaluations_ = 0;
};

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, std::vector<double>& x,
                           const LbfgsOptions& options,
                           const std::function<void(const LbfgsIteration&)>& on_iteration) {
  options.validate();
  const std::size_t n = x.size();
  LbfgsResult result;
  std::vector<double> g(n);
  double f = objective(x, g);
  result.evaluations = 1;
  if (!std::isfinite(f)) throw NumericalError("lbfgs: non-finite objective at the start point");

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> history;
  std::vector<double> dir(n), alpha_buf;
  int failures = 0;

  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    const double gnorm = std::sqrt(dot(g, g));
    result.grad_norm = gnorm;
    if (gnorm <= options.gradient_tolerance) {
      result.status = LbfgsStatus::kGradientTolerance;
      break;
    }

    // Two-loop recursion: dir = -H g.
    for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
    alpha_buf.assign(history.size(), 0.0);
    for (std::size_t k = history.size(); k-- > 0;) {
      alpha_buf[k] = history[k].rho * dot(history[k].s, dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha_buf[k] * history[k].y[i];
    }
    if (!history.empty()) {
      const auto& last = history.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (auto& d : dir) d *= gamma;
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const double beta = history[k].rho * dot(history[k].y, dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha_buf[k] - beta) * history[k].s[i];
    }
    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      history.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = -gnorm * gnorm;
    }
    const double alpha0 = history.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;

    LineSearch ls(objective, options, x, dir, f, slope);
    Trial accepted;
    const bool ok = ls.run(alpha0, accepted);
    result.evaluations += ls.evaluations();

    LbfgsIteration info;
    info.iteration = it;
    const double f_prev = f;
    if (ok) {
      failures = 0;
      Pair pr;
      pr.s.resize(n);
      pr.y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        pr.s[i] = accepted.x[i] - x[i];
        pr.y[i] = accepted.g[i] - g[i];
      }
      const double sy = dot(pr.s, pr.y);
      if (sy > 1e-300) {
        pr.rho = 1.0 / sy;
        history.push_back(std::move(pr));
        if (history.size() > options.memory) history.pop_front();
      }
      x = std::move(accepted.x);
      g = std::move(accepted.g);
      f = accepted.f;
      info.step = accepted.alpha;
    } else {
      ++failures;
      history.clear();
      for (std::size_t i = 0; i < n; ++i) x[i] -= options.fallback_step * g[i];
      f = objective(x, g);
      ++result.evaluations;
      info.fallback = true;
      info.step = options.fallback_step;
      if (!std::isfinite(f)) throw NumericalError("lbfgs: non-finite objective after fallback step");
    }
    info.f = f;
    info.grad_norm = std::sqrt(dot(g, g));
    info.evaluations = result.evaluations;
    result.iterations = it;
    result.f = f;
    result.grad_norm = info.grad_norm;
    if (on_iteration) on_iteration(info);

    if (failures >= options.max_consecutive_failures) {
      result.status = LbfgsStatus::kLineSearchFailure;
      return result;
    }
    if (ok && std::abs(f_prev - f) <= options.rel_tolerance * std::max(std::abs(f_prev), 1e-300)) {
      result.status = LbfgsStatus::kRelativeDecrease;
      return result;
    }
    if (ok && info.grad_norm <= options.gradient_tolerance) {
      result.status = LbfgsStatus::kGradientTolerance;
      return result;
    }
    result.status = LbfgsStatus::kIterationCap;
  }
  result.f = f;
  return result;
}

}  // namespace deepsvm
