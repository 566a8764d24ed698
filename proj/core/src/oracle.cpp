#include "deepsvm/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "deepsvm/errors.hpp"
#include "deepsvm/parallel.hpp"

namespace deepsvm::oracle {

using cplx = std::complex<double>;

void QuadratureSpec::validate() const {
  if (nodes < 64) throw ArgumentError("quadrature: node count must be >= 64");
  if (!(upper > 0.0)) throw ArgumentError("quadrature: upper limit must be positive");
  if (!(tolerance > 0.0)) throw ArgumentError("quadrature: tolerance must be positive");
}

void MCSpec::validate() const {
  if (paths < 1) throw ArgumentError("monte carlo: path count must be >= 1");
  if (steps_per_year < 1) throw ArgumentError("monte carlo: step count must be >= 1");
}

namespace {

constexpr int kPanelNodes = 16;

struct GaussLegendre {
  std::array<double, kPanelNodes> nodes{};
  std::array<double, kPanelNodes> weights{};

  GaussLegendre() {
    const int n = kPanelNodes;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      nodes[i] = -z;
      nodes[n - 1 - i] = z;
      weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

const GaussLegendre& gauss_legendre() {
  static const GaussLegendre gl;
  return gl;
}

void require_finite(cplx v, cplx u, const HestonParams& p, double tau) {
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
    std::ostringstream os;
    os << "characteristic function non-finite at u=" << u << " (kappa=" << p.kappa
       << ", theta=" << p.theta << ", sigma=" << p.sigma << ", rho=" << p.rho << ", r=" << p.r
       << ", tau=" << tau << ")";
    throw NumericalError(os.str());
  }
}

cplx log1p_c(cplx z) {
  if (std::abs(z) < 1e-4) {
    return z * (1.0 - z * (0.5 - z * (1.0 / 3.0 - z * 0.25)));
  }
  return std::log(1.0 + z);
}

void validate_inputs(const HestonParams& p, double nu0, double tau) {
  if (!(tau >= 0.0)) throw DomainError("tau", "oracle: tau must be non-negative");
  if (!(nu0 >= 0.0)) throw DomainError("nu", "oracle: nu0 must be non-negative");
  if (!feller_holds(p)) throw DomainError("feller", "oracle: Feller condition violated");
}

}  // namespace

cplx heston_char_fn(cplx u, const HestonParams& p, double nu0, double tau) {
  const cplx iu = cplx(0.0, 1.0) * u;
  const double s2 = p.sigma * p.sigma;
  const cplx b = p.kappa - p.rho * p.sigma * iu;
  const cplx w = iu + u * u;
  const cplx d = std::sqrt(b * b + s2 * w);
  // (b - d) / sigma^2 without cancellation: b^2 - d^2 = -sigma^2 w.
  const cplx a = -w / (b + d);
  const cplx g = a * s2 / (b + d);
  const cplx q = std::exp(-d * tau);
  // [ln(1 - g q) - ln(1 - g)] / sigma^2, expanded in g when g is small.
  cplx log_ratio;
  if (std::abs(g) < 1e-3) {
    const cplx g_over_s2 = a / (b + d);
    cplx sum = 0.0, gk = 1.0, qk = q;
    for (int k = 1; k <= 6; ++k) {
      sum += gk * (1.0 - qk) / static_cast<double>(k);
      gk *= g;
      qk *= q;
    }
    log_ratio = g_over_s2 * sum;
  } else {
    log_ratio = (log1p_c(-g * q) - log1p_c(-g)) / s2;
  }
  const cplx c = iu * p.r * tau + p.kappa * p.theta * (a * tau - 2.0 * log_ratio);
  const cplx dterm = nu0 * a * (1.0 - q) / (1.0 - g * q);
  const cplx result = std::exp(c + dterm);
  require_finite(result, u, p, tau);
  return result;
}

cplx heston_char_fn_log_spot(cplx u, const HestonParams& p, double log_spot, double nu0,
                             double tau) {
  return std::exp(cplx(0.0, 1.0) * u * log_spot) * heston_char_fn(u, p, nu0, tau);
}

namespace {

struct Integrals {
  double i1 = 0.0;
  double i2 = 0.0;
};

// Integrands of P1 and P2 at transform variable v, strike-normalized spot e^x.
Integrals integrands(double v, const HestonParams& p, double x, double nu0, double tau) {
  const cplx i(0.0, 1.0);
  const cplx phase = std::exp(i * v * x);
  const cplx f1 = heston_char_fn(cplx(v, -1.0), p, nu0, tau) * std::exp(-p.r * tau);
  const cplx f2 = heston_char_fn(cplx(v, 0.0), p, nu0, tau);
  return {std::real(phase * f1 / (i * v)), std::real(phase * f2 / (i * v))};
}

Integrals integrate_fixed(const HestonParams& p, double x, double nu0, double tau, double upper,
                          int panels) {
  const auto& gl = gauss_legendre();
  const double width = upper / panels;
  Integrals total;
  for (int k = 0; k < panels; ++k) {
    const double mid = (k + 0.5) * width;
    Integrals panel;
    for (int j = 0; j < kPanelNodes; ++j) {
      const double v = mid + 0.5 * width * gl.nodes[j];
      const Integrals f = integrands(v, p, x, nu0, tau);
      panel.i1 += gl.weights[j] * f.i1;
      panel.i2 += gl.weights[j] * f.i2;
    }
    total.i1 += 0.5 * width * panel.i1;
    total.i2 += 0.5 * width * panel.i2;
  }
  return total;
}

double envelope(const HestonParams& p, double nu0, double tau, double v) {
  return (std::abs(heston_char_fn(cplx(v, -1.0), p, nu0, tau)) * std::exp(-p.r * tau) +
          std::abs(heston_char_fn(cplx(v, 0.0), p, nu0, tau))) /
         v;
}

FourierProbabilities to_probabilities(const Integrals& in) {
  FourierProbabilities out;
  out.p1 = 0.5 + in.i1 / std::numbers::pi;
  out.p2 = 0.5 + in.i2 / std::numbers::pi;
  return out;
}

FourierProbabilities probabilities_fixed(const HestonParams& p, double x, double nu0, double tau,
                                         double upper, int nodes) {
  if (tau == 0.0) {
    const double v = x > 0.0 ? 1.0 : (x < 0.0 ? 0.0 : 0.5);
    return {v, v, 0, 0.0, 0.0};
  }
  auto out = to_probabilities(integrate_fixed(p, x, nu0, tau, upper, nodes / kPanelNodes));
  out.nodes = nodes;
  out.upper = upper;
  return out;
}

double call_from_probabilities(const FourierProbabilities& pr, double x, double r, double tau) {
  const double spot = std::exp(x);
  const double df = std::exp(-r * tau);
  const double u = spot * pr.p1 - df * pr.p2;
  return std::clamp(u, std::max(spot - df, 0.0), spot);
}

double put_from_probabilities(const FourierProbabilities& pr, double x, double r, double tau) {
  const double spot = std::exp(x);
  const double df = std::exp(-r * tau);
  const double u = df * (1.0 - pr.p2) - spot * (1.0 - pr.p1);
  return std::clamp(u, std::max(df - spot, 0.0), df);
}

}  // namespace

FourierProbabilities fourier_probabilities(const HestonParams& p, double x, double nu0,
                                           double tau, const QuadratureSpec& q) {
  q.validate();
  validate_inputs(p, nu0, tau);
  if (tau == 0.0) return probabilities_fixed(p, x, nu0, tau, q.upper, q.nodes);

  double upper = q.upper;
  while (upper < q.max_upper && envelope(p, nu0, tau, upper) > q.tolerance) upper *= 2.0;

  int panels = std::max(1, (q.nodes + kPanelNodes - 1) / kPanelNodes);
  Integrals coarse = integrate_fixed(p, x, nu0, tau, upper, panels);
  double residual = 0.0;
  for (;;) {
    if (2 * panels * kPanelNodes > q.max_nodes) {
      std::ostringstream os;
      os << "Fourier quadrature did not converge: estimated residual " << residual << " after "
         << panels * kPanelNodes << " nodes";
      throw NumericalError(os.str());
    }
    const Integrals fine = integrate_fixed(p, x, nu0, tau, upper, 2 * panels);
    residual = std::max(std::abs(fine.i1 - coarse.i1), std::abs(fine.i2 - coarse.i2)) /
               std::numbers::pi;
    panels *= 2;
    coarse = fine;
    if (residual < q.tolerance) break;
  }
  auto out = to_probabilities(coarse);
  out.nodes = panels * kPanelNodes;
  out.upper = upper;
  out.residual = residual;
  return out;
}

double price_call(const HestonParams& p, double x, double nu0, double tau, double strike,
                  const QuadratureSpec& q) {
  if (!(strike > 0.0)) throw ArgumentError("oracle: strike must be positive");
  const auto pr = fourier_probabilities(p, x, nu0, tau, q);
  if (tau == 0.0) return strike * payoff(x);
  return strike * call_from_probabilities(pr, x, p.r, tau);
}

double price_put(const HestonParams& p, double x, double nu0, double tau, double strike,
                 const QuadratureSpec& q) {
  if (!(strike > 0.0)) throw ArgumentError("oracle: strike must be positive");
  const auto pr = fourier_probabilities(p, x, nu0, tau, q);
  if (tau == 0.0) return strike * std::max(1.0 - std::exp(x), 0.0);
  return strike * put_from_probabilities(pr, x, p.r, tau);
}

double delta_oracle(const HestonParams& p, double x, double nu0, double tau,
                    const QuadratureSpec& q) {
  return std::clamp(fourier_probabilities(p, x, nu0, tau, q).p1, 0.0, 1.0);
}

double gamma_oracle(const HestonParams& p, double x, double nu0, double tau, double strike,
                    const QuadratureSpec& q) {
  if (!(tau > 0.0)) throw DomainError("tau", "gamma oracle requires tau > 0");
  if (!(strike > 0.0)) throw ArgumentError("oracle: strike must be positive");
  const auto centre = fourier_probabilities(p, x, nu0, tau, q);
  const double spot = strike * std::exp(x);
  // Every stencil point shares the centre's node count so the quadrature is a
  // smooth function of S.
  auto price_at = [&](double s) {
    const double xs = std::log(s / strike);
    const auto pr = probabilities_fixed(p, xs, nu0, tau, centre.upper, centre.nodes);
    const double df = std::exp(-p.r * tau);
    return strike * (std::exp(xs) * pr.p1 - df * pr.p2);
  };
  const double c0 = price_at(spot);
  auto second_difference = [&](double h) {
    return (price_at(spot + h) - 2.0 * c0 + price_at(spot - h)) / (h * h);
  };
  const double h = 1e-3 * spot;
  const double coarse = second_difference(h);
  const double fine = second_difference(0.5 * h);
  return std::max((4.0 * fine - coarse) / 3.0, 0.0);
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct PathResult {
  double sum = 0.0;
  double sum_sq = 0.0;
};

// Terminal log-spot (relative to S0) of one path for the given normal draws.
template <class Draw>
double simulate_log_return(const HestonParams& p, double nu0, double tau, int steps,
                           McScheme scheme, Draw&& draw) {
  const double dt = tau / steps;
  const double sqrt_dt = std::sqrt(dt);
  const double rho_bar = std::sqrt(1.0 - p.rho * p.rho);
  double ls = 0.0;
  double v = nu0;
  if (scheme == McScheme::kEulerFullTruncation) {
    for (int k = 0; k < steps; ++k) {
      const double z1 = draw();
      const double z2 = draw();
      const double vp = std::max(v, 0.0);
      const double sv = std::sqrt(vp) * sqrt_dt;
      ls += (p.r - 0.5 * vp) * dt + sv * z1;
      v += p.kappa * (p.theta - vp) * dt + p.sigma * sv * (p.rho * z1 + rho_bar * z2);
    }
    return ls;
  }
  // Andersen quadratic-exponential with central discretization of the
  // integrated variance.
  const double e = std::exp(-p.kappa * dt);
  const double s2 = p.sigma * p.sigma;
  const double k0 = -p.rho * p.kappa * p.theta * dt / p.sigma;
  const double k1 = 0.5 * dt * (p.kappa * p.rho / p.sigma - 0.5) - p.rho / p.sigma;
  const double k2 = 0.5 * dt * (p.kappa * p.rho / p.sigma - 0.5) + p.rho / p.sigma;
  const double k3 = 0.5 * dt * (1.0 - p.rho * p.rho);
  for (int k = 0; k < steps; ++k) {
    const double zv = draw();
    const double zs = draw();
    const double m = p.theta + (v - p.theta) * e;
    const double s_sq = v * s2 * e * (1.0 - e) / p.kappa +
                        p.theta * s2 * (1.0 - e) * (1.0 - e) / (2.0 * p.kappa);
    const double psi = s_sq / (m * m);
    double vn;
    if (psi <= 1.5) {
      const double inv = 2.0 / psi;
      const double b2 = inv - 1.0 + std::sqrt(inv) * std::sqrt(inv - 1.0);
      const double a = m / (1.0 + b2);
      const double bz = std::sqrt(b2) + zv;
      vn = a * bz * bz;
    } else {
      const double pz = (psi - 1.0) / (psi + 1.0);
      const double beta = (1.0 - pz) / m;
      const double uv = 0.5 * std::erfc(-zv / std::numbers::sqrt2);
      vn = uv <= pz ? 0.0 : std::log((1.0 - pz) / (1.0 - uv)) / beta;
    }
    ls += p.r * dt + k0 + k1 * v + k2 * vn + std::sqrt(k3 * (v + vn)) * zs;
    v = vn;
  }
  return ls;
}

}  // namespace

McEstimate price_call_mc(const HestonParams& p, double x, double nu0, double tau, double strike,
                         const MCSpec& spec) {
  spec.validate();
  validate_inputs(p, nu0, tau);
  if (tau == 0.0) return {strike * payoff(x), 0.0};

  const int steps = std::max(1, static_cast<int>(std::ceil(spec.steps_per_year * tau - 1e-9)));
  const double df = std::exp(-p.r * tau);
  const double spot = std::exp(x);
  const std::uint64_t samples = spec.paths;
  constexpr std::uint64_t kChunk = 4096;
  const std::uint64_t chunks = (samples + kChunk - 1) / kChunk;
  std::vector<PathResult> partial(chunks);

  parallel_for(chunks, [&](std::size_t c) {
    PathResult acc;
    const std::uint64_t begin = c * kChunk;
    const std::uint64_t end = std::min(samples, begin + kChunk);
    for (std::uint64_t path = begin; path < end; ++path) {
      const std::uint64_t stream = splitmix64(spec.seed ^ splitmix64(path));
      auto payoff_of = [&](double sign) {
        std::mt19937_64 engine(stream);
        std::normal_distribution<double> normal;
        const double lr = simulate_log_return(p, nu0, tau, steps, spec.scheme,
                                              [&] { return sign * normal(engine); });
        return df * std::max(spot * std::exp(lr) - 1.0, 0.0);
      };
      double value = payoff_of(1.0);
      if (spec.antithetic) value = 0.5 * (value + payoff_of(-1.0));
      acc.sum += value;
      acc.sum_sq += value * value;
    }
    partial[c] = acc;
  });

  PathResult total;
  for (const auto& pr : partial) {
    total.sum += pr.sum;
    total.sum_sq += pr.sum_sq;
  }
  const double n = static_cast<double>(samples);
  const double mean = total.sum / n;
  const double var = samples > 1 ? std::max(total.sum_sq / n - mean * mean, 0.0) * n / (n - 1.0)
                                 : 0.0;
  return {strike * mean, strike * std::sqrt(var / n)};
}

double black_scholes_call(double spot, double strike, double vol, double r, double tau) {
  if (tau <= 0.0 || vol <= 0.0) return std::max(spot - strike * std::exp(-r * tau), 0.0);
  const double sd = vol * std::sqrt(tau);
  const double d1 = (std::log(spot / strike) + (r + 0.5 * vol * vol) * tau) / sd;
  const double d2 = d1 - sd;
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  return spot * cdf(d1) - strike * std::exp(-r * tau) * cdf(d2);
}

}  // namespace deepsvm::oracle
