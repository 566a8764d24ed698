#include "deepsvm/sampling.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>

#include "deepsvm/errors.hpp"
#include "deepsvm/format.hpp"

namespace deepsvm {

namespace {

struct Primitive {
  unsigned degree;
  unsigned coeffs;
  std::array<std::uint32_t, 5> m;
};

// Joe-Kuo (new-joe-kuo-6.21201) entries for dimensions 2..13.
constexpr std::array<Primitive, SobolEngine::kMaxDimension - 1> kJoeKuo{{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
}};

constexpr unsigned kBits = 32;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double affine(double u, const Interval& iv) { return iv.lo + u * (iv.hi - iv.lo); }

// Maps Sobol coordinates 1..7 onto (nu, tau, kappa, theta, sigma, rho, r).
CollocationPoint map_point(std::span<const double> u, double x, const DomainBounds& b) {
  CollocationPoint cp;
  cp.point = {x, affine(u[1], b.nu), affine(u[2], b.tau)};
  cp.params = {affine(u[3], b.kappa), affine(u[4], b.theta), affine(u[5], b.sigma),
               affine(u[6], b.rho), affine(u[7], b.r)};
  return cp;
}

template <class MakeX>
std::vector<CollocationPoint> draw_points(std::size_t n, SobolEngine& engine,
                                          const SamplingConfig& cfg, MakeX&& make_x) {
  if (engine.dimension() < 8) throw ArgumentError("sampling: engine dimension must be >= 8");
  constexpr std::size_t kWindow = 1000;
  std::vector<CollocationPoint> out;
  out.reserve(n);
  std::vector<double> u(engine.dimension());
  std::size_t window_draws = 0, window_rejects = 0;
  while (out.size() < n) {
    engine.next(u);
    CollocationPoint cp = map_point(u, make_x(u[0]), cfg.bounds);
    ++window_draws;
    if (feller_holds(cp.params)) {
      out.push_back(cp);
    } else {
      ++window_rejects;
    }
    if (window_draws == kWindow) {
      if (window_rejects * 10 > kWindow * 9) {
        throw ConfigError("sampling: Feller rejection rate above 90%; check parameter ranges");
      }
      window_draws = window_rejects = 0;
    }
  }
  return out;
}

}  // namespace

SobolEngine::SobolEngine(unsigned dimension, std::uint64_t scramble_seed)
    : dimension_(dimension), seed_(scramble_seed) {
  if (dimension < 1 || dimension > kMaxDimension) {
    throw ArgumentError("sobol: dimension must be in [1, " + std::to_string(kMaxDimension) + "]");
  }
  directions_.assign(std::size_t{dimension} * kBits, 0);
  for (unsigned i = 1; i <= kBits; ++i) directions_[i - 1] = 1u << (kBits - i);
  for (unsigned d = 1; d < dimension; ++d) {
    const Primitive& pr = kJoeKuo[d - 1];
    std::uint32_t* v = &directions_[std::size_t{d} * kBits];
    const unsigned s = pr.degree;
    for (unsigned i = 1; i <= s; ++i) v[i - 1] = pr.m[i - 1] << (kBits - i);
    for (unsigned i = s + 1; i <= kBits; ++i) {
      std::uint32_t vi = v[i - s - 1] ^ (v[i - s - 1] >> s);
      for (unsigned k = 1; k < s; ++k) {
        if ((pr.coeffs >> (s - 1 - k)) & 1u) vi ^= v[i - k - 1];
      }
      v[i - 1] = vi;
    }
  }
  state_.assign(dimension, 0);
  shift_.assign(dimension, 0);
  if (scramble_seed != 0) {
    std::uint64_t st = scramble_seed;
    for (auto& s : shift_) s = static_cast<std::uint32_t>(splitmix64(st) >> 32);
  }
}

void SobolEngine::next(std::span<double> out) {
  if (out.size() != dimension_) throw ArgumentError("sobol: output span has wrong dimension");
  if (index_ >= (std::uint64_t{1} << kBits) - 1) throw NumericalError("sobol: index overflow");
  // Gray-code update from index_ to index_ + 1 flips the lowest zero bit of index_.
  const unsigned c = static_cast<unsigned>(std::countr_one(index_));
  ++index_;
  constexpr double kScale = 1.0 / 4294967296.0;
  for (unsigned d = 0; d < dimension_; ++d) {
    state_[d] ^= directions_[std::size_t{d} * kBits + c];
    out[d] = static_cast<double>(state_[d] ^ shift_[d]) * kScale;
  }
}

std::vector<double> SobolEngine::next() {
  std::vector<double> out(dimension_);
  next(out);
  return out;
}

double warp_x(double u, const Interval& x_range, double alpha) {
  return x_range.mid() + x_range.half() * std::tanh(alpha * (2.0 * u - 1.0));
}

double unwarp_x(double x, const Interval& x_range, double alpha) {
  return 0.5 * (std::atanh((x - x_range.mid()) / x_range.half()) / alpha + 1.0);
}

std::vector<CollocationPoint> sample_interior(std::size_t n, SobolEngine& engine,
                                              const SamplingConfig& cfg) {
  if (n < 1) throw ArgumentError("sample_interior: n must be >= 1");
  if (!(cfg.alpha_x > 0.0)) throw ArgumentError("sample_interior: alpha_x must be positive");
  return draw_points(n, engine, cfg,
                     [&](double u) { return warp_x(u, cfg.bounds.x, cfg.alpha_x); });
}

std::vector<CollocationPoint> sample_atm(std::size_t n, SobolEngine& engine,
                                         const SamplingConfig& cfg) {
  if (n < 1) throw ArgumentError("sample_atm: n must be >= 1");
  const double w = cfg.atm_half_width;
  return draw_points(n, engine, cfg, [&](double u) { return -w + 2.0 * w * u; });
}

std::vector<BoundaryPoint> sample_boundary(std::size_t n, SobolEngine& engine,
                                           const SamplingConfig& cfg) {
  if (n % 2 != 0) throw ArgumentError("sample_boundary: n must be even");
  std::vector<BoundaryPoint> out;
  if (n == 0) return out;
  out.reserve(n);
  const auto inner = draw_points(n, engine, cfg, [](double) { return 0.0; });
  for (std::size_t i = 0; i < n; ++i) {
    BoundaryPoint b{inner[i], i < n / 2 ? BoundarySide::kLower : BoundarySide::kUpper};
    b.at.point.x = b.side == BoundarySide::kLower ? cfg.bounds.x.lo : cfg.bounds.x.hi;
    out.push_back(b);
  }
  return out;
}

double boundary_target(const BoundaryPoint& b) {
  return b.side == BoundarySide::kLower
             ? boundary_lower()
             : boundary_upper(b.at.point.x, b.at.params.r, b.at.point.tau);
}

Sampler::Sampler(std::uint64_t seed, SamplingConfig cfg)
    : config(cfg),
      interior_engine(8, seed * 3 + 1),
      atm_engine(8, seed * 3 + 2),
      boundary_engine(8, seed * 3 + 3) {}

CollocationSet rar_replace(const CollocationSet& active,
                           std::span<const CollocationPoint> candidates,
                           std::span<const double> residuals, std::size_t k, std::mt19937_64& rng,
                           RarSelection* selection) {
  if (candidates.size() != residuals.size()) {
    throw ArgumentError("rar_replace: candidate and residual counts differ");
  }
  if (k > candidates.size()) throw ArgumentError("rar_replace: k exceeds candidate count");
  if (k > active.interior.size()) throw ArgumentError("rar_replace: k exceeds interior size");

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto worse = [&](std::size_t a, std::size_t b) {
    const double ra = std::abs(residuals[a]), rb = std::abs(residuals[b]);
    return ra != rb ? ra > rb : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    worse);
  order.resize(k);

  // Partial Fisher-Yates: first k slots become the victims.
  std::vector<std::size_t> slots(active.interior.size());
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, slots.size() - 1);
    std::swap(slots[i], slots[pick(rng)]);
  }
  slots.resize(k);

  CollocationSet out = active;
  for (std::size_t i = 0; i < k; ++i) out.interior[slots[i]] = candidates[order[i]];
  if (selection) {
    selection->selected = std::move(order);
    selection->replaced = std::move(slots);
  }
  return out;
}

void write_collocation_csv(std::ostream& os, std::span<const CollocationPoint> points) {
  os << "kappa,theta,sigma,rho,r,x,nu,tau\n";
  for (const auto& cp : points) {
    write_csv_row(os, {cp.params.kappa, cp.params.theta, cp.params.sigma, cp.params.rho,
                       cp.params.r, cp.point.x, cp.point.nu, cp.point.tau});
  }
}

}  // namespace deepsvm
