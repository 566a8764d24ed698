#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "deepsvm/heston.hpp"

namespace deepsvm {

/// Gray-code Sobol generator (Joe-Kuo direction numbers, 32-bit) with a
/// seed-controlled digital shift. Index 0 (the origin) is never emitted.
class SobolEngine {
 public:
  static constexpr unsigned kMaxDimension = 13;

  SobolEngine(unsigned dimension, std::uint64_t scramble_seed);

  /// Writes the next point into `out` (size == dimension()); components in [0, 1).
  void next(std::span<double> out);
  std::vector<double> next();

  unsigned dimension() const { return dimension_; }
  /// Index of the most recently emitted point.
  std::uint64_t index() const { return index_; }
  std::uint64_t scramble_seed() const { return seed_; }

 private:
  unsigned dimension_;
  std::uint64_t seed_;
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> directions_;  // dimension x 32
  std::vector<std::uint32_t> state_;
  std::vector<std::uint32_t> shift_;
};

struct CollocationPoint {
  HestonParams params;
  DomainPoint point;
  bool operator==(const CollocationPoint&) const = default;
};

enum class BoundarySide : std::uint8_t { kLower, kUpper };

struct BoundaryPoint {
  CollocationPoint at;
  BoundarySide side;
  bool operator==(const BoundaryPoint&) const = default;
};

struct CollocationSet {
  std::vector<CollocationPoint> interior;
  std::vector<CollocationPoint> atm;
  std::vector<BoundaryPoint> boundary;
  bool operator==(const CollocationSet&) const = default;
};

struct SamplingConfig {
  DomainBounds bounds;
  double alpha_x = 2.0;
  double atm_half_width = 0.05;
};

/// x = x_mid + x_half * tanh(alpha * (2u - 1)).
double warp_x(double u, const Interval& x_range, double alpha);
/// Inverse of warp_x on its image.
double unwarp_x(double x, const Interval& x_range, double alpha);

/// Interior points: x warped, everything else affine; Feller-violating draws
/// are skipped. Throws ConfigError if more than 90% of a 1000-draw window is
/// rejected.
std::vector<CollocationPoint> sample_interior(std::size_t n, SobolEngine& engine,
                                              const SamplingConfig& cfg = {});
/// ATM points: x uniform on [-w, w].
std::vector<CollocationPoint> sample_atm(std::size_t n, SobolEngine& engine,
                                         const SamplingConfig& cfg = {});
/// n/2 points on each x boundary (lower half first). n must be even.
std::vector<BoundaryPoint> sample_boundary(std::size_t n, SobolEngine& engine,
                                           const SamplingConfig& cfg = {});

/// Target value of a boundary point.
double boundary_target(const BoundaryPoint& b);

/// One Sobol engine per point family, seeded from a single seed.
struct Sampler {
  Sampler(std::uint64_t seed, SamplingConfig cfg = {});

  std::vector<CollocationPoint> interior(std::size_t n) { return sample_interior(n, interior_engine, config); }
  std::vector<CollocationPoint> atm(std::size_t n) { return sample_atm(n, atm_engine, config); }
  std::vector<BoundaryPoint> boundary(std::size_t n) { return sample_boundary(n, boundary_engine, config); }

  SamplingConfig config;
  SobolEngine interior_engine;
  SobolEngine atm_engine;
  SobolEngine boundary_engine;
};

struct RarSelection {
  std::vector<std::size_t> selected;  // candidate indices, by descending |residual|
  std::vector<std::size_t> replaced;  // interior indices overwritten, same order
};

/// Replaces k uniformly chosen distinct interior points with the k candidates
/// of largest |residual| (ties by lower index). ATM and boundary points are
/// untouched.
CollocationSet rar_replace(const CollocationSet& active,
                           std::span<const CollocationPoint> candidates,
                           std::span<const double> residuals, std::size_t k, std::mt19937_64& rng,
                           RarSelection* selection = nullptr);

/// Columnar export: kappa,theta,sigma,rho,r,x,nu,tau.
void write_collocation_csv(std::ostream& os, std::span<const CollocationPoint> points);

}  // namespace deepsvm
