#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "gradleak/robust/aggregate.hpp"

namespace gradleak::lab {

// What a collapsed member reports as its gradient at step s.
enum class CollapsedBehavior {
  kRandomDirection,  // 10³ · fresh random unit vector
  kExploding,        // 10³ · 2^s · fixed random unit vector
};

// One member f_t(x) = ½(x−c)ᵀA(x−c) + a·Σ_i sin(ω·x_i + φ_i).
struct Member {
  std::vector<double> A;      // n×n, row-major, symmetric
  std::vector<double> center;
  std::vector<double> phase;  // empty when the family has no perturbation
};

struct QuadraticFamily {
  std::size_t T = 0;
  std::size_t m = 0;  // collapsed members are the last m
  std::size_t n = 0;
  double mu = 0.0;
  double L = 0.0;
  double sin_amplitude = 0.0;
  double sin_frequency = 0.0;
  CollapsedBehavior collapsed = CollapsedBehavior::kRandomDirection;
  std::uint64_t seed = 0;
  std::vector<Member> members;  // size T; collapsed entries carry no data
  std::vector<double> x_star;   // minimizer of the good-mean quadratic part

  std::size_t good() const { return T - m; }
  bool is_good(std::size_t t) const { return t < good(); }

  double value(std::size_t t, std::span<const double> x) const;
  // Collapsed members depend on the step index s only.
  std::vector<double> gradient(std::size_t t, std::span<const double> x, std::size_t s) const;

  // Good-mean objective and gradient.
  double mean_value(std::span<const double> x) const;
  std::vector<double> mean_gradient(std::span<const double> x) const;
};

// Random family: each good A_t = QᵀΛQ with Λ uniform in [μ, L], centers
// c_t = z + u_t with ||u_t|| ≤ center_spread, x* the weighted least-squares
// minimizer (ΣA_t)⁻¹ΣA_t c_t.
QuadraticFamily make_quadratic_family(std::size_t T, std::size_t m, std::size_t n, double mu, double L,
                                      double center_spread, std::uint64_t seed,
                                      CollapsedBehavior collapsed = CollapsedBehavior::kRandomDirection);

// Non-convex variant: A_t eigenvalues drawn from [μ, L − aω²] so every member
// stays L-smooth; the sinusoid makes the members non-convex when aω² > μ.
QuadraticFamily make_perturbed_family(std::size_t T, std::size_t m, std::size_t n, double mu, double L,
                                      double center_spread, double amplitude, double frequency, std::uint64_t seed);

// Family from explicit good members, all m = 0.
QuadraticFamily make_family(std::vector<std::vector<double>> A, std::vector<std::vector<double>> centers, double mu,
                            double L);

// κ̂ at x: max over good t of ||∇f_t(x) − mean_good ∇f(x)||₂.
double kappa_hat(const QuadraticFamily& family, std::span<const double> x);

struct GdTrace {
  std::vector<double> error;           // ||x^s − x*||, s = 0..steps
  std::vector<double> kappa;           // κ̂ at x^s
  std::vector<double> mean_grad_norm;  // ||mean_good ∇f(x^s)||
  std::vector<double> objective;       // good-mean f(x^s)
  std::vector<double> deviation;       // ||aggregate − mean(good)|| at x^s
  bool diverged = false;               // error exceeded 10⁶; trace truncated there

  double max_kappa() const;
  // Γ = sqrt((T−m)·n)·max κ̂
  double gamma(const QuadraticFamily& family) const;
};

GdTrace run_robust_gd(const QuadraticFamily& family, const AggregatorKind& aggregator, double eta, std::size_t steps,
                      std::span<const double> x0);

struct BoundCheck {
  bool pass = false;
  double worst_margin = 0.0;  // min over s of bound − value; negative on failure
  std::size_t worst_step = 0;
};

// ||x^s − x*|| ≤ (1 − μ/(μ+L))^s·x0_err + 2Γ/μ + 1e-9 for every s.
BoundCheck check_theorem1(std::span<const double> error_trace, double mu, double L, double gamma, double x0_err);

// ||aggregate − mean(good)|| ≤ sqrt((T−m)n)·κ̂ + 1e-9 at every iterate.
BoundCheck check_claim1(const GdTrace& trace, const QuadraticFamily& family);

// min_s ||mean_good ∇f(x^s)|| ≤ (√2/R_g)·sqrt(f(x⁰) − f*) + Γ over the first
// R_g iterates. f* is estimated by the lowest objective seen, which can only
// make the check stricter.
BoundCheck check_theorem2(const GdTrace& trace, const QuadraticFamily& family, std::size_t R_g);

// Theorem-1 bound for each step of the trace.
std::vector<double> theorem1_bound(const GdTrace& trace, const QuadraticFamily& family);

// Columns step,error,kappa_hat,bound.
void write_trace_csv(std::ostream& out, const GdTrace& trace, const QuadraticFamily& family);

struct SweepConfig {
  std::size_t T = 10;
  std::vector<std::size_t> m_values{0, 2, 4};
  std::vector<std::size_t> n_values{5, 50};
  double mu = 1.0;
  double L = 10.0;
  std::size_t families = 100;  // per (m, n) cell
  std::size_t steps = 100;
  AggregatorKind aggregator = AggregatorKind::median();
  std::uint64_t seed = 0;
};

struct SweepRow {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t family = 0;
  double gamma = 0.0;
  BoundCheck theorem1;
  BoundCheck claim1;
};

std::vector<SweepRow> sweep_theorem1(const SweepConfig& config);

struct NonConvexConfig {
  std::size_t T = 10;
  std::size_t n = 5;
  double mu = 1.0;
  double L = 10.0;
  double amplitude = 0.5;
  double frequency = 2.0;
  std::size_t R_g = 200;
  std::size_t seeds = 50;
  AggregatorKind aggregator = AggregatorKind::median();
  std::uint64_t seed = 0;
};

struct NonConvexRow {
  std::size_t seed = 0;
  std::size_t m = 0;
  BoundCheck theorem2;
};

// m cycles through {0, 2, 4} over the seeds.
std::vector<NonConvexRow> sweep_theorem2(const NonConvexConfig& config);

}  // namespace gradleak::lab
