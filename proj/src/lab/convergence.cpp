#include "gradleak/lab/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "gradleak/error.hpp"
#include "gradleak/rng.hpp"

namespace gradleak::lab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kCollapsedScale = 1e3;
constexpr double kDivergence = 1e6;
constexpr double kSlack = 1e-9;

std::vector<double> random_unit(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& e : v) {
      e = normal(rng);
      norm += e * e;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& e : v) e /= norm;
  return v;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

Eigen::Map<const MatrixXd, 0, Eigen::OuterStride<>> as_matrix(const std::vector<double>& a, std::size_t n) {
  // Row-major storage of a symmetric matrix reads the same column-major.
  return {a.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n),
          Eigen::OuterStride<>(static_cast<Eigen::Index>(n))};
}

Eigen::Map<const VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

void compute_x_star(QuadraticFamily& f) {
  MatrixXd sum_a = MatrixXd::Zero(f.n, f.n);
  VectorXd rhs = VectorXd::Zero(f.n);
  for (std::size_t t = 0; t < f.good(); ++t) {
    const auto a = as_matrix(f.members[t].A, f.n);
    sum_a += a;
    rhs += a * as_vector(f.members[t].center);
  }
  const VectorXd x = sum_a.ldlt().solve(rhs);
  f.x_star.assign(x.data(), x.data() + x.size());
}

void validate_shape(std::size_t T, std::size_t m, std::size_t n, double mu, double L) {
  require(T >= 1 && n >= 1, ErrorKind::kInvalidArgument, "family needs T ≥ 1 and n ≥ 1");
  require(2 * m < T, ErrorKind::kInvalidArgument,
          "collapsed members must be fewer than half: m=" + std::to_string(m) + ", T=" + std::to_string(T));
  require(mu > 0.0 && mu <= L, ErrorKind::kInvalidArgument, "need 0 < mu <= L");
}

QuadraticFamily random_family(std::size_t T, std::size_t m, std::size_t n, double mu, double L_eig, double L,
                              double spread, std::uint64_t seed, CollapsedBehavior collapsed) {
  require(spread >= 0.0, ErrorKind::kInvalidArgument, "center_spread must be non-negative");
  QuadraticFamily f;
  f.T = T;
  f.m = m;
  f.n = n;
  f.mu = mu;
  f.L = L;
  f.collapsed = collapsed;
  f.seed = seed;
  f.members.resize(T);

  std::mt19937_64 rng(derive_seed(seed, {0xfa}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> eig(mu, L_eig);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VectorXd z(n);
  for (auto& e : z) e = normal(rng);

  for (std::size_t t = 0; t < f.good(); ++t) {
    MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(g).householderQ();
    VectorXd lambda(n);
    for (auto& e : lambda) e = eig(rng);
    MatrixXd a = q * lambda.asDiagonal() * q.transpose();
    a = 0.5 * (a + a.transpose()).eval();
    f.members[t].A.assign(a.data(), a.data() + a.size());

    const auto dir = random_unit(n, rng());
    const double r = spread * unit(rng);
    f.members[t].center.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.members[t].center[i] = z[static_cast<Eigen::Index>(i)] + r * dir[i];
  }
  compute_x_star(f);
  return f;
}

}  // namespace

double QuadraticFamily::value(std::size_t t, std::span<const double> x) const {
  require(t < T, ErrorKind::kInvalidArgument, "member index out of range");
  require(is_good(t), ErrorKind::kInvalidArgument, "collapsed members have no objective value");
  const Member& mem = members[t];
  const VectorXd d = as_vector(x) - as_vector(mem.center);
  double v = 0.5 * d.dot(as_matrix(mem.A, n) * d);
  for (std::size_t i = 0; i < mem.phase.size(); ++i) v += sin_amplitude * std::sin(sin_frequency * x[i] + mem.phase[i]);
  return v;
}

std::vector<double> QuadraticFamily::gradient(std::size_t t, std::span<const double> x, std::size_t s) const {
  require(t < T, ErrorKind::kInvalidArgument, "member index out of range");
  require(x.size() == n, ErrorKind::kShape, "point has the wrong dimension");
  if (!is_good(t)) {
    if (collapsed == CollapsedBehavior::kRandomDirection) {
      auto g = random_unit(n, derive_seed(seed, {0xc0, t, s}));
      for (double& e : g) e *= kCollapsedScale;
      return g;
    }
    auto g = random_unit(n, derive_seed(seed, {0xc0, t}));
    const double scale = kCollapsedScale * std::ldexp(1.0, static_cast<int>(std::min<std::size_t>(s, 1000)));
    for (double& e : g) e *= scale;
    return g;
  }
  const Member& mem = members[t];
  const VectorXd g = as_matrix(mem.A, n) * (as_vector(x) - as_vector(mem.center));
  std::vector<double> out(g.data(), g.data() + g.size());
  for (std::size_t i = 0; i < mem.phase.size(); ++i)
    out[i] += sin_amplitude * sin_frequency * std::cos(sin_frequency * x[i] + mem.phase[i]);
  return out;
}

double QuadraticFamily::mean_value(std::span<const double> x) const {
  double v = 0.0;
  for (std::size_t t = 0; t < good(); ++t) v += value(t, x);
  return v / static_cast<double>(good());
}

std::vector<double> QuadraticFamily::mean_gradient(std::span<const double> x) const {
  std::vector<double> g(n, 0.0);
  for (std::size_t t = 0; t < good(); ++t) {
    const auto gt = gradient(t, x, 0);
    for (std::size_t i = 0; i < n; ++i) g[i] += gt[i];
  }
  for (double& e : g) e /= static_cast<double>(good());
  return g;
}

QuadraticFamily make_quadratic_family(std::size_t T, std::size_t m, std::size_t n, double mu, double L,
                                      double center_spread, std::uint64_t seed, CollapsedBehavior collapsed) {
  validate_shape(T, m, n, mu, L);
  return random_family(T, m, n, mu, L, L, center_spread, seed, collapsed);
}

QuadraticFamily make_perturbed_family(std::size_t T, std::size_t m, std::size_t n, double mu, double L,
                                      double center_spread, double amplitude, double frequency, std::uint64_t seed) {
  validate_shape(T, m, n, mu, L);
  require(amplitude >= 0.0 && frequency >= 0.0, ErrorKind::kInvalidArgument,
          "perturbation amplitude and frequency must be non-negative");
  const double curvature = amplitude * frequency * frequency;
  require(mu <= L - curvature, ErrorKind::kInvalidArgument,
          "perturbation curvature a*w^2 must leave room for eigenvalues in [mu, L - a*w^2]");
  QuadraticFamily f = random_family(T, m, n, mu, L - curvature, L, center_spread, seed,
                                    CollapsedBehavior::kRandomDirection);
  f.sin_amplitude = amplitude;
  f.sin_frequency = frequency;
  std::mt19937_64 rng(derive_seed(seed, {0x51}));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::acos(-1.0));
  for (std::size_t t = 0; t < f.good(); ++t) {
    f.members[t].phase.resize(n);
    for (double& p : f.members[t].phase) p = phase(rng);
  }
  return f;
}

QuadraticFamily make_family(std::vector<std::vector<double>> A, std::vector<std::vector<double>> centers, double mu,
                            double L) {
  require(!A.empty() && A.size() == centers.size(), ErrorKind::kInvalidArgument,
          "need one matrix per center and at least one member");
  const std::size_t n = centers.front().size();
  validate_shape(A.size(), 0, n, mu, L);
  QuadraticFamily f;
  f.T = A.size();
  f.n = n;
  f.mu = mu;
  f.L = L;
  for (std::size_t t = 0; t < f.T; ++t) {
    require(A[t].size() == n * n && centers[t].size() == n, ErrorKind::kShape, "member dimensions disagree");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        require(A[t][i * n + j] == A[t][j * n + i], ErrorKind::kInvalidArgument, "member matrix is not symmetric");
    f.members.push_back(Member{std::move(A[t]), std::move(centers[t]), {}});
  }
  compute_x_star(f);
  return f;
}

double kappa_hat(const QuadraticFamily& family, std::span<const double> x) {
  const auto mean = family.mean_gradient(x);
  double worst = 0.0;
  for (std::size_t t = 0; t < family.good(); ++t) worst = std::max(worst, l2_distance(family.gradient(t, x, 0), mean));
  return worst;
}

double GdTrace::max_kappa() const {
  return kappa.empty() ? 0.0 : *std::max_element(kappa.begin(), kappa.end());
}

double GdTrace::gamma(const QuadraticFamily& family) const {
  return std::sqrt(static_cast<double>(family.good() * family.n)) * max_kappa();
}

GdTrace run_robust_gd(const QuadraticFamily& family, const AggregatorKind& aggregator, double eta, std::size_t steps,
                      std::span<const double> x0) {
  require(eta > 0.0, ErrorKind::kInvalidArgument, "step size must be positive");
  require(x0.size() == family.n, ErrorKind::kShape, "x0 has the wrong dimension");
  GdTrace trace;
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<Vector> grads(family.T);
  for (std::size_t s = 0;; ++s) {
    for (std::size_t t = 0; t < family.T; ++t) grads[t] = family.gradient(t, x, s);
    const std::span<const Vector> good(grads.data(), family.good());
    const Vector mean = mean_of(good);
    const Vector agg = aggregate(aggregator, grads);
    double kappa = 0.0;
    for (const auto& g : good) kappa = std::max(kappa, l2_distance(g, mean));

    const double err = l2_distance(x, family.x_star);
    trace.error.push_back(err);
    trace.kappa.push_back(kappa);
    trace.mean_grad_norm.push_back(norm2(mean));
    trace.objective.push_back(std::isfinite(err) ? family.mean_value(x) : err);
    trace.deviation.push_back(l2_distance(agg, mean));
    if (!(err <= kDivergence)) {
      trace.diverged = true;
      break;
    }
    if (s == steps) break;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= eta * agg[i];
  }
  return trace;
}

BoundCheck check_theorem1(std::span<const double> error_trace, double mu, double L, double gamma, double x0_err) {
  require(!error_trace.empty(), ErrorKind::kInvalidArgument, "empty trace");
  const double rho = 1.0 - mu / (mu + L);
  BoundCheck out{true, std::numeric_limits<double>::infinity(), 0};
  double contraction = 1.0;
  for (std::size_t s = 0; s < error_trace.size(); ++s) {
    const double bound = contraction * x0_err + 2.0 * gamma / mu;
    const double margin = bound + kSlack - error_trace[s];
    if (!(margin >= out.worst_margin)) {
      out.worst_margin = std::isnan(margin) ? -std::numeric_limits<double>::infinity() : margin;
      out.worst_step = s;
    }
    contraction *= rho;
  }
  out.pass = out.worst_margin >= 0.0;
  return out;
}

BoundCheck check_claim1(const GdTrace& trace, const QuadraticFamily& family) {
  const double c = std::sqrt(static_cast<double>(family.good() * family.n));
  BoundCheck out{true, std::numeric_limits<double>::infinity(), 0};
  for (std::size_t s = 0; s < trace.deviation.size(); ++s) {
    const double margin = c * trace.kappa[s] + kSlack - trace.deviation[s];
    if (!(margin >= out.worst_margin)) {
      out.worst_margin = std::isnan(margin) ? -std::numeric_limits<double>::infinity() : margin;
      out.worst_step = s;
    }
  }
  out.pass = out.worst_margin >= 0.0;
  return out;
}

BoundCheck check_theorem2(const GdTrace& trace, const QuadraticFamily& family, std::size_t R_g) {
  require(R_g >= 1 && trace.mean_grad_norm.size() >= R_g, ErrorKind::kInvalidArgument,
          "trace shorter than R_g iterates");
  const double f_low = *std::min_element(trace.objective.begin(), trace.objective.end());
  const double gap = std::max(0.0, trace.objective.front() - f_low);
  const double bound =
      std::sqrt(2.0) / static_cast<double>(R_g) * std::sqrt(gap) + trace.gamma(family);
  const auto best = std::min_element(trace.mean_grad_norm.begin(), trace.mean_grad_norm.begin() + R_g);
  BoundCheck out;
  out.worst_margin = bound + kSlack - *best;
  out.worst_step = static_cast<std::size_t>(best - trace.mean_grad_norm.begin());
  out.pass = out.worst_margin >= 0.0;
  return out;
}

std::vector<double> theorem1_bound(const GdTrace& trace, const QuadraticFamily& family) {
  const double rho = 1.0 - family.mu / (family.mu + family.L);
  const double floor = 2.0 * trace.gamma(family) / family.mu;
  std::vector<double> out;
  double contraction = 1.0;
  for (std::size_t s = 0; s < trace.error.size(); ++s) {
    out.push_back(contraction * trace.error.front() + floor);
    contraction *= rho;
  }
  return out;
}

void write_trace_csv(std::ostream& out, const GdTrace& trace, const QuadraticFamily& family) {
  const auto bound = theorem1_bound(trace, family);
  out << "step,error,kappa_hat,bound\n";
  char line[128];
  for (std::size_t s = 0; s < trace.error.size(); ++s) {
    std::snprintf(line, sizeof line, "%zu,%.10g,%.10g,%.10g\n", s, trace.error[s], trace.kappa[s], bound[s]);
    out << line;
  }
}

std::vector<SweepRow> sweep_theorem1(const SweepConfig& config) {
  std::vector<SweepRow> rows;
  for (std::size_t m : config.m_values) {
    for (std::size_t n : config.n_values) {
      for (std::size_t k = 0; k < config.families; ++k) {
        const std::uint64_t seed = derive_seed(config.seed, {0x7e1, m, n, k});
        std::mt19937_64 rng(derive_seed(seed, {0x50}));
        const double spread = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const auto family = make_quadratic_family(config.T, m, n, config.mu, config.L, spread, seed);
        const auto dir = random_unit(n, rng());
        std::vector<double> x0(n);
        for (std::size_t i = 0; i < n; ++i) x0[i] = family.x_star[i] + 10.0 * dir[i];
        const auto trace = run_robust_gd(family, config.aggregator, 1.0 / config.L, config.steps, x0);
        SweepRow row{m, n, k, trace.gamma(family), {}, {}};
        row.theorem1 = check_theorem1(trace.error, config.mu, config.L, row.gamma, trace.error.front());
        if (trace.diverged) row.theorem1.pass = false;
        row.claim1 = check_claim1(trace, family);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<NonConvexRow> sweep_theorem2(const NonConvexConfig& config) {
  static constexpr std::size_t kMs[] = {0, 2, 4};
  std::vector<NonConvexRow> rows;
  for (std::size_t k = 0; k < config.seeds; ++k) {
    const std::size_t m = kMs[k % 3];
    const std::uint64_t seed = derive_seed(config.seed, {0x7e2, k});
    std::mt19937_64 rng(derive_seed(seed, {0x50}));
    const double spread = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto family = make_perturbed_family(config.T, m, config.n, config.mu, config.L, spread, config.amplitude,
                                              config.frequency, seed);
    const auto dir = random_unit(config.n, rng());
    std::vector<double> x0(config.n);
    for (std::size_t i = 0; i < config.n; ++i) x0[i] = family.x_star[i] + 10.0 * dir[i];
    const auto trace = run_robust_gd(family, config.aggregator, 1.0 / config.L, config.R_g, x0);
    NonConvexRow row{k, m, {}};
    row.theorem2 = trace.diverged ? BoundCheck{} : check_theorem2(trace, family, config.R_g);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gradleak::lab
