#include "gradleak/attack/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>

#include "gradleak/error.hpp"
#include "gradleak/simd/kernels.hpp"

namespace gradleak {
namespace {

constexpr double kArmijo = 1e-4;

void project(Tensor& x, bool unit_box) {
  if (!unit_box) return;
  for (double& v : x.data()) v = std::clamp(v, 0.0, 1.0);
}

std::optional<LossAndGradient> evaluate(const Objective& f, const Tensor& x) {
  try {
    auto r = f(x);
    if (!std::isfinite(r.loss) || !r.gradient.all_finite()) return std::nullopt;
    return r;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kOverflow) throw;
    return std::nullopt;
  }
}

double l1_norm(const Tensor& g) {
  double s = 0.0;
  for (double v : g.data()) s += std::abs(v);
  return s;
}

struct Pair {
  std::vector<double> s, y;
  double rho;
};

// -H·g by the two-loop recursion.
std::vector<double> lbfgs_direction(const std::deque<Pair>& hist, std::span<const double> g) {
  std::vector<double> q(g.begin(), g.end());
  std::vector<double> alpha(hist.size());
  for (std::size_t i = hist.size(); i-- > 0;) {
    alpha[i] = hist[i].rho * simd::dot(hist[i].s, q);
    simd::axpy(-alpha[i], hist[i].y, q);
  }
  const Pair& last = hist.back();
  const double gamma = simd::dot(last.s, last.y) / simd::dot(last.y, last.y);
  for (double& v : q) v *= gamma;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double beta = hist[i].rho * simd::dot(hist[i].y, q);
    simd::axpy(alpha[i] - beta, hist[i].s, q);
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

bool diverged(double loss, const Tensor& x) {
  if (!std::isfinite(loss) || !x.all_finite()) return true;
  const double norm = std::sqrt(simd::dot(x.data(), x.data()));
  return norm > 1e3 * std::sqrt(static_cast<double>(x.size()));
}

OptimizeResult minimize(const Objective& f, Tensor x0, std::size_t steps, const OptimizerConfig& config,
                        bool unit_box) {
  require(x0.all_finite(), ErrorKind::kInvalidArgument, "initial iterate is not finite");
  require(config.lr > 0.0, ErrorKind::kInvalidArgument, "step size must be positive");
  OptimizeResult out{std::move(x0)};
  project(out.x, unit_box);
  auto cur = evaluate(f, out.x);
  if (!cur || diverged(cur->loss, out.x)) {
    out.loss = cur ? cur->loss : std::nan("");
    out.collapsed = true;
    return out;
  }
  out.loss = cur->loss;

  if (config.kind == OptimizerKind::kGD) {
    for (; out.steps < steps; ++out.steps) {
      Tensor next = out.x;
      simd::axpy(-config.lr, cur->gradient.data(), next.data());
      project(next, unit_box);
      auto r = evaluate(f, next);
      if (!r || diverged(r->loss, next)) {
        out.collapsed = true;
        return out;
      }
      out.x = std::move(next);
      out.loss = r->loss;
      cur = std::move(r);
    }
    return out;
  }

  require(config.history >= 1 && config.max_line_search >= 1, ErrorKind::kInvalidArgument,
          "LBFGS needs history >= 1 and max_line_search >= 1");
  std::deque<Pair> hist;
  const std::size_t n = out.x.size();
  for (; out.steps < steps; ++out.steps) {
    const auto g = cur->gradient.data();
    std::vector<double> d;
    double t = config.lr;
    if (!hist.empty()) {
      d = lbfgs_direction(hist, g);
      if (simd::dot(d, g) >= 0.0) {
        hist.clear();
        d.clear();
      }
    }
    if (d.empty()) {
      d.assign(g.begin(), g.end());
      for (double& v : d) v = -v;
      const double l1 = l1_norm(cur->gradient);
      if (l1 == 0.0) break;
      t = std::min(1.0, 1.0 / l1) * config.lr;
    }

    std::optional<LossAndGradient> accepted;
    Tensor trial;
    std::size_t non_finite = 0, trials = 0;
    for (std::size_t ls = 0; ls < config.max_line_search; ++ls, t *= 0.5) {
      ++trials;
      trial = out.x;
      simd::axpy(t, d, trial.data());
      project(trial, unit_box);
      auto r = evaluate(f, trial);
      if (!r || diverged(r->loss, trial)) {
        ++non_finite;
        continue;
      }
      std::vector<double> delta(n);
      for (std::size_t i = 0; i < n; ++i) delta[i] = trial[i] - out.x[i];
      if (r->loss <= cur->loss + kArmijo * simd::dot(g, delta)) {
        accepted = std::move(r);
        break;
      }
    }
    if (!accepted) {
      out.collapsed = non_finite == trials;
      out.stalled = true;
      break;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = trial[i] - out.x[i];
      p.y[i] = accepted->gradient[i] - g[i];
    }
    const double sy = simd::dot(p.s, p.y);
    if (sy > 1e-10 * std::sqrt(simd::dot(p.s, p.s) * simd::dot(p.y, p.y))) {
      p.rho = 1.0 / sy;
      hist.push_back(std::move(p));
      if (hist.size() > config.history) hist.pop_front();
    }
    out.x = std::move(trial);
    out.loss = accepted->loss;
    cur = std::move(accepted);
  }
  return out;
}

}  // namespace gradleak
