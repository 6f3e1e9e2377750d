// Copyright 2026 The diffsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "diffsim/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <string>

#include "diffsim/error.hpp"

namespace diffsim {

void OptimizerConfig::validate() const {
  if (memory < 1) throw ConfigError("optimizer: memory must be >= 1");
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0))
    throw ConfigError("optimizer: need 0 < c1 < c2 < 1");
  if (max_iters < 0) throw ConfigError("optimizer: max_iters must be >= 0");
  if (!lower.empty() && !upper.empty() && lower.size() != upper.size())
    throw ConfigError("optimizer: bound dimension mismatch");
}

namespace {

Eigen::VectorXd project(const OptimizerConfig& cfg, Eigen::VectorXd x) {
  for (int i = 0; i < x.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (!cfg.lower.empty()) x(i) = std::max(x(i), cfg.lower[u]);
    if (!cfg.upper.empty()) x(i) = std::min(x(i), cfg.upper[u]);
  }
  return x;
}

// Gradient norm used for convergence: for interior points this is the plain
// infinity norm; at active bounds the outward component is ignored.
double projected_grad_norm(const OptimizerConfig& cfg, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& g) {
  double n = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    double gi = g(i);
    if (!cfg.lower.empty() && x(i) <= cfg.lower[u] && gi > 0.0) gi = 0.0;
    if (!cfg.upper.empty() && x(i) >= cfg.upper[u] && gi < 0.0) gi = 0.0;
    n = std::max(n, std::abs(gi));
  }
  return n;
}

}  // namespace

OptimResult lbfgs_minimize(const Objective& objective, const Eigen::VectorXd& theta0,
                           const OptimizerConfig& cfg) {
  cfg.validate();
  OptimResult result;
  Eigen::VectorXd x = project(cfg, theta0);
  Eigen::VectorXd g(x.size());
  double f = objective(x, g);
  result.theta = x;
  result.loss = f;
  result.loss_curve.push_back(f);
  result.theta_curve.push_back(x);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (projected_grad_norm(cfg, x, g) <= cfg.grad_tol) {
      result.converged = true;
      result.message = "gradient tolerance reached";
      return result;
    }

    // Two-loop recursion.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd d = -q;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      // Not a descent direction; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      slope = g.dot(d);
    }

    // Armijo backtracking with a Wolfe-driven expansion of the unit step.
    const double f0 = f;
    double step = 1.0;
    Eigen::VectorXd x_new, g_new(x.size());
    double f_new = f0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = project(cfg, x + step * d);
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f0 + cfg.c1 * step * slope) {
        accepted = true;
        // If curvature is still strongly negative at the full step, try to
        // grow it a few times while Armijo keeps holding.
        int grow = 0;
        while (step >= 1.0 && grow < 4 && g_new.dot(d) < cfg.c2 * slope) {
          const double trial = step * 2.0;
          Eigen::VectorXd x_try = project(cfg, x + trial * d);
          Eigen::VectorXd g_try(x.size());
          const double f_try = objective(x_try, g_try);
          if (!std::isfinite(f_try) || f_try > f0 + cfg.c1 * trial * slope) break;
          step = trial;
          x_new = std::move(x_try);
          g_new = std::move(g_try);
          f_new = f_try;
          ++grow;
        }
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      result.message = "line search failed; returning last iterate";
      return result;
    }

    result.steps.push_back({f0, slope, step, f_new});

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    x = std::move(x_new);
    g = g_new;
    f = f_new;
    result.iterations = iter + 1;
    result.loss_curve.push_back(f);
    result.theta_curve.push_back(x);
    if (f < result.loss) {
      result.loss = f;
      result.theta = x;
    }
  }
  if (projected_grad_norm(cfg, x, g) <= cfg.grad_tol) {
    result.converged = true;
    result.message = "gradient tolerance reached";
  } else {
    result.message = "iteration limit reached";
  }
  return result;
}

}  // namespace diffsim
