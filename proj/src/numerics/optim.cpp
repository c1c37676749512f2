#include "gvmt/numerics/optim.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "gvmt/errors.h"

namespace gvmt::num {

void optimizer_step(const ParameterList& params, OptimizerState& state, double lr) {
  if (!(lr >= 0.0)) throw ConfigError("optimizer_step: learning rate must be non-negative");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.tensor.numel(), 0.0);
      state.second_moment.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("optimizer_step: state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i].tensor;
    if (state.first_moment[i].size() != t.numel() || state.second_moment[i].size() != t.numel()) {
      throw ShapeError("optimizer_step: moment buffers do not match parameter " + params[i].name);
    }
    for (double g : t.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + params[i].name);
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);

  // RAdam: length of the approximated simple moving average.
  bool adaptive = true;
  double rect = 1.0;
  if (state.rectified) {
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * std::pow(b2, t) / bc2;
    if (rho_t > 4.0) {
      rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    } else {
      adaptive = false;
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].tensor;
    auto w = p.mutable_data();
    auto g = p.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      const double mhat = m[j] / bc1;
      if (adaptive) {
        const double vhat = v[j] / bc2;
        w[j] -= lr * rect * mhat / (std::sqrt(vhat) + state.epsilon);
      } else {
        w[j] -= lr * mhat;
      }
    }
  }
}

void validate(const ScheduleConfig& cfg) {
  if (!(cfg.peak_lr > 0.0)) throw ConfigError("schedule: peak_lr must be positive");
  if (cfg.warmup_steps < 1) throw ConfigError("schedule: warmup_steps must be at least 1");
}

double lr_at_step(const ScheduleConfig& cfg, std::uint64_t step) {
  validate(cfg);
  if (step < 1) throw ConfigError("lr_at_step: steps are counted from 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(cfg.warmup_steps);
  return cfg.peak_lr * std::min(s / w, std::sqrt(w / s));
}

}  // namespace gvmt::num
