#pragma once

#include <cstdint>
#include <vector>

#include "gvmt/numerics/tensor.h"

namespace gvmt::num {

// Adam moments plus the RAdam switch. Buffers are created on the first
// step and index-aligned with the parameter list passed to optimizer_step.
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool rectified = true;
};

// One Adam/RAdam update using each parameter's accumulated gradient (an
// absent gradient counts as zero). Throws NumericError naming the first
// parameter with a non-finite gradient, before touching any parameter.
void optimizer_step(const ParameterList& params, OptimizerState& state, double lr);

struct ScheduleConfig {
  double peak_lr = 1e-3;
  std::uint64_t warmup_steps = 4000;
};

void validate(const ScheduleConfig& cfg);

// Linear warmup to peak_lr, then inverse square-root decay.
double lr_at_step(const ScheduleConfig& cfg, std::uint64_t step);

}  // namespace gvmt::num
