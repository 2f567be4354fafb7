#pragma once

#include <algorithm>
#include <cmath>

#include "wetseg/common.hpp"

namespace wetseg::nn {

struct ScheduleSpec {
  double eta_min = 0.0;
  int t0 = 0;       // steps in the first cycle; 0 = one epoch's worth of batches
  int t_mult = 2;   // cycle-length multiplier at each restart
  bool per_epoch = false;  // advance the schedule once per epoch instead of per batch

  void validate() const {
    require(t0 >= 1 && t_mult >= 1, "ScheduleSpec: t0 and t_mult must be >= 1");
  }

  ScheduleSpec resolved(int batches_per_epoch) const {
    ScheduleSpec s = *this;
    if (s.t0 <= 0) s.t0 = std::max(1, batches_per_epoch);
    return s;
  }
};

/// Cosine annealing with warm restarts. `step` counts schedule steps taken
/// so far; the value returned is the learning rate used for that step.
/// At every restart boundary the rate is back to `base_lr` exactly.
inline double lr_at(long long step, double base_lr, const ScheduleSpec& sched) {
  sched.validate();
  require(step >= 0, "lr_at: negative step");
  require(sched.eta_min <= base_lr, "lr_at: eta_min above base learning rate");
  long long t_cur = step;
  long long t_i = sched.t0;
  if (sched.t_mult == 1) {
    t_cur %= t_i;  // constant cycle length
  } else {
    while (t_cur >= t_i) {
      t_cur -= t_i;
      t_i *= sched.t_mult;
    }
  }
  const double phase = static_cast<double>(t_cur) / static_cast<double>(t_i);
  return sched.eta_min + 0.5 * (base_lr - sched.eta_min) * (1.0 + std::cos(M_PI * phase));
}

}  // namespace wetseg::nn
