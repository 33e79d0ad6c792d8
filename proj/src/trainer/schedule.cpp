/*
 * Copyright (c) 2026 The georoute Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <cmath>
#include <numbers>

#include "georoute/trainer.hpp"

namespace georoute {

std::size_t ScheduleSpec::warmup_steps() const {
  return static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps)));
}

void ScheduleSpec::validate() const {
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw PreconditionError("schedule: warmup_fraction must lie in [0, 1)");
  }
  if (!(lr_peak >= 0.0) || !(lr_end >= 0.0)) throw PreconditionError("schedule: learning rates must be nonnegative");
}

double lr_at(std::size_t step, const ScheduleSpec& spec) {
  if (step > spec.total_steps) {
    throw PreconditionError("lr_at: step " + std::to_string(step) + " beyond total_steps " +
                            std::to_string(spec.total_steps));
  }
  const std::size_t warmup = spec.warmup_steps();
  if (step < warmup) return spec.lr_peak * static_cast<double>(step) / static_cast<double>(warmup);
  const std::size_t decay_steps = spec.total_steps - warmup;
  if (decay_steps == 0) return spec.lr_peak;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(decay_steps);
  return spec.lr_end + (spec.lr_peak - spec.lr_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace georoute
