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
#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "georoute/numerics.hpp"

namespace georoute {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2 };

/// Finite-difference checks of every kernel on small random operands plus the
/// end-to-end routing pipeline (router, top-k, masked softmax, bank,
/// aggregation, residual injection). Uses h = 1e-4 and tolerance 1e-4.
std::vector<GradCheckReport> run_gradient_suite(std::uint64_t seed = 0);

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace georoute
