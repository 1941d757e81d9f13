// Copyright 2026 The kmunet Authors
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
#pragma once

#include <string>
#include <vector>

#include "kmunet/numerics/gradcheck.hpp"

// Finite-difference suites behind `kmunet gradcheck`. All run in double
// precision with step 1e-6 and tolerance 1e-5.

namespace kmunet::cli {

struct SuiteCase {
  std::string module;
  std::string op;
  GradCheckReport report;
};

inline const std::vector<std::string> kSuiteModules{"numerics", "s6", "kan", "sem", "model"};

// `module` is one of kSuiteModules or "all". With `corrupt` an extra case
// with a deliberately wrong backward rule is appended; it must fail.
std::vector<SuiteCase> run_gradcheck_suites(const std::string& module, bool corrupt = false);

}  // namespace kmunet::cli
