// Copyright 2026 The simt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

namespace simt::cli {

/// Runs one command line (args[0] is the program name). Returns the exit code:
/// 0 success, 1 runtime failure, 2 usage error.
int run(const std::vector<std::string>& args);

/// Splits "1,3,5" into integers; throws UsageError on anything else.
std::vector<int> parse_int_list(const std::string& text);

/// Expands `--config FILE` (key = value lines, '#' comments) into
/// `--key=value` arguments placed before the explicit ones, which then win.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace simt::cli
