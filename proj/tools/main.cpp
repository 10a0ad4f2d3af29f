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

#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv) {
  // Logs go to stderr so stdout carries only tables; SPDLOG_LEVEL sets verbosity.
  spdlog::set_default_logger(spdlog::stderr_color_mt("simt"));
  spdlog::cfg::load_env_levels();
  return simt::cli::run(std::vector<std::string>(argv, argv + argc));
}
