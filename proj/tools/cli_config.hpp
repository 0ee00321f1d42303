/*
 * Copyright 2026 The XNE Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "xne/runner.hpp"

namespace xne::cli {

// Process exit codes, one per error class.
enum Exit : int {
  kOk = 0,
  kFailure = 1,  // internal or memory-model errors
  kUsage = 2,
  kParse = 3,
  kCapacity = 4,
  kVerify = 5,
};

int exit_code_for(const std::exception& e);

// Settings shared by all subcommands. A JSON config file fills them in;
// command-line flags then override individual fields.
struct Settings {
  uint32_t tp = 128;
  std::string mode = "hyperram";
  uint64_t seed = 1;
  std::string format = "text";
  std::string trace_path;
  runner::RunConfig run;
};

// Keys: tp, mode, seed, format, sim_rows, timing{...}, contention{...},
// coefficients{...}. Unknown keys are a ParseError.
void load_config(const std::string& path, Settings& s);

// Accepts the operating-point names plus the sram-hyperram alias.
std::string canonical_mode(const std::string& name);

runner::NetworkDescriptor load_network(const std::string& name_or_path);

std::string read_file(const std::string& path);

}  // namespace xne::cli
