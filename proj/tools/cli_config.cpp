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
#include "cli_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xne/error.hpp"

namespace xne::cli {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const DegenerateBatchNormError*>(&e)) return kUsage;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const DecodeError*>(&e)) return kParse;
  if (dynamic_cast<const CapacityError*>(&e)) return kCapacity;
  return kFailure;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ParseError("config: unknown key '" + k + "' in " + where);
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void load_config(const std::string& path, Settings& s) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config: top level must be an object");
  reject_unknown(j, {"tp", "mode", "seed", "format", "sim_rows", "timing", "contention", "coefficients"}, "config");
  try {
    take(j, "tp", s.tp);
    take(j, "mode", s.mode);
    take(j, "seed", s.seed);
    take(j, "format", s.format);
    take(j, "sim_rows", s.run.sim_rows);
    if (j.contains("timing")) {
      const auto& t = j.at("timing");
      reject_unknown(t, {"mem_latency", "job_setup", "feature_setup", "threshold_setup"}, "timing");
      take(t, "mem_latency", s.run.timing.mem_latency);
      take(t, "job_setup", s.run.timing.job_setup);
      take(t, "feature_setup", s.run.timing.feature_setup);
      take(t, "threshold_setup", s.run.timing.threshold_setup);
    }
    if (j.contains("contention")) {
      const auto& c = j.at("contention");
      reject_unknown(c, {"core_rate", "dma_rate", "seed"}, "contention");
      take(c, "core_rate", s.run.contention.core_rate);
      take(c, "dma_rate", s.run.contention.dma_rate);
      take(c, "seed", s.run.contention.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (j.contains("coefficients"))
    s.run.coeffs = energy::coefficients_from_json(j.at("coefficients").dump(), s.run.coeffs);
}

std::string canonical_mode(const std::string& name) {
  if (name == "sram-hyperram") return "hyperram";
  for (const auto& n : energy::operating_point_names())
    if (n == name) return n;
  throw UsageError("unknown mode '" + name + "'");
}

runner::NetworkDescriptor load_network(const std::string& name_or_path) {
  const auto names = runner::builtin_network_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end() || name_or_path.rfind("mvgg-", 0) == 0)
    return runner::builtin_network(name_or_path);
  return runner::NetworkDescriptor::from_json(read_file(name_or_path));
}

}  // namespace xne::cli
