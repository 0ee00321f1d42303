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
#include "xne/energy.hpp"

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "xne/error.hpp"

namespace xne::energy {

namespace {

constexpr double kFemto = 1e-15;
constexpr double kPico = 1e-12;

// Frequencies at the low-voltage points are calibration values: 0.5 V is
// pinned by its 28 Gop/s throughput at 220 op/cycle, 0.6 V by the ResNet
// frame rates (capped at the 0.8 V clock), 0.4 V is an estimate below 0.5 V.
constexpr double kFreq0v4 = 60e6;
constexpr double kFreq0v5 = 127e6;
constexpr double kFreq0v6 = 490e6;
constexpr double kFreq0v8 = 490e6;

}  // namespace

const char* to_string(MemoryMode m) {
  switch (m) {
    case MemoryMode::ScmOnly: return "scm-only";
    case MemoryMode::Sram: return "sram";
    case MemoryMode::SramMarshal: return "sram-marshal";
    case MemoryMode::HyperRam: return "hyperram";
  }
  return "?";
}

void EnergyCoefficients::validate() const {
  for (double v : {scm_0v4_fj_per_op, scm_0v5_fj_per_op, sram_fj_per_op, marshal_fj_per_op, marshal_pj_per_bit,
                   hyperram_pj_per_bit, sram_leakage_w, sram_memory_to_engine, scm_access_relative, dma_onchip_pj_per_bit})
    if (!(v > 0)) throw UsageError("energy coefficients must be positive");
  if (!(marshal_fj_per_op < sram_fj_per_op))
    throw UsageError("marshal-mode per-op energy must be below the SRAM-mode coefficient");
}

void OperatingPoint::validate() const {
  if (!(freq_hz > 0)) throw UsageError("operating point frequency must be positive");
  if (!(fj_per_op > 0)) throw UsageError("operating point energy per op must be positive");
  if (mode == MemoryMode::ScmOnly && sram_powered) throw UsageError("SCM-only mode requires SRAM powered off");
}

OperatingPoint operating_point(const std::string& name, const EnergyCoefficients& c) {
  c.validate();
  if (name == "scm-0v4") return {name, 0.4, kFreq0v4, MemoryMode::ScmOnly, c.scm_0v4_fj_per_op, false, 0.0};
  if (name == "scm-0v5") return {name, 0.5, kFreq0v5, MemoryMode::Sram, c.scm_0v5_fj_per_op, true, c.sram_leakage_w};
  if (name == "sram-0v6") return {name, 0.6, kFreq0v6, MemoryMode::Sram, c.sram_fj_per_op, true, 0.0};
  if (name == "marshal-0v6") return {name, 0.6, kFreq0v6, MemoryMode::SramMarshal, c.marshal_fj_per_op, true, 0.0};
  if (name == "hyperram") return {name, 0.6, kFreq0v6, MemoryMode::HyperRam, c.sram_fj_per_op, true, 0.0};
  if (name == "nominal-0v8") return {name, 0.8, kFreq0v8, MemoryMode::Sram, c.sram_fj_per_op, true, 0.0};
  throw UsageError("unknown operating point '" + name + "'");
}

std::vector<std::string> operating_point_names() {
  return {"scm-0v4", "scm-0v5", "sram-0v6", "marshal-0v6", "hyperram", "nominal-0v8"};
}

EnergyTrace& EnergyTrace::operator+=(const EnergyTrace& o) {
  ops += o.ops;
  scm_accesses += o.scm_accesses;
  sram_accesses += o.sram_accesses;
  marshal_bits += o.marshal_bits;
  hyperram_bits += o.hyperram_bits;
  dma_onchip_bits += o.dma_onchip_bits;
  seconds += o.seconds;
  return *this;
}

EnergyReport& EnergyReport::operator+=(const EnergyReport& o) {
  compute_j += o.compute_j;
  memory_j += o.memory_j;
  dma_j += o.dma_j;
  marshal_j += o.marshal_j;
  leakage_j += o.leakage_j;
  memory_side_j += o.memory_side_j;
  engine_side_j += o.engine_side_j;
  return *this;
}

EnergyReport account_energy(const EnergyTrace& t, const EnergyCoefficients& c, const OperatingPoint& op) {
  if (t.sram_accesses > 0 && (!op.sram_powered || op.mode == MemoryMode::ScmOnly))
    throw MemoryError("SRAM traffic in trace but operating point '" + op.name + "' has SRAM powered off");
  if (t.hyperram_bits > 0 && op.mode != MemoryMode::HyperRam)
    throw MemoryError("HyperRAM traffic in trace but operating point '" + op.name + "' does not stream from HyperRAM");
  if (t.marshal_bits > 0 && op.mode != MemoryMode::SramMarshal)
    throw MemoryError("marshal traffic in trace but operating point '" + op.name + "' is not a marshal mode");

  EnergyReport r;
  r.compute_j = static_cast<double>(t.ops) * op.fj_per_op * kFemto;
  r.memory_j = static_cast<double>(t.hyperram_bits) * c.hyperram_pj_per_bit * kPico;
  r.dma_j = static_cast<double>(t.dma_onchip_bits) * c.dma_onchip_pj_per_bit * kPico;
  r.marshal_j = static_cast<double>(t.marshal_bits) * c.marshal_pj_per_bit * kPico;
  r.leakage_j = (op.sram_powered ? op.leakage_w : 0.0) * t.seconds;

  double ratio = op.mode == MemoryMode::ScmOnly ? c.sram_memory_to_engine * c.scm_access_relative
                                                : c.sram_memory_to_engine;
  if (const uint64_t n = t.scm_accesses + t.sram_accesses; n > 0)
    ratio = c.sram_memory_to_engine *
            (static_cast<double>(t.sram_accesses) + c.scm_access_relative * static_cast<double>(t.scm_accesses)) /
            static_cast<double>(n);
  r.engine_side_j = r.compute_j / (1.0 + ratio);
  r.memory_side_j = r.compute_j - r.engine_side_j;
  return r;
}

EnergyCoefficients coefficients_from_json(const std::string& json_text, EnergyCoefficients c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("coefficient file: ") + e.what());
  }
  if (j.contains("coefficients")) j = j["coefficients"];
  if (!j.is_object()) throw ParseError("coefficient file must hold a JSON object");
  const std::pair<const char*, double*> fields[] = {
      {"scm_0v4_fj_per_op", &c.scm_0v4_fj_per_op},
      {"scm_0v5_fj_per_op", &c.scm_0v5_fj_per_op},
      {"sram_fj_per_op", &c.sram_fj_per_op},
      {"marshal_fj_per_op", &c.marshal_fj_per_op},
      {"marshal_pj_per_bit", &c.marshal_pj_per_bit},
      {"hyperram_pj_per_bit", &c.hyperram_pj_per_bit},
      {"sram_leakage_w", &c.sram_leakage_w},
      {"sram_memory_to_engine", &c.sram_memory_to_engine},
      {"scm_access_relative", &c.scm_access_relative},
      {"dma_onchip_pj_per_bit", &c.dma_onchip_pj_per_bit},
  };
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& [name, dst] : fields) {
      if (key != name) continue;
      if (!value.is_number()) throw ParseError("coefficient '" + key + "' must be a number");
      *dst = value.get<double>();
      known = true;
    }
    if (!known) throw ParseError("unknown coefficient '" + key + "'");
  }
  c.validate();
  return c;
}

EnergyCoefficients coefficients_from_environment() {
  const char* path = std::getenv("XNE_COEFFICIENTS");
  if (path == nullptr || *path == '\0') return {};
  std::ifstream in(path);
  if (!in) throw UsageError(std::string("cannot open coefficient file '") + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return coefficients_from_json(ss.str());
}

}  // namespace xne::energy
