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

// Coefficient-driven energy model. Per-op coefficients are system level
// (engine plus the memory it streams from); transfers that leave the
// engine's memory (marshaling, HyperRAM reads) are charged per bit.

#include <cstdint>
#include <string>
#include <vector>

namespace xne::energy {

enum class MemoryMode { ScmOnly, Sram, SramMarshal, HyperRam };

const char* to_string(MemoryMode m);

struct EnergyCoefficients {
  double scm_0v4_fj_per_op = 21.6;
  double scm_0v5_fj_per_op = 33.75;  // dynamic; SRAM-on leakage comes on top
  double sram_fj_per_op = 115.0;
  double marshal_fj_per_op = 52.0;
  double marshal_pj_per_bit = 8.7;   // SRAM -> SCM
  double hyperram_pj_per_bit = 28.6;  // external read, charged to memory
  double sram_leakage_w = 0.1806e-3;
  double dma_onchip_pj_per_bit = 1.0;  // on-chip uDMA move, estimate
  // Informational split of the per-op energy: memory-side / engine-side.
  double sram_memory_to_engine = 7.1;
  double scm_access_relative = 1.0 / 3.0;  // SCM access energy / SRAM access energy

  void validate() const;
};

struct OperatingPoint {
  std::string name;
  double voltage = 0;
  double freq_hz = 0;
  MemoryMode mode = MemoryMode::Sram;
  double fj_per_op = 0;
  bool sram_powered = true;
  double leakage_w = 0;

  void validate() const;
};

// Built-in points: scm-0v4, scm-0v5, sram-0v6, marshal-0v6, hyperram, nominal-0v8.
OperatingPoint operating_point(const std::string& name, const EnergyCoefficients& c = {});
std::vector<std::string> operating_point_names();

inline constexpr double kHyperRamBitsPerSecond = 1e9;  // 125 MHz DDR x8
inline constexpr double kHyperRamLinkHz = 125e6;

struct EnergyTrace {
  uint64_t ops = 0;
  uint64_t scm_accesses = 0;
  uint64_t sram_accesses = 0;
  uint64_t marshal_bits = 0;
  uint64_t hyperram_bits = 0;
  uint64_t dma_onchip_bits = 0;
  double seconds = 0;

  EnergyTrace& operator+=(const EnergyTrace& o);
  friend EnergyTrace operator+(EnergyTrace a, const EnergyTrace& b) { return a += b; }
};

struct EnergyReport {
  double compute_j = 0;
  double memory_j = 0;
  double dma_j = 0;
  double marshal_j = 0;
  double leakage_j = 0;
  // Split of compute_j into its memory-side and engine-side shares.
  double memory_side_j = 0;
  double engine_side_j = 0;

  double total() const { return compute_j + memory_j + dma_j + marshal_j + leakage_j; }
  // Energy spent moving data outside the engine's own accesses.
  double traffic_j() const { return memory_j + dma_j + marshal_j; }

  EnergyReport& operator+=(const EnergyReport& o);
};

// Throws MemoryError when the trace uses memories the mode forbids.
EnergyReport account_energy(const EnergyTrace& t, const EnergyCoefficients& c, const OperatingPoint& op);

// Overrides from a JSON object with any EnergyCoefficients field names.
EnergyCoefficients coefficients_from_json(const std::string& json_text, EnergyCoefficients base = {});
// Reads the file named by XNE_COEFFICIENTS if set, else returns defaults.
EnergyCoefficients coefficients_from_environment();

}  // namespace xne::energy
