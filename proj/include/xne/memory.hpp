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

// Memory system and streamer primitives: address map, word-interleaved
// banks with round-robin arbitration, address generation, realignment and
// the HyperRAM uDMA link.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xne/energy.hpp"

namespace xne::mem {

enum class Region { SharedScm, SharedSram, CoreScm, HyperRam };

const char* to_string(Region r);

struct RegionInfo {
  Region id = Region::SharedScm;
  uint64_t base = 0;
  uint64_t size = 0;
  uint32_t banks = 0;  // 0 for off-chip memory
  bool engine_visible = true;

  uint64_t end() const { return base + size; }
  bool contains(uint64_t addr, uint64_t len) const { return addr >= base && addr + len <= end(); }
};

inline constexpr uint64_t KiB = 1024;
inline constexpr uint32_t kWordBytes = 4;

// Default map: shared SCM 8 KiB @0x0 (8 banks), shared SRAM 448 KiB @0x2000
// (16 banks), core-coupled SCM 64 KiB @0x1000_0000, HyperRAM 8 MiB @0x8000_0000.
struct MemoryMap {
  std::vector<RegionInfo> regions;
  bool sram_powered = true;

  static MemoryMap defaults(uint32_t sram_banks = 16);

  void validate() const;
  const RegionInfo& region(Region r) const;
  // Region holding [addr, addr + len); MemoryError when unmapped or SRAM is off.
  const RegionInfo& locate(uint64_t addr, uint64_t len = 1) const;
  // Global bank index across on-chip regions.
  uint32_t bank_of(uint64_t addr) const;
  uint32_t total_banks() const;
};

// Flat byte storage for every mapped region, allocated on first write.
class Memory {
 public:
  explicit Memory(MemoryMap map = MemoryMap::defaults());

  const MemoryMap& map() const { return map_; }
  MemoryMap& map() { return map_; }

  void write(uint64_t addr, std::span<const uint8_t> bytes);
  std::vector<uint8_t> read(uint64_t addr, uint64_t len) const;
  uint32_t read_word(uint64_t addr) const;

 private:
  std::vector<uint8_t>& storage(const RegionInfo& r);
  MemoryMap map_;
  std::vector<std::vector<uint8_t>> data_;
};

struct AddressGenConfig {
  uint64_t base = 0;
  uint32_t length_bits = 0;
  int64_t stride = 0;  // bytes between consecutive vectors
  uint32_t count = 1;
};

// Word-aligned read addresses for each vector, in stream order. Each vector
// covers [base + v * stride, + ceil(length_bits / 8)).
std::vector<uint64_t> gen_addresses(const AddressGenConfig& cfg, const MemoryMap& map);
uint32_t words_for_vector(uint64_t base, uint32_t length_bits);

// Rebuilds length_bits from little-endian words starting base_offset bytes
// into the first word. Tail bits of the last output word are zero.
std::vector<uint32_t> realign(std::span<const uint32_t> words, uint32_t base_offset, uint32_t length_bits);

// Round-robin arbiter: at most one grant per bank per cycle; among
// conflicting requesters the one after the last winner has priority.
class BankArbiter {
 public:
  BankArbiter(uint32_t banks, uint32_t requesters);

  struct Request {
    uint32_t requester = 0;
    uint32_t bank = 0;
  };
  // grant[i] answers requests[i]. A requester may post at most one request per cycle.
  void arbitrate(std::span<const Request> requests, std::span<uint8_t> grant);
  std::vector<uint8_t> arbitrate(std::span<const Request> requests);

 private:
  uint32_t requesters_;
  std::vector<uint32_t> last_;
  std::vector<int32_t> winner_;
  std::vector<uint32_t> winner_rank_;
  std::vector<uint32_t> touched_;
};

struct ContentionConfig {
  double core_rate = 0.25;  // probability of one core access per cycle
  double dma_rate = 0.0;
  uint64_t seed = 1;
};

struct PortRequest {
  uint32_t port = 0;
  uint64_t addr = 0;
  bool write = false;
};

struct TraceEntry {
  uint64_t cycle = 0;
  uint32_t port = 0;
  Region region = Region::SharedSram;
  uint64_t addr = 0;
  bool write = false;
};

// CSV columns: cycle,port,region,address,rw
void write_trace_csv(std::ostream& os, std::span<const TraceEntry> trace);

struct AccessStats {
  uint64_t engine_requests = 0;
  uint64_t engine_grants = 0;
  uint64_t scm_accesses = 0;
  uint64_t sram_accesses = 0;
  uint64_t background_requests = 0;
  uint64_t background_grants = 0;

  double engine_grant_rate() const {
    return engine_requests ? static_cast<double>(engine_grants) / static_cast<double>(engine_requests) : 1.0;
  }
};

// Shared interconnect seen by the engine ports. Ports [0, engine_ports) are
// the engine's, then the core and the DMA background agents.
class Interconnect {
 public:
  Interconnect(MemoryMap map, uint32_t engine_ports, ContentionConfig cc = {});

  // One clock cycle: arbitrates the engine requests together with this
  // cycle's background traffic. grant[i] answers reqs[i].
  void cycle(std::span<const PortRequest> reqs, std::span<uint8_t> grant);

  uint64_t now() const { return cycle_; }
  const AccessStats& stats() const { return stats_; }
  const MemoryMap& map() const { return map_; }

  void enable_trace(bool on) { trace_on_ = on; }
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  MemoryMap map_;
  uint32_t engine_ports_;
  ContentionConfig cc_;
  BankArbiter arbiter_;
  std::mt19937_64 rng_;
  uint32_t bg_bank_base_ = 0;
  uint32_t bg_banks_ = 1;
  std::vector<BankArbiter::Request> scratch_req_;
  std::vector<uint8_t> scratch_grant_;
  std::vector<Region> scratch_region_;
  uint64_t cycle_ = 0;
  AccessStats stats_;
  bool trace_on_ = false;
  std::vector<TraceEntry> trace_;
};

struct DmaResult {
  double seconds = 0;
  double energy_j = 0;
  energy::EnergyTrace trace;
};

// Transfer of `bits` from src to dst. HyperRAM moves run over the 1 Gbit/s
// link; on-chip moves over a 32-bit bus at the operating point's clock.
// CapacityError when the payload exceeds the destination region.
DmaResult dma_transfer(const MemoryMap& map, Region src, Region dst, uint64_t bits, const energy::OperatingPoint& op,
                       const energy::EnergyCoefficients& c = {});

}  // namespace xne::mem
