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
#include "xne/memory.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "xne/error.hpp"

namespace xne::mem {

const char* to_string(Region r) {
  switch (r) {
    case Region::SharedScm: return "scm";
    case Region::SharedSram: return "sram";
    case Region::CoreScm: return "core-scm";
    case Region::HyperRam: return "hyperram";
  }
  return "?";
}

MemoryMap MemoryMap::defaults(uint32_t sram_banks) {
  MemoryMap m;
  m.regions = {
      {Region::SharedScm, 0x0, 8 * KiB, 8, true},
      {Region::SharedSram, 0x2000, 448 * KiB, sram_banks, true},
      {Region::CoreScm, 0x1000'0000, 64 * KiB, 8, false},
      {Region::HyperRam, 0x8000'0000, 8 * 1024 * KiB, 0, false},
  };
  m.validate();
  return m;
}

void MemoryMap::validate() const {
  for (size_t a = 0; a < regions.size(); ++a) {
    if (regions[a].size == 0) throw UsageError("memory region with zero size");
    for (size_t b = a + 1; b < regions.size(); ++b) {
      const auto& x = regions[a];
      const auto& y = regions[b];
      if (x.id == y.id) throw UsageError("memory region listed twice");
      if (x.base < y.end() && y.base < x.end()) throw UsageError("memory regions overlap");
    }
  }
}

const RegionInfo& MemoryMap::region(Region r) const {
  for (const auto& info : regions)
    if (info.id == r) return info;
  throw MemoryError(std::string("region ") + to_string(r) + " not mapped");
}

const RegionInfo& MemoryMap::locate(uint64_t addr, uint64_t len) const {
  for (const auto& info : regions) {
    if (!info.contains(addr, std::max<uint64_t>(len, 1))) continue;
    if (info.id == Region::SharedSram && !sram_powered) throw MemoryError("access to powered-off SRAM");
    return info;
  }
  throw MemoryError("access to unmapped range at 0x" + [&] {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%llx", static_cast<unsigned long long>(addr));
    return std::string(buf);
  }());
}

uint32_t MemoryMap::bank_of(uint64_t addr) const {
  uint32_t offset = 0;
  for (const auto& info : regions) {
    if (info.contains(addr, 1)) {
      if (info.banks == 0) throw MemoryError("address is not in a banked on-chip region");
      return offset + static_cast<uint32_t>(((addr - info.base) / kWordBytes) % info.banks);
    }
    offset += info.banks;
  }
  throw MemoryError("bank lookup of unmapped address");
}

uint32_t MemoryMap::total_banks() const {
  uint32_t n = 0;
  for (const auto& info : regions) n += info.banks;
  return n;
}

Memory::Memory(MemoryMap map) : map_(std::move(map)), data_(map_.regions.size()) {}

std::vector<uint8_t>& Memory::storage(const RegionInfo& r) {
  const auto idx = static_cast<size_t>(&r - map_.regions.data());
  if (data_.size() < map_.regions.size()) data_.resize(map_.regions.size());
  auto& d = data_[idx];
  if (d.empty()) d.assign(r.size, 0);
  return d;
}

void Memory::write(uint64_t addr, std::span<const uint8_t> bytes) {
  if (bytes.empty()) return;
  const auto& r = map_.locate(addr, bytes.size());
  auto& d = storage(r);
  std::copy(bytes.begin(), bytes.end(), d.begin() + static_cast<std::ptrdiff_t>(addr - r.base));
}

std::vector<uint8_t> Memory::read(uint64_t addr, uint64_t len) const {
  std::vector<uint8_t> out(len, 0);
  if (len == 0) return out;
  const auto& r = map_.locate(addr, len);
  const auto& d = data_[static_cast<size_t>(&r - map_.regions.data())];
  if (!d.empty()) std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(addr - r.base), len, out.begin());
  return out;
}

uint32_t Memory::read_word(uint64_t addr) const {
  const auto& r = map_.locate(addr, kWordBytes);
  const auto& d = data_[static_cast<size_t>(&r - map_.regions.data())];
  if (d.empty()) return 0;
  const uint8_t* b = d.data() + (addr - r.base);
  return uint32_t{b[0]} | uint32_t{b[1]} << 8 | uint32_t{b[2]} << 16 | uint32_t{b[3]} << 24;
}

uint32_t words_for_vector(uint64_t base, uint32_t length_bits) {
  if (length_bits == 0) return 0;
  const uint64_t bytes = (length_bits + 7) / 8;
  const uint64_t first = base / kWordBytes;
  const uint64_t last = (base + bytes - 1) / kWordBytes;
  return static_cast<uint32_t>(last - first + 1);
}

std::vector<uint64_t> gen_addresses(const AddressGenConfig& cfg, const MemoryMap& map) {
  std::vector<uint64_t> out;
  if (cfg.length_bits == 0 || cfg.count == 0) return out;
  const uint64_t bytes = (cfg.length_bits + 7) / 8;
  const RegionInfo* region = nullptr;
  for (uint32_t v = 0; v < cfg.count; ++v) {
    const int64_t start = static_cast<int64_t>(cfg.base) + static_cast<int64_t>(v) * cfg.stride;
    if (start < 0) throw MemoryError("address generator underflows the address space");
    const auto base = static_cast<uint64_t>(start);
    const uint64_t lo = base / kWordBytes * kWordBytes;
    const uint64_t hi = (base + bytes + kWordBytes - 1) / kWordBytes * kWordBytes;
    const auto& r = map.locate(lo, hi - lo);
    if (region != nullptr && region != &r) throw MemoryError("address generator stream crosses memory regions");
    region = &r;
    for (uint64_t a = lo; a < hi; a += kWordBytes) out.push_back(a);
  }
  return out;
}

std::vector<uint32_t> realign(std::span<const uint32_t> words, uint32_t base_offset, uint32_t length_bits) {
  if (base_offset >= kWordBytes) throw UsageError("realign base offset must be below 4 bytes");
  std::vector<uint32_t> out((length_bits + 31) / 32, 0);
  if (length_bits == 0) return out;
  if (words.size() < words_for_vector(base_offset, length_bits)) throw MemoryError("realigner stream underrun");
  const uint32_t shift = base_offset * 8;
  for (size_t i = 0; i < out.size(); ++i) {
    uint64_t pair = words[i];
    if (i + 1 < words.size()) pair |= uint64_t{words[i + 1]} << 32;
    out[i] = static_cast<uint32_t>(pair >> shift);
  }
  if (const uint32_t tail = length_bits % 32; tail != 0) out.back() &= (uint32_t{1} << tail) - 1;
  return out;
}

BankArbiter::BankArbiter(uint32_t banks, uint32_t requesters)
    : requesters_(requesters), last_(banks, requesters - 1), winner_(banks, -1), winner_rank_(banks, 0) {
  if (banks == 0 || requesters == 0) throw UsageError("arbiter needs at least one bank and one requester");
}

void BankArbiter::arbitrate(std::span<const Request> requests, std::span<uint8_t> grant) {
  touched_.clear();
  for (size_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    grant[i] = 0;
    if (r.bank >= last_.size() || r.requester >= requesters_) throw UsageError("arbiter request out of range");
    // Distance after the last winner; smaller wins.
    const uint32_t rank = (r.requester + requesters_ - last_[r.bank] - 1) % requesters_;
    if (winner_[r.bank] < 0) {
      touched_.push_back(r.bank);
    } else if (rank >= winner_rank_[r.bank]) {
      continue;
    }
    winner_[r.bank] = static_cast<int32_t>(i);
    winner_rank_[r.bank] = rank;
  }
  for (uint32_t b : touched_) {
    const auto w = static_cast<size_t>(winner_[b]);
    grant[w] = 1;
    last_[b] = requests[w].requester;
    winner_[b] = -1;
  }
}

std::vector<uint8_t> BankArbiter::arbitrate(std::span<const Request> requests) {
  std::vector<uint8_t> grant(requests.size(), 0);
  arbitrate(requests, grant);
  return grant;
}

void write_trace_csv(std::ostream& os, std::span<const TraceEntry> trace) {
  os << "cycle,port,region,address,rw\n";
  for (const auto& e : trace) {
    char addr[24];
    std::snprintf(addr, sizeof addr, "0x%08llx", static_cast<unsigned long long>(e.addr));
    os << e.cycle << ',' << e.port << ',' << to_string(e.region) << ',' << addr << ',' << (e.write ? 'W' : 'R')
       << '\n';
  }
}

Interconnect::Interconnect(MemoryMap map, uint32_t engine_ports, ContentionConfig cc)
    : map_(std::move(map)),
      engine_ports_(engine_ports),
      cc_(cc),
      arbiter_(map_.total_banks(), engine_ports + 2),
      rng_(cc.seed) {
  // Background agents hit the shared memory the engine streams from.
  const Region bg_region = map_.sram_powered ? Region::SharedSram : Region::SharedScm;
  for (const auto& info : map_.regions) {
    if (info.id == bg_region) {
      bg_banks_ = info.banks;
      break;
    }
    bg_bank_base_ += info.banks;
  }
}

void Interconnect::cycle(std::span<const PortRequest> reqs, std::span<uint8_t> grant) {
  auto& all = scratch_req_;
  auto& regions = scratch_region_;
  all.clear();
  regions.clear();
  for (const auto& r : reqs) {
    if (r.port >= engine_ports_) throw UsageError("engine port index out of range");
    const auto& info = map_.locate(r.addr, kWordBytes);
    if (!info.engine_visible) throw MemoryError(std::string("engine cannot access ") + to_string(info.id));
    all.push_back({r.port, map_.bank_of(r.addr)});
    regions.push_back(info.id);
  }
  const size_t n_engine = all.size();
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<uint32_t> pick(0, bg_banks_ - 1);
  if (cc_.core_rate > 0 && coin(rng_) < cc_.core_rate) all.push_back({engine_ports_, bg_bank_base_ + pick(rng_)});
  if (cc_.dma_rate > 0 && coin(rng_) < cc_.dma_rate) all.push_back({engine_ports_ + 1, bg_bank_base_ + pick(rng_)});
  scratch_grant_.resize(all.size());
  arbiter_.arbitrate(all, scratch_grant_);

  for (size_t i = 0; i < n_engine; ++i) {
    grant[i] = scratch_grant_[i];
    ++stats_.engine_requests;
    if (!grant[i]) continue;
    ++stats_.engine_grants;
    if (regions[i] == Region::SharedSram) {
      ++stats_.sram_accesses;
    } else {
      ++stats_.scm_accesses;
    }
    if (trace_on_) trace_.push_back({cycle_, reqs[i].port, regions[i], reqs[i].addr, reqs[i].write});
  }
  for (size_t i = n_engine; i < all.size(); ++i) {
    ++stats_.background_requests;
    if (scratch_grant_[i]) ++stats_.background_grants;
  }
  ++cycle_;
}

DmaResult dma_transfer(const MemoryMap& map, Region src, Region dst, uint64_t bits, const energy::OperatingPoint& op,
                       const energy::EnergyCoefficients& c) {
  DmaResult r;
  if (bits == 0) return r;
  const auto& d = map.region(dst);
  map.region(src);
  if ((bits + 7) / 8 > d.size)
    throw CapacityError("DMA payload of " + std::to_string((bits + 7) / 8) + " bytes exceeds " + to_string(dst));
  if ((src == Region::SharedSram || dst == Region::SharedSram) && !map.sram_powered)
    throw MemoryError("DMA through powered-off SRAM");
  if (src == Region::HyperRam || dst == Region::HyperRam) {
    r.seconds = static_cast<double>(bits) / energy::kHyperRamBitsPerSecond;
    r.trace.hyperram_bits = bits;
  } else {
    r.seconds = static_cast<double>((bits + 31) / 32) / op.freq_hz;
    if (src == Region::SharedSram && dst == Region::SharedScm) {
      r.trace.marshal_bits = bits;
    } else {
      r.trace.dma_onchip_bits = bits;
    }
  }
  r.energy_j = energy::account_energy(r.trace, c, op).total();
  return r;
}

}  // namespace xne::mem
