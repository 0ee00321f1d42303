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

// Cycle-approximate XNE model: controller FSM, double-buffered register
// file, streamer (two sources, one sink) and the XNOR/popcount datapath with
// TP saturating 16-bit accumulators.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xne/memory.hpp"
#include "xne/microcode.hpp"

namespace xne::engine {

// One offload. Output tiles within a job are uniform: either all TP lanes
// wide or a single remainder tile.
struct JobDescriptor {
  uint32_t weight_ptr = 0;
  uint32_t threshold_ptr = 0;
  uint32_t input_ptr = 0;   // channel in_tile_base * TP of input pixel (0, 0)
  uint32_t output_ptr = 0;  // channel out_channel_base of output pixel (0, 0)
  uint32_t nif = 0;         // input channels of the whole layer
  uint32_t in_tile_base = 0;
  uint32_t n_in_tiles = 1;
  uint32_t in_tile_stride = 0;  // input tiles skipped per output tile
  uint32_t n_out_tiles = 1;
  uint32_t out_lanes = 0;       // valid lanes per output tile
  uint32_t out_channel_base = 0;
  uint32_t weight_vec_bits = 32;
  uint32_t fs = 1;
  uint32_t h_out = 1, w_out = 1, w_in = 1;
  uint32_t pix_in = 4, pix_out = 4;  // bytes per pixel
  uint32_t group = 0;                // 0 dense; else inputs per output (band width)
  uint32_t shift = 0;

  void validate(uint32_t tp) const;
  bool empty() const { return out_lanes == 0 || n_in_tiles == 0 || n_out_tiles == 0 || fs == 0 || h_out == 0 || w_out == 0; }
  ucode::LoopGeometry geometry(uint32_t tp) const;
  friend bool operator==(const JobDescriptor&, const JobDescriptor&) = default;
};

// Job-dependent register map. Offsets are bytes within one job set; every
// register is 32 bits wide.
//
//   0x00 WEIGHT_PTR     0x04 THRESHOLD_PTR  0x08 INPUT_PTR      0x0C OUTPUT_PTR
//   0x10 NIF            0x14 IN_TILE_BASE   0x18 N_IN_TILES     0x1C IN_TILE_STRIDE
//   0x20 N_OUT_TILES    0x24 OUT_LANES      0x28 OUT_CH_BASE    0x2C WEIGHT_VEC_BITS
//   0x30 FS             0x34 H_OUT          0x38 W_OUT          0x3C W_IN
//   0x40 PIX_IN         0x44 PIX_OUT        0x48 GROUP          0x4C SHIFT
//
// Generic registers: 0x00..0x1B microcode bytes, 0x1C UCODE_RANGES, 0x20 TP.
struct RegisterField {
  const char* name;
  uint32_t offset;
  uint32_t JobDescriptor::*field;
};
std::span<const RegisterField> job_register_map();
inline constexpr uint32_t kJobSetBytes = 0x50;

std::array<uint32_t, kJobSetBytes / 4> encode_job(const JobDescriptor& jd);
JobDescriptor decode_job(std::span<const uint32_t> regs);

class RegisterFile {
 public:
  explicit RegisterFile(uint32_t tp = 128, const ucode::MicrocodeProgram& program = ucode::reference_program());

  void load_microcode(const ucode::MicrocodeProgram& program);
  const ucode::MicrocodeProgram& program() const { return program_; }
  std::span<const uint8_t> generic_image() const { return generic_; }
  uint32_t tp() const { return tp_; }

  // Writes jd into the free set. BusyError when both sets are occupied.
  void offload(const JobDescriptor& jd);
  bool has_active() const { return active_.has_value(); }
  bool has_pending() const { return pending_.has_value(); }
  const JobDescriptor& active() const;
  // Shadow becomes active. Only legal while no job is active.
  bool promote();
  void retire();

 private:
  uint32_t tp_;
  ucode::MicrocodeProgram program_;
  std::vector<uint8_t> generic_;
  std::optional<JobDescriptor> active_;
  std::optional<JobDescriptor> pending_;
};

// Saturating (or, for fault injection, wrapping) datapath primitive:
// acc + popcount(~(feature ^ weight) & mask).
uint16_t datapath_accumulate(std::span<const uint32_t> feature, std::span<const uint32_t> weight,
                             std::span<const uint32_t> mask, uint16_t acc, bool saturate = true);

// Bit k = threshold comparison of acc[k] against the packed byte th[k];
// lanes >= valid_lanes are 0.
std::vector<uint32_t> threshold_binarize(std::span<const uint16_t> acc, std::span<const uint8_t> th, uint32_t shift,
                                         uint32_t valid_lanes);

enum class Phase { Idle, Setup, FeatureLoad, Accumulate, Threshold, Drain };
const char* to_string(Phase p);

// Cycle overheads of the controller FSM; memory latency is in cycles.
struct EngineTiming {
  uint32_t mem_latency = 1;
  uint32_t job_setup = 4;
  uint32_t feature_setup = 12;
  uint32_t threshold_setup = 6;
};

struct EngineConfig {
  uint32_t tp = 128;
  EngineTiming timing;
  mem::ContentionConfig contention;
  uint32_t sram_banks = 16;
  bool saturate = true;
  // Timing-only runs skip the datapath and fold addresses into the target
  // region, so buffers larger than the on-chip memories can be modeled.
  bool functional = true;

  void validate() const;
};

struct EngineStats {
  uint64_t cycles = 0;
  uint64_t busy_cycles = 0;
  uint64_t accumulate_cycles = 0;
  uint64_t weight_stall_cycles = 0;
  uint64_t feature_stall_cycles = 0;
  uint64_t threshold_stall_cycles = 0;
  uint64_t sink_stall_cycles = 0;
  uint64_t ops = 0;  // 2 per valid (masked-in) xnor position
  uint64_t jobs_completed = 0;
  uint64_t feature_vectors = 0;
  uint64_t weight_vectors = 0;
  uint64_t output_vectors = 0;
  uint32_t max_accumulator = 0;
  mem::AccessStats memory;

  double ops_per_cycle() const { return busy_cycles ? static_cast<double>(ops) / static_cast<double>(busy_cycles) : 0; }
};

class Engine {
 public:
  // memory may be null for timing-only configurations.
  Engine(EngineConfig cfg, mem::Memory* memory, mem::MemoryMap map = mem::MemoryMap::defaults());

  RegisterFile& registers() { return rf_; }
  const EngineConfig& config() const { return cfg_; }

  // BusyError when active and shadow sets are both occupied.
  void offload(const JobDescriptor& jd);
  bool idle() const { return phase_ == Phase::Idle && !rf_.has_pending() && !rf_.has_active(); }

  void step();
  // Steps until idle; returns cycles spent. Throws Error when max_cycles elapse.
  uint64_t run_until_idle(uint64_t max_cycles = uint64_t{1} << 40);

  // True iff the last step retired a job.
  bool end_of_job() const { return eoj_; }
  void on_end_of_job(std::function<void(uint64_t cycle)> cb) { eoj_cb_ = std::move(cb); }
  // Back-pressure hook: while it returns true the sink accepts nothing.
  void set_sink_blocked(std::function<bool(uint64_t cycle)> f) { sink_blocked_ = std::move(f); }

  Phase phase() const { return phase_; }
  uint64_t cycle() const { return cycle_; }
  std::span<const uint16_t> accumulators() const { return acc_; }
  uint32_t output_fifo_size() const { return static_cast<uint32_t>(out_fifo_.size()); }
  EngineStats stats() const;
  void enable_trace(bool on) { ic_.enable_trace(on); }
  const std::vector<mem::TraceEntry>& trace() const { return ic_.trace(); }

  static constexpr uint32_t kInputFifoDepth = 2;
  static constexpr uint32_t kWeightFifoDepth = 4;
  static constexpr uint32_t kOutputFifoDepth = 2;

 private:
  struct Transfer {
    uint64_t addr = 0;  // first byte
    uint32_t bits = 0;
    std::vector<uint64_t> words;
    std::vector<uint32_t> data;
    std::vector<uint8_t> granted;
    uint32_t remaining = 0;
    uint64_t ready = 0;  // cycle at which the data is usable
  };
  struct OutputVector {
    uint64_t addr = 0;
    std::vector<uint32_t> bits;
    uint32_t lanes = 0;
  };
  enum class Channel { None, Feature, Weight, Threshold, Sink };

  void start_job();
  void finish_job();
  void capture_iteration();
  void controller();
  void streamer();
  void ucode_tick();
  bool window_end() const;
  void build_masks();
  void prepare(Transfer& t, uint64_t addr, uint32_t bits) const;
  uint64_t fold(uint64_t addr) const;
  void issue(Transfer& t, bool write);
  std::vector<uint32_t> payload(const Transfer& t) const;

  EngineConfig cfg_;
  mem::Memory* memory_;
  mem::Interconnect ic_;
  RegisterFile rf_;
  uint32_t ports_;
  uint32_t tp_words_;

  Phase phase_ = Phase::Idle;
  JobDescriptor job_;
  ucode::UcodeState us_;
  bool ucode_run_ = false;
  ucode::IterationOffsets it_;
  bool last_iteration_ = false;
  uint32_t countdown_ = 0;
  uint32_t lane_ = 0;
  bool feature_ready_ = false;

  // Source-side streams for the current iteration.
  std::optional<Transfer> feature_fetch_;
  std::vector<Transfer> feature_fifo_;
  uint32_t weights_to_issue_ = 0;
  uint32_t weights_issued_ = 0;
  std::optional<Transfer> weight_fetch_;
  std::vector<Transfer> weight_fifo_;
  bool threshold_wanted_ = false;
  std::optional<Transfer> threshold_fetch_;
  std::optional<Transfer> threshold_buf_;
  std::vector<OutputVector> out_fifo_;
  std::optional<Transfer> sink_write_;

  std::vector<uint32_t> feature_;
  std::vector<uint16_t> acc_;
  std::vector<uint32_t> masks_;  // out_lanes x tp_words
  bool uniform_mask_ = true;

  uint64_t cycle_ = 0;
  bool eoj_ = false;
  std::function<void(uint64_t)> eoj_cb_;
  std::function<bool(uint64_t)> sink_blocked_;
  EngineStats stats_;
  std::vector<mem::PortRequest> req_;
  std::vector<uint8_t> grant_;
};

}  // namespace xne::engine
