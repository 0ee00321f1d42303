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

// Maps layers and networks onto XNE jobs, runs them functionally or as
// timing-only simulations, and aggregates performance/energy reports.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xne/energy.hpp"
#include "xne/engine.hpp"
#include "xne/golden.hpp"
#include "xne/memory.hpp"

namespace xne::runner {

inline constexpr uint32_t kGlobalPool = 0xFFFFFFFFu;
inline constexpr uint64_t kActivationBudgetBytes = 128 * mem::KiB;

struct TensorShape {
  uint32_t c = 0, h = 0, w = 0;

  uint64_t compact_bytes() const { return (uint64_t{c} * h * w + 7) / 8; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct LayerDesc {
  std::string name;
  LayerSpec spec;
  int input = -1;         // producing layer; -1 is the previous layer (network input for layer 0)
  int shortcut = -1;      // layer whose output is added to this one's output
  uint32_t pool = 0;      // 0 none, 2 for 2x2, kGlobalPool
  uint32_t stride = 1;    // input pre-strided by this factor
  uint32_t im2col = 0;    // kernel size when the input is expanded by the core (im2col)
  uint32_t shift = 0;     // threshold shift

  TensorShape output_before_pool() const { return {spec.nof, spec.h_out, spec.w_out}; }
  TensorShape output() const;
};

struct NetworkDescriptor {
  std::string name;
  TensorShape input;
  std::vector<LayerDesc> layers;

  // Shape compatibility of every layer with its producer and shortcut.
  void validate() const;
  TensorShape input_of(size_t i) const;
  uint64_t ops() const;
  uint64_t weight_bits() const;
  uint64_t weight_bytes() const { return (weight_bits() + 7) / 8; }
  uint64_t largest_layer_weight_bytes() const;
  // Peak of simultaneously live activation buffers, shortcuts and pooling included.
  uint64_t peak_activation_bytes() const;

  static NetworkDescriptor from_json(const std::string& text);
  std::string to_json() const;
};

// d: group-width divisor, a power of two in [1, 64]; 0 selects the fully
// depthwise variant (one input per output).
NetworkDescriptor make_mvgg(uint32_t d);
NetworkDescriptor make_resnet(uint32_t depth);
// resnet18, resnet34, mvgg-<d> with d in 1..64 or F.
NetworkDescriptor builtin_network(const std::string& name);
std::vector<std::string> builtin_network_names();

struct Placement {
  mem::Region region = mem::Region::SharedSram;
  uint64_t addr = 0;
  uint64_t bytes = 0;
};

struct DmaEntry {
  std::string what;
  mem::Region src = mem::Region::HyperRam;
  mem::Region dst = mem::Region::SharedSram;
  uint64_t bits = 0;
};

// Jobs carry pointers relative to their buffers (weights, thresholds,
// input, output all start at 0) until place() rebases them.
struct TilePlan {
  LayerSpec spec;
  uint32_t tp = 128;
  uint32_t n_in_tiles = 0;   // ceil(nif / TP)
  uint32_t n_out_tiles = 0;  // output tiles of at most max_out_lanes lanes
  uint32_t out_tile_lanes = 0;
  uint32_t weight_vec_bits = 0;
  std::vector<uint32_t> in_tile_valid;   // valid input lanes per input tile
  std::vector<uint32_t> out_tile_valid;  // valid output lanes per output tile
  std::vector<engine::JobDescriptor> jobs;
  std::vector<uint64_t> job_weight_offset;  // byte offset of each job's section
  uint64_t weight_stream_bytes = 0;
  uint64_t threshold_bytes = 0;
  Placement input, output, weights, thresholds;
  std::vector<DmaEntry> dma;

  void place(const Placement& in, const Placement& out, const Placement& w, const Placement& th);
};

// max_out_lanes 0 means TP. Grouped layers use one job for all full output
// tiles when the input-tile window is uniform, else one job per tile.
TilePlan plan_layer(const LayerSpec& spec, uint32_t tp, uint32_t max_out_lanes = 0);
// Stream layout per job: k_out_major, u_i, u_j, k_in_major, then one vector per lane.
std::vector<uint8_t> pack_weights(const TilePlan& plan, const WeightTensor& w);
// One hardware byte per output channel, in channel order.
std::vector<uint8_t> pack_thresholds(const ThresholdSpec& th);

// Thresholds near the middle of the accumulator range with the smallest
// shift that represents n_acc.
ThresholdSpec random_thresholds(uint32_t nof, uint32_t n_acc, std::mt19937_64& rng);
uint32_t minimal_shift(uint32_t n_acc);

struct LayerRunResult {
  BinaryTensor output;
  engine::EngineStats stats;
  uint64_t cycles = 0;
};

struct RunConfig {
  uint32_t tp = 128;
  engine::EngineTiming timing;
  mem::ContentionConfig contention;
  energy::EnergyCoefficients coeffs;
  bool saturate = true;
  uint32_t sim_rows = 1;  // output rows simulated per layer by run_network
  bool trace = false;
};

// Functional execution of one layer on the cycle model.
LayerRunResult run_layer(const LayerSpec& spec, const BinaryTensor& x, const WeightTensor& w, const ThresholdSpec& th,
                         const RunConfig& cfg = {}, std::vector<mem::TraceEntry>* trace = nullptr);
// Timing-only cycle count of a layer; mode decides which memory holds the buffers.
engine::EngineStats simulate_layer_timing(const LayerSpec& spec, const RunConfig& cfg,
                                          energy::MemoryMode mode = energy::MemoryMode::Sram,
                                          uint32_t max_out_lanes = 0);

struct LayerReport {
  std::string name;
  LayerSpec spec;
  uint64_t ops = 0;
  uint64_t weight_bits = 0;
  uint64_t compute_cycles = 0;
  uint64_t fetch_cycles = 0;    // DMA work in this layer's window
  uint64_t exposed_cycles = 0;  // fetch time not hidden by compute
  uint64_t cycles = 0;
  bool memory_bound = false;
  bool marshaled = false;
  energy::EnergyTrace trace;
  energy::EnergyReport energy;
};

struct ExecutionReport {
  std::string network;
  std::string op_point;
  uint32_t tp = 0;
  double freq_hz = 0;
  std::vector<LayerReport> layers;
  uint64_t total_cycles = 0;
  uint64_t compute_cycles = 0;
  uint64_t total_ops = 0;
  uint64_t sram_bits = 0, scm_bits = 0, hyperram_bits = 0, marshal_bits = 0;
  uint64_t weight_bytes = 0;
  uint64_t peak_activation_bytes = 0;
  energy::EnergyReport energy;

  double op_per_cycle() const {
    return compute_cycles ? static_cast<double>(total_ops) / static_cast<double>(compute_cycles) : 0;
  }
  double seconds_per_frame() const { return freq_hz > 0 ? static_cast<double>(total_cycles) / freq_hz : 0; }
  double fps() const { return total_cycles ? 1.0 / seconds_per_frame() : 0; }
  double mj_per_frame() const { return energy.total() * 1e3; }

  void write_text(std::ostream& os) const;
  // Columns: layer,kind,nif,nof,fs,h_out,w_out,group,ops,compute_cycles,fetch_cycles,
  // exposed_cycles,cycles,bound,weight_bits,marshaled,energy_uj; last row "total".
  void write_csv(std::ostream& os) const;
};

// CapacityError when weights or activations do not fit the mode's memories.
ExecutionReport run_network(const NetworkDescriptor& nd, const energy::OperatingPoint& op, const RunConfig& cfg = {});

// Cheapest usage mode the network fits: scm-0v4, then marshal-0v6, then hyperram.
std::string select_mode(const NetworkDescriptor& nd, const mem::MemoryMap& map = mem::MemoryMap::defaults());

struct VerifyOptions {
  RunConfig run;
  int corrupt_threshold_channel = -1;  // flips sign(lambda) of this channel in the engine's copy
};

struct VerifyResult {
  bool passed = true;
  int layer = -1;
  uint32_t c = 0, h = 0, w = 0;  // first differing output bit
  uint64_t mismatches = 0;
  std::string message;
};

// Golden vs engine on random inputs, weights and thresholds. Layers chain
// when shapes allow, otherwise each gets a fresh random input.
VerifyResult verify_against_golden(const NetworkDescriptor& nd, uint64_t seed, const VerifyOptions& opt = {});
// Random small network (1-3 layers) from the property-test distribution.
NetworkDescriptor random_network(std::mt19937_64& rng, uint32_t max_layers = 3);

}  // namespace xne::runner
