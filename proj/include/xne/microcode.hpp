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

// XNE microcode: two imperative instructions (ADD, MV) over 4 R/W and 16 R/O
// registers, plus up to six declarative LOOP records (innermost first).
//
// Bitstream: 22 imperative bytes followed by 6 declarative bytes.
//   instruction byte: [7] opcode (0 = MV, 1 = ADD) | [6:5] dst | [4:0] src
//   loop byte:        [7:4] base | [3:0] count
// Loop range sources and the loop count live in the UCODE_RANGES register:
//   [23:0] six 4-bit R/O indices (loop k at bits 4k+3..4k) | [26:24] loops

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace xne::ucode {

inline constexpr unsigned kNumRW = 4;
inline constexpr unsigned kNumRO = 16;
inline constexpr unsigned kNumRegs = kNumRW + kNumRO;
inline constexpr unsigned kMaxLoops = 6;
inline constexpr unsigned kImperativeBytes = 22;
inline constexpr unsigned kDeclarativeBytes = 6;
inline constexpr unsigned kCodeBytes = kImperativeBytes + kDeclarativeBytes;
inline constexpr unsigned kMaxLoopInstructions = 15;

enum class Opcode : uint8_t { MV = 0, ADD = 1 };

// R/W registers.
enum RW : uint8_t { W = 0, X = 1, Y = 2, X_MAJOR = 3 };

// R/O register slots used by the reference program. Values are derived by
// the register-file model when a job is offloaded.
enum RO : uint8_t {
  TPsquare = 0,      // weight block bytes (out lanes * weight vector bytes)
  TP = 1,            // bytes of one TP-lane tile
  NIF = 2,           // input pixel stride in bytes
  NOF = 3,           // y step at an output-pixel advance
  W_X_NIF = 4,       // x_major step at a filter-row advance
  OW_X_NOF = 5,      // x_major step at an output-tile advance
  ZERO = 6,
  J_STEP = 7,        // x_major step at an output-column advance
  I_EXTRA = 8,       // extra x_major step at an output-row advance
  N_IN_TILES = 9,
  FS = 10,
  N_OUT_TILES = 11,
  W_OUT = 12,
  H_OUT = 13,
};

struct MicroInstruction {
  Opcode op = Opcode::MV;
  uint8_t dst = 0;  // < 4
  uint8_t src = 0;  // < 20; 0..3 R/W, 4..19 R/O

  friend bool operator==(const MicroInstruction&, const MicroInstruction&) = default;
};

struct LoopRecord {
  uint8_t range_source = 0;  // R/O index holding the iteration count
  uint8_t base = 0;
  uint8_t count = 0;

  friend bool operator==(const LoopRecord&, const LoopRecord&) = default;
};

struct MicrocodeProgram {
  std::vector<MicroInstruction> instructions;
  std::vector<LoopRecord> loops;  // innermost first

  // Throws UsageError on structural violations, CapacityError on budget overflow.
  void validate() const;
  // Instruction list padded with zero bytes (MV W, W) up to the 22 slots.
  MicrocodeProgram normalized() const;

  friend bool operator==(const MicrocodeProgram&, const MicrocodeProgram&) = default;
};

struct MicrocodeImage {
  std::array<uint8_t, kCodeBytes> code{};
  uint32_t range_bindings = 0;

  // Register-file image of the generic microcode section: 28 code bytes
  // followed by UCODE_RANGES, little endian (32 bytes).
  std::vector<uint8_t> register_image() const;
};

const std::map<std::string, unsigned>& default_mnemonics();

MicrocodeProgram parse_program(const std::string& text);
std::string format_program(const MicrocodeProgram& p);
MicrocodeImage assemble(const MicrocodeProgram& p);
// Accepts a bare 28-byte code section (six loops, bindings 0) or the 32-byte
// register image.
MicrocodeProgram disassemble(std::span<const uint8_t> bytes);
MicrocodeProgram disassemble(const MicrocodeImage& image);

// Six-loop conv program (17 instructions).
const std::string& reference_program_text();
const MicrocodeProgram& reference_program();

// Loop nest geometry from which the R/O values of the reference program are derived.
struct LoopGeometry {
  uint32_t tile_bytes = 16;     // TP / 8
  uint32_t block_bytes = 0;     // weight bytes per (k_out_major, u_i, u_j, k_in_major)
  uint32_t pix_in = 0;          // input pixel stride, bytes
  uint32_t pix_out = 0;         // output pixel stride, bytes
  uint32_t w_in = 1;
  uint32_t fs = 1;
  uint32_t h_out = 1, w_out = 1;
  uint32_t n_in_tiles = 1, n_out_tiles = 1;
  uint32_t in_tile_stride = 0;  // input tiles skipped per output tile (grouped layers)
};

std::array<uint32_t, kNumRO> reference_ro_values(const LoopGeometry& g);

struct UcodeState {
  std::array<uint32_t, kNumRW> rw{};
  std::array<uint32_t, kNumRO> ro{};
  std::array<uint32_t, kMaxLoops> counter{};
  int level = -1;           // loop whose instructions are executing, -1 when idle
  uint32_t index = 0;       // next instruction within that loop
  bool done = false;        // iteration space exhausted
  bool boundary = false;    // last step completed an iteration update
  uint64_t cycles = 0;
  uint64_t executed = 0;

  uint32_t reg(unsigned idx) const { return idx < kNumRW ? rw[idx] : ro[idx - kNumRW]; }
  bool busy() const { return level >= 0; }
};

UcodeState ucode_init(const MicrocodeProgram& p, const std::array<uint32_t, kNumRO>& ro);
// One simulated cycle. From idle, advances the loop counters and executes the
// first instruction of the loop that advanced; otherwise the next one.
UcodeState ucode_step(UcodeState s, const MicrocodeProgram& p);

struct IterationOffsets {
  uint32_t w = 0, x = 0, y = 0;
  std::array<uint32_t, kMaxLoops> counter{};

  friend bool operator==(const IterationOffsets&, const IterationOffsets&) = default;
};

IterationOffsets current_offsets(const UcodeState& s);
std::vector<IterationOffsets> run_to_completion(UcodeState s, const MicrocodeProgram& p);

}  // namespace xne::ucode
