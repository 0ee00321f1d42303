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
#include "xne/microcode.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <sstream>

#include "xne/error.hpp"

namespace xne::ucode {

namespace {

constexpr uint8_t kOpcodeBit = 0x80;

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

unsigned resolve(const std::map<std::string, unsigned>& names, const YAML::Node& n) {
  if (!n || !n.IsScalar()) throw ParseError("expected a register name", line_of(n));
  const auto s = n.as<std::string>();
  if (auto it = names.find(s); it != names.end()) return it->second;
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    const unsigned v = static_cast<unsigned>(std::stoul(s));
    if (v < kNumRegs) return v;
  }
  throw ParseError("undefined register '" + s + "'", line_of(n));
}

}  // namespace

const std::map<std::string, unsigned>& default_mnemonics() {
  static const std::map<std::string, unsigned> m = {
      {"W", 0},         {"x", 1},         {"y", 2},       {"x_major", 3},      {"TPsquare", 4},
      {"TP", 5},        {"nif", 6},       {"nof", 7},     {"w_X_nif", 8},      {"ow_X_nof", 9},
      {"zero", 10},     {"j_step", 11},   {"i_extra", 12}, {"n_in_tiles", 13}, {"fs", 14},
      {"n_out_tiles", 15}, {"w_out", 16}, {"h_out", 17},  {"ro14", 18},        {"ro15", 19},
  };
  return m;
}

void MicrocodeProgram::validate() const {
  if (instructions.size() > kImperativeBytes)
    throw CapacityError("program has " + std::to_string(instructions.size()) + " imperative instructions (max " +
                        std::to_string(kImperativeBytes) + ")");
  if (loops.size() > kMaxLoops)
    throw CapacityError("program has " + std::to_string(loops.size()) + " loops (max 6)");
  for (const auto& ins : instructions) {
    if (ins.dst >= kNumRW) throw UsageError("instruction destination must be an R/W register");
    if (ins.src >= kNumRegs) throw UsageError("instruction source out of range");
  }
  for (const auto& l : loops) {
    if (l.range_source >= kNumRO) throw UsageError("loop range source must be an R/O register");
    if (l.count > kMaxLoopInstructions || l.base > 15) throw CapacityError("loop record field overflow");
    if (l.count > 0 && size_t{l.base} + l.count > instructions.size())
      throw UsageError("loop references instructions past the end of the program");
  }
}

MicrocodeProgram MicrocodeProgram::normalized() const {
  MicrocodeProgram p = *this;
  p.instructions.resize(std::max<size_t>(p.instructions.size(), kImperativeBytes));
  return p;
}

std::vector<uint8_t> MicrocodeImage::register_image() const {
  std::vector<uint8_t> out(code.begin(), code.end());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<uint8_t>(range_bindings >> (8 * b)));
  return out;
}

MicrocodeProgram parse_program(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0);
  }
  MicrocodeProgram p;
  if (!root || root.IsNull()) return p;
  if (!root.IsMap()) throw ParseError("microcode source must be a mapping", line_of(root));

  auto names = default_mnemonics();
  if (auto m = root["mnemonics"]) {
    if (!m.IsMap()) throw ParseError("'mnemonics' must be a mapping", line_of(m));
    for (const auto& kv : m) {
      unsigned idx = 0;
      try {
        idx = kv.second.as<unsigned>();
      } catch (const YAML::Exception&) {
        throw ParseError("mnemonic index must be an integer", line_of(kv.second));
      }
      if (idx >= kNumRegs) throw ParseError("mnemonic index out of range", line_of(kv.second));
      names[kv.first.as<std::string>()] = idx;
    }
  }

  std::map<std::string, size_t> labels;
  if (auto code = root["code"]) {
    if (!code.IsSequence()) throw ParseError("'code' must be a list", line_of(code));
    for (const auto& e : code) {
      if (!e.IsMap()) throw ParseError("code entry must be a mapping", line_of(e));
      if (!e["op"]) throw ParseError("code entry missing 'op'", line_of(e));
      MicroInstruction ins;
      const auto op = lower(e["op"].as<std::string>());
      if (op == "add") {
        ins.op = Opcode::ADD;
      } else if (op == "mv") {
        ins.op = Opcode::MV;
      } else {
        throw ParseError("unknown opcode '" + op + "'", line_of(e["op"]));
      }
      const unsigned dst = resolve(names, e["dst"]);
      if (dst >= kNumRW) throw ParseError("destination must be an R/W register", line_of(e["dst"]));
      ins.dst = static_cast<uint8_t>(dst);
      ins.src = static_cast<uint8_t>(resolve(names, e["src"]));
      if (auto l = e["label"]) {
        const auto name = l.as<std::string>();
        if (!labels.emplace(name, p.instructions.size()).second)
          throw ParseError("duplicate label '" + name + "'", line_of(l));
      }
      p.instructions.push_back(ins);
    }
  }

  if (auto loops = root["loops"]) {
    if (!loops.IsSequence()) throw ParseError("'loops' must be a list", line_of(loops));
    if (loops.size() > kMaxLoops)
      throw ParseError("at most 6 loops are supported, got " + std::to_string(loops.size()), line_of(loops));
    for (const auto& e : loops) {
      if (!e.IsMap()) throw ParseError("loop entry must be a mapping", line_of(e));
      LoopRecord rec;
      const unsigned r = resolve(names, e["range"]);
      if (r < kNumRW) throw ParseError("loop range must be an R/O register", line_of(e["range"]));
      rec.range_source = static_cast<uint8_t>(r - kNumRW);
      if (auto ins = e["instructions"]) {
        if (!ins.IsSequence()) throw ParseError("'instructions' must be a list", line_of(ins));
        std::vector<size_t> idx;
        for (const auto& n : ins) {
          const auto name = n.as<std::string>();
          auto it = labels.find(name);
          if (it == labels.end()) throw ParseError("unknown instruction label '" + name + "'", line_of(n));
          idx.push_back(it->second);
        }
        for (size_t k = 1; k < idx.size(); ++k)
          if (idx[k] != idx[k - 1] + 1)
            throw ParseError("loop instructions must be contiguous in code order", line_of(ins));
        if (!idx.empty()) {
          if (idx.front() > 15 || idx.size() > kMaxLoopInstructions)
            throw ParseError("loop does not fit the 4-bit base/count encoding", line_of(ins));
          rec.base = static_cast<uint8_t>(idx.front());
          rec.count = static_cast<uint8_t>(idx.size());
        }
      }
      p.loops.push_back(rec);
    }
  }
  return p;
}

std::string format_program(const MicrocodeProgram& p) {
  std::vector<std::string> name(kNumRegs);
  for (const auto& [n, idx] : default_mnemonics()) name[idx] = n;
  std::ostringstream os;
  os << "mnemonics:\n";
  for (unsigned i = 0; i < kNumRegs; ++i) os << "  " << name[i] << ": " << i << "\n";
  os << "code:\n";
  if (p.instructions.empty()) os << "  []\n";
  for (size_t i = 0; i < p.instructions.size(); ++i) {
    const auto& ins = p.instructions[i];
    os << "  - {label: i" << i << ", op: " << (ins.op == Opcode::ADD ? "add" : "mv") << ", dst: " << name[ins.dst]
       << ", src: " << name[ins.src] << "}\n";
  }
  os << "loops:\n";
  if (p.loops.empty()) os << "  []\n";
  for (const auto& l : p.loops) {
    os << "  - {range: " << name[l.range_source + kNumRW] << ", instructions: [";
    for (unsigned k = 0; k < l.count; ++k) os << (k ? ", " : "") << "i" << (l.base + k);
    os << "]}\n";
  }
  return os.str();
}

MicrocodeImage assemble(const MicrocodeProgram& p) {
  p.validate();
  MicrocodeImage img;
  for (size_t i = 0; i < p.instructions.size(); ++i) {
    const auto& ins = p.instructions[i];
    img.code[i] = static_cast<uint8_t>((ins.op == Opcode::ADD ? kOpcodeBit : 0) | (ins.dst << 5) | ins.src);
  }
  for (size_t k = 0; k < p.loops.size(); ++k) {
    const auto& l = p.loops[k];
    img.code[kImperativeBytes + k] = static_cast<uint8_t>((l.base << 4) | l.count);
    img.range_bindings |= uint32_t{l.range_source} << (4 * k);
  }
  img.range_bindings |= static_cast<uint32_t>(p.loops.size()) << 24;
  return img;
}

MicrocodeProgram disassemble(std::span<const uint8_t> bytes) {
  if (bytes.size() != kCodeBytes && bytes.size() != kCodeBytes + 4)
    throw DecodeError("microcode image must be 28 or 32 bytes, got " + std::to_string(bytes.size()));
  MicrocodeImage img;
  std::copy_n(bytes.begin(), kCodeBytes, img.code.begin());
  if (bytes.size() == kCodeBytes + 4) {
    for (int b = 0; b < 4; ++b) img.range_bindings |= uint32_t{bytes[kCodeBytes + b]} << (8 * b);
  } else {
    img.range_bindings = uint32_t{kMaxLoops} << 24;
  }
  return disassemble(img);
}

MicrocodeProgram disassemble(const MicrocodeImage& img) {
  MicrocodeProgram p;
  for (unsigned i = 0; i < kImperativeBytes; ++i) {
    const uint8_t b = img.code[i];
    MicroInstruction ins;
    ins.op = (b & kOpcodeBit) ? Opcode::ADD : Opcode::MV;
    ins.dst = static_cast<uint8_t>((b >> 5) & 0x3);
    ins.src = static_cast<uint8_t>(b & 0x1F);
    if (ins.src >= kNumRegs) throw DecodeError("instruction " + std::to_string(i) + ": source register out of range");
    p.instructions.push_back(ins);
  }
  if (img.range_bindings >> 27) throw DecodeError("reserved bits set in UCODE_RANGES");
  const uint32_t nloops = (img.range_bindings >> 24) & 0x7;
  if (nloops > kMaxLoops) throw DecodeError("loop count exceeds 6");
  for (unsigned k = 0; k < nloops; ++k) {
    const uint8_t b = img.code[kImperativeBytes + k];
    LoopRecord l;
    l.base = static_cast<uint8_t>(b >> 4);
    l.count = static_cast<uint8_t>(b & 0xF);
    l.range_source = static_cast<uint8_t>((img.range_bindings >> (4 * k)) & 0xF);
    if (l.count > 0 && l.base + l.count > kImperativeBytes)
      throw DecodeError("loop " + std::to_string(k) + " references instructions past slot 22");
    p.loops.push_back(l);
  }
  for (unsigned k = nloops; k < kMaxLoops; ++k)
    if (img.code[kImperativeBytes + k] != 0) throw DecodeError("unused loop slot is not zero");
  return p;
}

const std::string& reference_program_text() {
  static const std::string text = R"(# Six-loop microcode for the reordered conv layer nest
# (h_out, w_out, k_out_major, u_i, u_j, k_in_major; innermost first below).
mnemonics:
  W: 0
  x: 1
  y: 2
  x_major: 3
  TPsquare: 4
  TP: 5
  nif: 6
  nof: 7
  w_X_nif: 8
  ow_X_nof: 9
  zero: 10
  j_step: 11
  i_extra: 12
  n_in_tiles: 13
  fs: 14
  n_out_tiles: 15
  w_out: 16
  h_out: 17
code:
  - {label: kin_w, op: add, dst: W,       src: TPsquare}
  - {label: kin_x, op: add, dst: x,       src: TP}
  - {label: fj_w,  op: add, dst: W,       src: TPsquare}
  - {label: fj_xm, op: add, dst: x_major, src: nif}
  - {label: fj_x,  op: mv,  dst: x,       src: x_major}
  - {label: fi_w,  op: add, dst: W,       src: TPsquare}
  - {label: fi_xm, op: add, dst: x_major, src: w_X_nif}
  - {label: fi_x,  op: mv,  dst: x,       src: x_major}
  - {label: ko_w,  op: add, dst: W,       src: TPsquare}
  - {label: ko_xm, op: add, dst: x_major, src: ow_X_nof}
  - {label: ko_y,  op: add, dst: y,       src: TP}
  - {label: ko_x,  op: mv,  dst: x,       src: x_major}
  - {label: i_xm,  op: add, dst: x_major, src: i_extra}
  - {label: j_w,   op: mv,  dst: W,       src: zero}
  - {label: j_xm,  op: add, dst: x_major, src: j_step}
  - {label: j_y,   op: add, dst: y,       src: nof}
  - {label: j_x,   op: mv,  dst: x,       src: x_major}
loops:
  - {range: n_in_tiles,  instructions: [kin_w, kin_x]}
  - {range: fs,          instructions: [fj_w, fj_xm, fj_x]}
  - {range: fs,          instructions: [fi_w, fi_xm, fi_x]}
  - {range: n_out_tiles, instructions: [ko_w, ko_xm, ko_y, ko_x]}
  - {range: w_out,       instructions: [j_w, j_xm, j_y, j_x]}
  # the row advance shares the column-advance block
  - {range: h_out,       instructions: [i_xm, j_w, j_xm, j_y, j_x]}
)";
  return text;
}

const MicrocodeProgram& reference_program() {
  static const MicrocodeProgram p = parse_program(reference_program_text());
  return p;
}

std::array<uint32_t, kNumRO> reference_ro_values(const LoopGeometry& g) {
  std::array<uint32_t, kNumRO> ro{};
  const uint32_t pix = g.pix_in;
  const uint32_t fm1 = g.fs - 1;
  const uint32_t tile_skip = g.in_tile_stride * g.tile_bytes;
  // Unsigned wrap-around encodes the negative rewinds.
  const uint32_t back = 0u - (fm1 * g.w_in + fm1) * pix;
  ro[TPsquare] = g.block_bytes;
  ro[TP] = g.tile_bytes;
  ro[NIF] = pix;
  ro[NOF] = g.pix_out - (g.n_out_tiles - 1) * g.tile_bytes;
  ro[W_X_NIF] = (g.w_in - fm1) * pix;
  ro[OW_X_NOF] = back + tile_skip;
  ro[ZERO] = 0;
  ro[J_STEP] = back + pix - (g.n_out_tiles - 1) * tile_skip;
  ro[I_EXTRA] = fm1 * pix;
  ro[N_IN_TILES] = g.n_in_tiles;
  ro[FS] = g.fs;
  ro[N_OUT_TILES] = g.n_out_tiles;
  ro[W_OUT] = g.w_out;
  ro[H_OUT] = g.h_out;
  return ro;
}

UcodeState ucode_init(const MicrocodeProgram& p, const std::array<uint32_t, kNumRO>& ro) {
  UcodeState s;
  s.ro = ro;
  s.ro[ZERO] = 0;
  for (const auto& l : p.loops)
    if (s.ro[l.range_source] == 0) s.done = true;
  return s;
}

UcodeState ucode_step(UcodeState s, const MicrocodeProgram& p) {
  s.boundary = false;
  if (s.done) return s;
  if (s.level < 0) {
    int level = -1;
    for (size_t k = 0; k < p.loops.size(); ++k) {
      if (++s.counter[k] < s.ro[p.loops[k].range_source]) {
        level = static_cast<int>(k);
        break;
      }
      s.counter[k] = 0;
    }
    if (level < 0) {
      s.done = true;
      return s;
    }
    s.level = level;
    s.index = 0;
  }
  const auto& loop = p.loops[static_cast<size_t>(s.level)];
  ++s.cycles;
  if (s.index < loop.count) {
    const auto& ins = p.instructions[loop.base + s.index];
    const uint32_t v = s.reg(ins.src);
    s.rw[ins.dst] = ins.op == Opcode::ADD ? s.rw[ins.dst] + v : v;
    ++s.executed;
    ++s.index;
  }
  if (s.index >= loop.count) {
    s.level = -1;
    s.boundary = true;
  }
  return s;
}

IterationOffsets current_offsets(const UcodeState& s) {
  return IterationOffsets{s.rw[W], s.rw[X], s.rw[Y], s.counter};
}

std::vector<IterationOffsets> run_to_completion(UcodeState s, const MicrocodeProgram& p) {
  std::vector<IterationOffsets> out;
  if (s.done) return out;
  out.push_back(current_offsets(s));
  while (true) {
    s = ucode_step(s, p);
    if (s.done) break;
    if (s.boundary) out.push_back(current_offsets(s));
  }
  return out;
}

}  // namespace xne::ucode
