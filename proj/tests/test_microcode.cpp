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
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "xne/error.hpp"
#include "xne/microcode.hpp"
#include "oracles.hpp"

using namespace xne;
using namespace xne::ucode;

TEST_CASE("reference program fits the 28-byte code section") {
  const auto& p = reference_program();
  CHECK(p.instructions.size() == 17);
  CHECK(p.loops.size() == 6);
  const auto img = assemble(p);
  CHECK(img.code.size() == 28);
  CHECK(img.register_image().size() == 32);
  // ADD W, TPsquare
  CHECK(img.code[0] == 0x84);
  // innermost loop: base 0, two instructions, range n_in_tiles
  CHECK(img.code[22] == 0x02);
  CHECK((img.range_bindings & 0xF) == N_IN_TILES);
  CHECK((img.range_bindings >> 24) == 6);
  // the row loop reuses the column block
  CHECK(p.loops[5].base == 12);
  CHECK(p.loops[5].count == 5);
}

TEST_CASE("assembly round-trips") {
  const auto& p = reference_program();
  const auto img = assemble(p);
  CHECK(disassemble(img) == p.normalized());
  CHECK(disassemble(img.register_image()) == p.normalized());
  CHECK(parse_program(format_program(p)).normalized() == p.normalized());
}

TEST_CASE("shipped program file matches the built-in program") {
  std::ifstream is(XNE_DATA_DIR "/xne_conv.yaml");
  REQUIRE(is);
  std::stringstream ss;
  ss << is.rdbuf();
  CHECK(parse_program(ss.str()) == reference_program());
}

TEST_CASE("interpreter offsets match the closed form on random geometries") {
  std::mt19937_64 rng(2024);
  const unsigned body[6] = {2, 3, 3, 4, 4, 5};
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = oracle::random_geometry(rng);
    const auto expect = oracle::direct_offsets(g);
    const auto s0 = ucode_init(reference_program(), reference_ro_values(g));
    const auto got = run_to_completion(s0, reference_program());
    REQUIRE(got.size() == expect.size());
    uint64_t cycles = 0;
    for (size_t n = 0; n < got.size(); ++n) {
      CAPTURE(trial);
      CAPTURE(n);
      REQUIRE(got[n].w == expect[n].w);
      REQUIRE(got[n].x == expect[n].x);
      REQUIRE(got[n].y == expect[n].y);
      REQUIRE(got[n].counter == expect[n].c);
      if (n > 0) {
        int lvl = 5;
        while (expect[n].c[lvl] == expect[n - 1].c[lvl]) --lvl;
        cycles += body[lvl];
      }
    }
    auto s = s0;
    while (!s.done) s = ucode_step(s, reference_program());
    CHECK(s.cycles == cycles);
  }
}

TEST_CASE("a zero range leaves nothing to iterate") {
  LoopGeometry g;
  g.h_out = 0;
  CHECK(run_to_completion(ucode_init(reference_program(), reference_ro_values(g)), reference_program()).empty());
}

TEST_CASE("parser reports errors with line numbers") {
  const std::string bad_reg = "code:\n  - {label: a, op: add, dst: W, src: TP}\n  - {label: b, op: add, dst: W, src: nope}\nloops:\n  - {range: fs, instructions: [a, b]}\n";
  try {
    parse_program(bad_reg);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  const std::string dup = "code:\n  - {label: a, op: add, dst: W, src: TP}\n  - {label: a, op: mv, dst: x, src: TP}\nloops: []\n";
  CHECK_THROWS_AS(parse_program(dup), ParseError);
  const std::string gap = "code:\n  - {label: a, op: add, dst: W, src: TP}\n  - {label: b, op: add, dst: W, src: TP}\n  - {label: c, op: add, dst: W, src: TP}\nloops:\n  - {range: fs, instructions: [a, c]}\n";
  CHECK_THROWS_AS(parse_program(gap), ParseError);
  std::string many = "code:\n  - {label: a, op: add, dst: W, src: TP}\nloops:\n";
  for (int k = 0; k < 7; ++k) many += "  - {range: fs, instructions: [a]}\n";
  CHECK_THROWS_AS(parse_program(many), ParseError);
  CHECK_THROWS_AS(parse_program("code: [unterminated"), ParseError);
  const std::string custom = "mnemonics: {acc: 2, step: 7}\ncode:\n  - {label: a, op: add, dst: acc, src: step}\nloops:\n  - {range: fs, instructions: [a]}\n";
  const auto p = parse_program(custom);
  CHECK(p.instructions[0] == MicroInstruction{Opcode::ADD, 2, 7});
}

TEST_CASE("validation enforces the code budget") {
  MicrocodeProgram p;
  p.instructions.assign(23, MicroInstruction{Opcode::ADD, 0, 4});
  p.loops.push_back({0, 0, 1});
  CHECK_THROWS_AS(p.validate(), CapacityError);
  MicrocodeProgram q;
  q.instructions.push_back({Opcode::ADD, 0, 20});
  q.loops.push_back({0, 0, 1});
  CHECK_THROWS_AS(q.validate(), UsageError);
}

TEST_CASE("disassembler rejects malformed images") {
  const auto img = assemble(reference_program());
  CHECK_THROWS_AS(disassemble(std::vector<uint8_t>(27)), DecodeError);
  auto bad_src = img;
  bad_src.code[0] = 0x80 | 21;
  CHECK_THROWS_AS(disassemble(bad_src), DecodeError);
  auto reserved = img;
  reserved.range_bindings |= 1u << 28;
  CHECK_THROWS_AS(disassemble(reserved), DecodeError);
  auto overrun = img;
  overrun.code[27] = (15 << 4) | 8;
  CHECK_THROWS_AS(disassemble(overrun), DecodeError);
  auto nloops = img;
  nloops.range_bindings = (nloops.range_bindings & 0xFFFFFF) | (7u << 24);
  CHECK_THROWS_AS(disassemble(nloops), DecodeError);
  const std::vector<uint8_t> bare(img.code.begin(), img.code.end());
  CHECK(disassemble(bare).loops.size() == 6);
}
