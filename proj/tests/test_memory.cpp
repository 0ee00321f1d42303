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

#include <cstdlib>
#include <random>
#include <sstream>

#include "xne/energy.hpp"
#include "xne/error.hpp"
#include "xne/memory.hpp"
#include "oracles.hpp"

using namespace xne;
using namespace xne::mem;
namespace en = xne::energy;

TEST_CASE("default memory map") {
  const auto m = MemoryMap::defaults();
  CHECK_NOTHROW(m.validate());
  CHECK(m.region(Region::SharedScm).size == 8 * KiB);
  CHECK(m.region(Region::SharedSram).base == 0x2000);
  CHECK(m.region(Region::SharedSram).size == 448 * KiB);
  CHECK_FALSE(m.region(Region::CoreScm).engine_visible);
  CHECK(m.region(Region::HyperRam).size == 8 * 1024 * KiB);
  CHECK(m.locate(0x1FFC, 4).id == Region::SharedScm);
  CHECK(m.locate(0x2000).id == Region::SharedSram);
  CHECK_THROWS_AS(m.locate(0x1FFE, 4), MemoryError);
  CHECK_THROWS_AS(m.locate(0x2000 + 448 * KiB), MemoryError);
  CHECK(m.bank_of(4) == 1);
  CHECK(m.bank_of(8 * 4) == 0);
  CHECK(m.bank_of(0x2000 + 4 * 17) == 8 + 1);
  CHECK_THROWS_AS(m.bank_of(0x8000'0000), MemoryError);
  auto off = m;
  off.sram_powered = false;
  CHECK_THROWS_AS(off.locate(0x2000), MemoryError);
}

TEST_CASE("memory stores bytes per region") {
  Memory mem;
  const std::vector<uint8_t> b{1, 2, 3, 4, 5};
  mem.write(0x2003, b);
  CHECK(mem.read(0x2003, 5) == b);
  CHECK(mem.read_word(0x2004) == 0x05040302u);
  CHECK(mem.read(0x10, 2) == std::vector<uint8_t>{0, 0});
  CHECK_THROWS_AS(mem.write(0x7000'0000, b), MemoryError);
}

TEST_CASE("realigner matches a byte-slice oracle") {
  std::mt19937_64 rng(5);
  for (uint32_t off = 0; off < 4; ++off)
    for (uint32_t len = 1; len <= 200; ++len) {
      const uint32_t n = words_for_vector(off, len);
      CHECK(n == (off + (len + 7) / 8 + 3) / 4);
      std::vector<uint32_t> words(n);
      for (auto& w : words) w = static_cast<uint32_t>(rng());
      CAPTURE(off);
      CAPTURE(len);
      REQUIRE(realign(words, off, len) == oracle::realign(words, off, len));
    }
  CHECK_THROWS_AS(realign(std::vector<uint32_t>{1}, 3, 16), MemoryError);
}

TEST_CASE("address generation covers every vector word-aligned") {
  const auto m = MemoryMap::defaults();
  const auto a = gen_addresses({0x2006, 40, 12, 3}, m);
  // five bytes from 0x2006, 0x2012 and 0x201E each straddle two words
  CHECK(a == std::vector<uint64_t>{0x2004, 0x2008, 0x2010, 0x2014, 0x201C, 0x2020});
  CHECK_THROWS_AS(gen_addresses({0x1FF8, 128, 0, 1}, m), MemoryError);
}

TEST_CASE("round-robin arbiter alternates conflicting requesters") {
  BankArbiter arb(4, 3);
  const std::vector<BankArbiter::Request> same{{0, 2}, {1, 2}};
  int wins0 = 0;
  for (int c = 0; c < 10; ++c) {
    const auto g = arb.arbitrate(same);
    CHECK(g[0] + g[1] == 1);
    wins0 += g[0];
  }
  CHECK(wins0 == 5);
  const std::vector<BankArbiter::Request> apart{{0, 0}, {1, 1}, {2, 3}};
  CHECK(arb.arbitrate(apart) == std::vector<uint8_t>{1, 1, 1});
}

TEST_CASE("interconnect contention and trace") {
  const auto m = MemoryMap::defaults();
  Interconnect quiet(m, 2, ContentionConfig{0.0, 0.0, 1});
  quiet.enable_trace(true);
  std::vector<PortRequest> reqs{{0, 0x2000, false}, {1, 0x2004, true}};
  std::vector<uint8_t> grant(2);
  for (int c = 0; c < 100; ++c) quiet.cycle(reqs, grant);
  CHECK(quiet.stats().engine_grant_rate() == 1.0);
  std::ostringstream os;
  write_trace_csv(os, quiet.trace());
  CHECK(os.str().rfind("cycle,port,region,address,rw\n", 0) == 0);
  CHECK(quiet.trace().size() == 200);

  Interconnect busy(m, 2, ContentionConfig{1.0, 1.0, 1});
  for (int c = 0; c < 2000; ++c) busy.cycle(reqs, grant);
  CHECK(busy.stats().engine_grant_rate() < 1.0);
  CHECK(busy.stats().engine_grant_rate() > 0.8);
  CHECK(busy.stats().background_requests == 4000);
}

TEST_CASE("HyperRAM transfers run at 1 Gbit/s and 28.6 pJ/bit") {
  const auto m = MemoryMap::defaults();
  const auto op = en::operating_point("hyperram");
  const auto r = dma_transfer(m, Region::HyperRam, Region::SharedSram, 288 * KiB * 8, op);
  CHECK(r.seconds * 1e3 == doctest::Approx(2.36).epsilon(0.005));
  const auto mb = dma_transfer(m, Region::HyperRam, Region::SharedSram, 1'000'000, op);
  CHECK(mb.energy_j * 1e6 == doctest::Approx(28.6));
  CHECK_THROWS_AS(dma_transfer(m, Region::HyperRam, Region::SharedSram, 449 * KiB * 8, op), CapacityError);
  CHECK(dma_transfer(m, Region::HyperRam, Region::SharedSram, 0, op).energy_j == 0.0);
}

TEST_CASE("SRAM to SCM moves are marshaling") {
  const auto m = MemoryMap::defaults();
  const auto op = en::operating_point("marshal-0v6");
  const auto r = dma_transfer(m, Region::SharedSram, Region::SharedScm, 8000, op);
  CHECK(r.trace.marshal_bits == 8000);
  CHECK(r.energy_j == doctest::Approx(8000 * 8.7e-12));
  CHECK(r.seconds == doctest::Approx(250 / op.freq_hz));
  CHECK_THROWS_AS(dma_transfer(m, Region::SharedSram, Region::SharedScm, 9 * KiB * 8, op), CapacityError);
}

TEST_CASE("per-op energy at the SCM 0.4 V point") {
  const en::EnergyCoefficients c;
  const auto op = en::operating_point("scm-0v4", c);
  CHECK_FALSE(op.sram_powered);
  en::EnergyTrace t;
  t.ops = 1'000'000'000;
  const auto r = en::account_energy(t, c, op);
  CHECK(r.total() * 1e6 == doctest::Approx(21.6));
  CHECK(r.memory_side_j + r.engine_side_j == doctest::Approx(r.compute_j));
  t.sram_accesses = 1;
  CHECK_THROWS_AS(en::account_energy(t, c, op), MemoryError);
}

TEST_CASE("operating points") {
  const auto names = en::operating_point_names();
  CHECK(names.size() == 6);
  for (const auto& n : names) CHECK_NOTHROW(en::operating_point(n).validate());
  CHECK_THROWS_AS(en::operating_point("turbo"), UsageError);
  const auto v5 = en::operating_point("scm-0v5");
  en::EnergyTrace t;
  t.seconds = 1.0;
  CHECK(en::account_energy(t, {}, v5).leakage_j == doctest::Approx(0.1806e-3));
  CHECK(en::account_energy(t, {}, en::operating_point("scm-0v4")).leakage_j == 0.0);
  en::EnergyTrace h;
  h.hyperram_bits = 1;
  CHECK_THROWS_AS(en::account_energy(h, {}, en::operating_point("sram-0v6")), MemoryError);
  en::EnergyTrace mb;
  mb.marshal_bits = 1;
  CHECK_THROWS_AS(en::account_energy(mb, {}, en::operating_point("sram-0v6")), MemoryError);
}

TEST_CASE("coefficient overrides") {
  const auto c = en::coefficients_from_json(R"({"coefficients": {"sram_fj_per_op": 120.0}})");
  CHECK(c.sram_fj_per_op == 120.0);
  CHECK(c.scm_0v4_fj_per_op == 21.6);
  CHECK(en::operating_point("sram-0v6", c).fj_per_op == 120.0);
  CHECK_THROWS_AS(en::coefficients_from_json(R"({"bogus": 1})"), ParseError);
  CHECK_THROWS_AS(en::coefficients_from_json("{"), ParseError);
  CHECK_THROWS(en::coefficients_from_json(R"({"marshal_fj_per_op": 200.0})"));
}
