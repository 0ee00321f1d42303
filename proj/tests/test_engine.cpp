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

#include <random>

#include "xne/engine.hpp"
#include "xne/error.hpp"
#include "xne/runner.hpp"

using namespace xne;
using namespace xne::engine;
namespace rn = xne::runner;

namespace {

// One layer laid out in SRAM, ready to be offloaded by hand.
struct Staged {
  LayerSpec spec;
  BinaryTensor x;
  WeightTensor w;
  ThresholdSpec th;
  rn::TilePlan plan;
  mem::Memory memory;
  uint64_t out_addr = 0, out_bytes = 0;

  Staged(const LayerSpec& s, uint64_t seed, uint32_t tp = 128) : spec(s) {
    std::mt19937_64 rng(seed);
    x = BinaryTensor::random(s.nif, s.h_in(), s.w_in(), rng);
    w = WeightTensor::random(s.nof, s.inputs_per_output(), s.fs, rng);
    th = rn::random_thresholds(s.nof, s.n_acc(), rng);
    plan = rn::plan_layer(s, tp);
    const auto xb = x.payload_bytes(), wb = rn::pack_weights(plan, w), tb = rn::pack_thresholds(th);
    out_bytes = BinaryTensor(s.nof, s.h_out, s.w_out).payload_bytes().size();
    const uint64_t in = 0x2000;
    out_addr = in + xb.size();
    const uint64_t wa = out_addr + out_bytes, ta = wa + wb.size();
    plan.place({mem::Region::SharedSram, in, xb.size()}, {mem::Region::SharedSram, out_addr, out_bytes},
               {mem::Region::SharedSram, wa, wb.size()}, {mem::Region::SharedSram, ta, tb.size()});
    for (auto& j : plan.jobs) j.shift = th.shift;
    memory.write(in, xb);
    memory.write(wa, wb);
    memory.write(ta, tb);
  }

  BinaryTensor output() {
    BinaryTensor y(spec.nof, spec.h_out, spec.w_out);
    y.load_payload(memory.read(out_addr, out_bytes));
    return y;
  }
};

EngineConfig quiet(uint32_t tp = 128) {
  EngineConfig c;
  c.tp = tp;
  c.contention.core_rate = 0;
  return c;
}

}  // namespace

TEST_CASE("datapath saturates or wraps") {
  const std::vector<uint32_t> ones{~0u}, mask{~0u};
  CHECK(datapath_accumulate(ones, ones, mask, 65530, true) == 65535);
  CHECK(datapath_accumulate(ones, ones, mask, 65530, false) == static_cast<uint16_t>(65530 + 32));
  CHECK(datapath_accumulate(ones, std::vector<uint32_t>{0}, mask, 7, true) == 7);
}

TEST_CASE("threshold unit agrees with the threshold spec") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> tau(-64, 63), acc(0, 65535), bit(0, 1), sh(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    ThresholdSpec th;
    th.shift = static_cast<uint32_t>(sh(rng));
    std::vector<uint16_t> a(40);
    for (int k = 0; k < 40; ++k) {
      th.tau_q.push_back(static_cast<int8_t>(tau(rng)));
      th.lambda_positive.push_back(static_cast<uint8_t>(bit(rng)));
      a[k] = static_cast<uint16_t>(acc(rng));
    }
    std::vector<uint8_t> bytes;
    for (int k = 0; k < 40; ++k) bytes.push_back(th.hw_byte(k));
    const auto out = threshold_binarize(a, bytes, th.shift, 37);
    REQUIRE(out.size() == 2);
    for (uint32_t k = 0; k < 40; ++k) {
      const bool expect = k < 37 && th.binarize(k, a[k]);
      CHECK(((out[k / 32] >> (k % 32)) & 1) == expect);
    }
  }
}

TEST_CASE("job registers round-trip") {
  JobDescriptor jd;
  jd.weight_ptr = 0x2100;
  jd.nif = 300;
  jd.out_lanes = 96;
  jd.group = 4;
  jd.shift = 3;
  jd.w_in = 9;
  CHECK(decode_job(encode_job(jd)) == jd);
  const auto map = job_register_map();
  CHECK(map.size() == kJobSetBytes / 4);
  for (size_t i = 0; i < map.size(); ++i) CHECK(map[i].offset == 4 * i);
}

TEST_CASE("register file is double-buffered") {
  RegisterFile rf;
  CHECK(rf.generic_image().size() == 36);
  JobDescriptor jd;
  rf.offload(jd);
  CHECK(rf.has_active());
  rf.offload(jd);
  CHECK(rf.has_pending());
  CHECK_THROWS_AS(rf.offload(jd), BusyError);
  rf.retire();
  CHECK(rf.promote());
  CHECK(rf.has_active());
  CHECK_FALSE(rf.has_pending());
}

TEST_CASE("engine rejects an offload while both register sets are taken") {
  Staged st(LayerSpec::dense(32, 8), 1);
  Engine eng(quiet(), &st.memory);
  eng.offload(st.plan.jobs[0]);
  eng.step();
  eng.offload(st.plan.jobs[0]);
  CHECK_THROWS_AS(eng.offload(st.plan.jobs[0]), BusyError);
  eng.run_until_idle();
  CHECK(eng.stats().jobs_completed == 2);
}

TEST_CASE("single-tile dense job follows the phase schedule") {
  for (uint32_t lanes : {8u, 32u, 100u})
    for (EngineTiming t : {EngineTiming{}, EngineTiming{2, 1, 5, 3}}) {
      Staged st(LayerSpec::dense(32, lanes), lanes);
      auto cfg = quiet();
      cfg.timing = t;
      Engine eng(cfg, &st.memory);
      REQUIRE(st.plan.jobs.size() == 1);
      eng.offload(st.plan.jobs[0]);
      // setup, feature fetch + latency + setup, one lane per cycle,
      // threshold setup, output write, drain check, retire
      uint64_t expect = t.job_setup + t.mem_latency + t.feature_setup + lanes + t.threshold_setup + 4;
      // The threshold fetch starts once the last weight is issued, four
      // lanes before the window ends; a long one delays the threshold stage.
      const int64_t th_cycles = (((lanes + 3) / 4) + 3) / 4;
      expect += static_cast<uint64_t>(std::max<int64_t>(0, th_cycles + t.mem_latency - 5));
      CAPTURE(lanes);
      CHECK(eng.run_until_idle() == expect);
      CHECK(eng.stats().accumulate_cycles == lanes);
      CHECK(eng.stats().ops == 2ull * 32 * lanes);
      CHECK(st.output() == layer_golden(st.x, st.w, st.th, st.spec));
    }
}

TEST_CASE("end-of-job event fires once per job after the output drains") {
  Staged st(LayerSpec::conv(64, 200, 3, 2, 3), 9);
  REQUIRE(st.plan.jobs.size() == 2);
  Engine eng(quiet(), &st.memory);
  std::vector<uint64_t> events;
  eng.on_end_of_job([&](uint64_t c) {
    events.push_back(c);
    CHECK(eng.output_fifo_size() == 0);
  });
  eng.offload(st.plan.jobs[0]);
  eng.offload(st.plan.jobs[1]);
  eng.run_until_idle();
  CHECK(events.size() == 2);
  CHECK(st.output() == layer_golden(st.x, st.w, st.th, st.spec));
}

TEST_CASE("a blocked sink stalls the engine without touching accumulators") {
  Staged st(LayerSpec::conv(32, 32, 1, 2, 4), 4);
  Engine eng(quiet(), &st.memory);
  bool blocked = true;
  eng.set_sink_blocked([&](uint64_t) { return blocked; });
  eng.offload(st.plan.jobs[0]);
  for (int c = 0; c < 2000 && !(eng.phase() == Phase::Threshold && eng.output_fifo_size() == 2); ++c) eng.step();
  REQUIRE(eng.output_fifo_size() == 2);
  std::vector<uint16_t> snap(eng.accumulators().begin(), eng.accumulators().end());
  const auto stalls = eng.stats().sink_stall_cycles;
  for (int c = 0; c < 200; ++c) eng.step();
  CHECK(eng.phase() == Phase::Threshold);
  CHECK(std::equal(snap.begin(), snap.end(), eng.accumulators().begin()));
  CHECK(eng.stats().sink_stall_cycles > stalls);
  CHECK(eng.output_fifo_size() == 2);
  blocked = false;
  eng.run_until_idle();
  CHECK(st.output() == layer_golden(st.x, st.w, st.th, st.spec));
}

TEST_CASE("saturating accumulators differ from the wrapping fault mode") {
  const auto spec = LayerSpec::dense(66000, 2);
  std::mt19937_64 rng(3);
  BinaryTensor x(66000, 1, 1);
  for (uint32_t c = 0; c < 66000; ++c) x.set(c, 0, 0, true);
  WeightTensor w(2, 66000, 1);
  for (uint32_t c = 0; c < 66000; ++c) w.set(0, c, 0, 0, true);
  ThresholdSpec th{{63, 63}, {1, 1}, 9};  // acc >= 32256
  rn::RunConfig cfg;
  cfg.contention.core_rate = 0;
  const auto sat = rn::run_layer(spec, x, w, th, cfg);
  CHECK(sat.output == layer_golden(x, w, th, spec));
  CHECK(sat.output.get(0, 0, 0));
  CHECK(sat.stats.max_accumulator == 65535);
  cfg.saturate = false;
  const auto wrap = rn::run_layer(spec, x, w, th, cfg);
  CHECK_FALSE(wrap.output.get(0, 0, 0));
}

TEST_CASE("functional and timing-only runs agree on cycles and ops") {
  const auto spec = LayerSpec::conv(96, 160, 3, 3, 4);
  std::mt19937_64 rng(8);
  const auto x = BinaryTensor::random(spec.nif, spec.h_in(), spec.w_in(), rng);
  const auto w = WeightTensor::random(spec.nof, spec.nif, spec.fs, rng);
  const auto th = rn::random_thresholds(spec.nof, spec.n_acc(), rng);
  rn::RunConfig cfg;
  cfg.sim_rows = spec.h_out;
  const auto f = rn::run_layer(spec, x, w, th, cfg);
  CHECK(f.output == layer_golden(x, w, th, spec));
  CHECK(f.stats.ops == spec.ops());
  const auto t = rn::simulate_layer_timing(spec, cfg);
  CHECK(t.ops == spec.ops());
  CHECK(t.busy_cycles == f.stats.busy_cycles);
}

TEST_CASE("engine configuration is validated") {
  EngineConfig c;
  c.tp = 48;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.tp = 1024;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.tp = 256;
  CHECK_NOTHROW(c.validate());
}
