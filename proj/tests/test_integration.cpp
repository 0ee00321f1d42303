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

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "xne/error.hpp"
#include "xne/runner.hpp"

using namespace xne;
using namespace xne::runner;

namespace {

struct Staged {
  BinaryTensor x;
  WeightTensor w;
};

Staged random_operands(const LayerSpec& s, std::mt19937_64& rng) {
  return {BinaryTensor::random(s.nif, s.h_in(), s.w_in(), rng),
          WeightTensor::random(s.nof, s.inputs_per_output(), s.fs, rng)};
}

}  // namespace

TEST_CASE("random networks match golden at every TP") {
  std::mt19937_64 rng(31337);
  const uint32_t tps[] = {32, 64, 128, 256, 512};
  for (int k = 0; k < 40; ++k) {
    const auto n = random_network(rng);
    VerifyOptions opt;
    opt.run.tp = tps[k % 5];
    const auto v = verify_against_golden(n, 500 + k, opt);
    CAPTURE(n.to_json());
    CHECK_MESSAGE(v.passed, v.message);
  }
}

TEST_CASE("engine output equals the bit-level oracle") {
  std::mt19937_64 rng(12);
  const LayerSpec layers[] = {LayerSpec::conv(200, 48, 3, 2, 2), LayerSpec::grouped(256, 128, 16, 3, 2, 2),
                              LayerSpec::dense(1000, 40)};
  for (const auto& s : layers) {
    const auto op = random_operands(s, rng);
    const auto th = random_thresholds(s.nof, s.n_acc(), rng);
    CHECK(run_layer(s, op.x, op.w, th).output == oracle::naive_layer(op.x, op.w, th, s));
  }
}

TEST_CASE("full mVGG-F network verifies end to end") {
  const auto v = verify_against_golden(make_mvgg(0), 9);
  CHECK_MESSAGE(v.passed, v.message);
}

TEST_CASE("threshold truncation only flips outputs inside the rounding window") {
  std::mt19937_64 rng(4242);
  uint64_t flips = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const LayerSpec s = trial % 3 == 0 ? LayerSpec::conv(96, 40, 3, 3, 3) : LayerSpec::grouped(128, 64, 32, 3, 3, 3);
    const uint32_t shift = minimal_shift(s.n_acc()) + static_cast<uint32_t>(trial % 2);
    const auto bn = oracle::bn_with_thresholds(rng, s.nof, s.n_acc() - 1);
    const auto th = derive_threshold(bn, s.n_acc(), shift);
    const auto op = random_operands(s, rng);
    const auto got = run_layer(s, op.x, op.w, th).output;
    const auto ref = real_reference(op.x, op.w, bn, s);
    const auto acc = oracle::naive_acc(op.x, op.w, s);
    const double half = std::ldexp(1.0, static_cast<int>(shift) - 1);
    for (uint32_t ko = 0; ko < s.nof; ++ko) {
      const double tau = derive_threshold_channel(bn, ko, s.n_acc()).tau_pc;
      for (uint32_t i = 0; i < s.h_out; ++i)
        for (uint32_t j = 0; j < s.w_out; ++j) {
          if (got.get(ko, i, j) == ref.get(ko, i, j)) continue;
          const double a = acc[(size_t{ko} * s.h_out + i) * s.w_out + j];
          CHECK(a >= tau - half);
          CHECK(a <= tau + half);
          ++flips;
        }
    }
  }
  CHECK(flips > 0);
}

TEST_CASE("exactly representable thresholds never disagree") {
  std::mt19937_64 rng(99);
  const auto s = LayerSpec::conv(128, 32, 3, 3, 3);
  const uint32_t shift = minimal_shift(s.n_acc());
  std::uniform_int_distribution<int> m(2, 16);
  // tau_pc sits just inside a multiple of 2^shift, on the side that rounds onto it
  const auto bn = oracle::bn_with_thresholds(rng, s.nof, [&](std::mt19937_64& r, bool pos) {
    const double tau_pc = m(r) * std::ldexp(1.0, static_cast<int>(shift)) + (pos ? -0.3 : 0.3);
    return 2 * tau_pc - s.n_acc();
  });
  const auto th = derive_threshold(bn, s.n_acc(), shift);
  const auto op = random_operands(s, rng);
  CHECK(run_layer(s, op.x, op.w, th).output == real_reference(op.x, op.w, bn, s));
}

TEST_CASE("sustained throughput degrades with background contention") {
  const auto s = LayerSpec::conv(128, 128, 3, 8, 8);
  RunConfig cfg;
  cfg.sim_rows = 8;
  double prev = 1e9;
  for (double rate : {0.0, 0.25, 1.0}) {
    cfg.contention.core_rate = rate;
    const double opc = simulate_layer_timing(s, cfg).ops_per_cycle();
    CAPTURE(rate);
    CHECK(opc < prev);
    CHECK(opc <= 256.0);
    prev = opc;
  }
}

TEST_CASE("memory trace covers every engine access") {
  std::mt19937_64 rng(6);
  const auto s = LayerSpec::conv(64, 32, 3, 2, 2);
  const auto op = random_operands(s, rng);
  const auto th = random_thresholds(s.nof, s.n_acc(), rng);
  std::vector<mem::TraceEntry> trace;
  RunConfig cfg;
  cfg.contention.core_rate = 0;
  const auto r = run_layer(s, op.x, op.w, th, cfg, &trace);
  uint64_t reads = 0, writes = 0;
  for (const auto& e : trace) (e.write ? writes : reads) += 1;
  // 9 features of 2 words, 9 x 32 weights of 2 words, 8 threshold words per pixel
  CHECK(reads == 4 * (9 * 2 + 9 * 32 * 2 + 8));
  CHECK(writes == 4);
  CHECK(r.stats.memory.engine_grants == trace.size());
  std::ostringstream os;
  mem::write_trace_csv(os, trace);
  const std::string csv = os.str();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(trace.size() + 1));
}
