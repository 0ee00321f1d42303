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

#include <sstream>

#include "xne/error.hpp"
#include "xne/golden.hpp"
#include "oracles.hpp"

using namespace xne;

namespace {

BatchNormParams unit_bn(double beta) { return BatchNormParams{{1.0}, {1.0}, {0.0}, {beta}, {0.0}}; }

}  // namespace

TEST_CASE("packing is channel-fastest and LSB-first with zero pad") {
  BinaryTensor t(40, 2, 3);
  CHECK(t.words_per_pixel() == 2);
  t.set(0, 1, 2, true);
  t.set(33, 1, 2, true);
  auto px = t.pixel(1, 2);
  CHECK(px[0] == 1u);
  CHECK(px[1] == 2u);
  CHECK(t.words()[(1 * 3 + 2) * 2] == 1u);
  CHECK(t.pad_bits_clear());
  px[1] |= 1u << 31;
  CHECK_FALSE(t.pad_bits_clear());
}

TEST_CASE("xnor_popcount counts agreements under the mask") {
  const std::vector<uint32_t> a{0b1010u}, b{0b0110u}, m{0b1111u};
  CHECK(xnor_popcount(a, b, m) == 2);
  CHECK_THROWS_AS(xnor_popcount(a, std::vector<uint32_t>{1, 2}, m), UsageError);
}

TEST_CASE("accumulation matches a bit-level oracle") {
  std::mt19937_64 rng(7);
  const LayerSpec layers[] = {LayerSpec::conv(3, 5, 3, 4, 5),  LayerSpec::conv(70, 9, 1, 2, 2),
                              LayerSpec::dense(100, 7),         LayerSpec::grouped(64, 16, 4, 3, 3, 3),
                              LayerSpec::grouped(48, 4, 16, 1, 2, 1), LayerSpec::grouped(96, 8, 1, 3, 2, 2)};
  for (const auto& s : layers) {
    CAPTURE(to_string(s.kind));
    auto x = BinaryTensor::random(s.nif, s.h_in(), s.w_in(), rng);
    auto w = WeightTensor::random(s.nof, s.inputs_per_output(), s.fs, rng);
    CHECK(accumulate_golden(x, w, s) == oracle::naive_acc(x, w, s));
  }
}

TEST_CASE("exact thresholds reproduce the real-valued batch-norm reference") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const LayerSpec s = trial % 2 ? LayerSpec::conv(6, 8, 3, 3, 4) : LayerSpec::grouped(12, 8, 6, 3, 2, 3);
    auto x = BinaryTensor::random(s.nif, s.h_in(), s.w_in(), rng);
    auto w = WeightTensor::random(s.nof, s.inputs_per_output(), s.fs, rng);
    const auto bn = oracle::bn_with_thresholds(rng, s.nof, s.n_acc());
    const auto th = derive_threshold(bn, s.n_acc(), 0);
    CHECK(layer_golden(x, w, th, s) == real_reference(x, w, bn, s));
  }
}

TEST_CASE("threshold quantization rounds half up on the popcount threshold") {
  // tau_pc = (-0.8 + 10) / 2 = 4.6, so the integer threshold is 5
  const auto d = derive_threshold_channel(unit_bn(0.8), 0, 10);
  CHECK(d.tau_pc == doctest::Approx(4.6));
  CHECK(d.tau_pc_int == 5);
  CHECK(derive_threshold(unit_bn(0.8), 10, 0).effective(0) == 5);
  CHECK(derive_threshold(unit_bn(0.8), 10, 1).effective(0) == 6);
  CHECK(derive_threshold(unit_bn(0.8), 10, 2).effective(0) == 4);
  // tau_pc = (1 + 10) / 2 = 5.5 with lambda < 0 floors to 5
  BatchNormParams neg{{-1.0}, {1.0}, {0.0}, {1.0}, {0.0}};
  const auto th = derive_threshold(neg, 10, 0);
  CHECK_FALSE(th.lambda_positive[0]);
  CHECK(th.effective(0) == 5);
  CHECK(th.binarize(0, 5));
  CHECK_FALSE(th.binarize(0, 6));
}

TEST_CASE("degenerate batch-norm parameters are rejected") {
  CHECK_THROWS_AS(derive_threshold(BatchNormParams{{1.0}, {0.0}, {0.0}, {0.0}, {0.0}}, 9, 0), UsageError);
  CHECK_THROWS_AS(derive_threshold(BatchNormParams{{0.0}, {1.0}, {0.0}, {0.0}, {0.0}}, 9, 0),
                  DegenerateBatchNormError);
  CHECK_THROWS_AS(derive_threshold(unit_bn(0), 9, 10), UsageError);
}

TEST_CASE("threshold hardware byte round-trips every value") {
  for (int t = -64; t <= 63; ++t)
    for (int lp = 0; lp < 2; ++lp) {
      ThresholdSpec th{{static_cast<int8_t>(t)}, {static_cast<uint8_t>(lp)}, 0};
      const uint8_t b = th.hw_byte(0);
      CHECK(((b >> 7) & 1) == lp);
      int8_t tau = 0;
      bool pos = false;
      ThresholdSpec::decode_hw_byte(b, tau, pos);
      CHECK(tau == t);
      CHECK(pos == (lp == 1));
    }
}

TEST_CASE("accumulators saturate before the comparison") {
  const LayerSpec s = LayerSpec::dense(1, 1);
  ThresholdSpec th{{63}, {0}, 9};  // acc <= 32256
  const std::vector<uint32_t> big{70000};
  CHECK_FALSE(binarize_accumulators(big, th, s).get(0, 0, 0));
  ThresholdSpec ge{{63}, {1}, 9};
  CHECK(binarize_accumulators(big, ge, s).get(0, 0, 0));
}

TEST_CASE("layer specs validate their geometry") {
  CHECK_THROWS_AS(LayerSpec::grouped(10, 4, 3, 1, 1, 1).validate(), UsageError);
  CHECK_THROWS_AS(LayerSpec::grouped(8, 4, 0, 1, 1, 1).validate(), UsageError);
  LayerSpec d = LayerSpec::dense(8, 4);
  d.fs = 3;
  CHECK_THROWS_AS(d.validate(), UsageError);
  const auto g = LayerSpec::grouped(16, 8, 4, 3, 5, 5);
  CHECK(g.band_start(5) == 4);
  CHECK(g.h_in() == 7);
  CHECK(g.ops() == 2ull * 8 * 25 * 4 * 9);
}

TEST_CASE("tensor files round-trip and reject corruption") {
  std::mt19937_64 rng(3);
  const auto t = BinaryTensor::random(37, 3, 2, rng);
  std::stringstream ss;
  write_tensor(ss, t);
  CHECK(read_tensor(ss) == t);
  std::stringstream bad("XBT0");
  CHECK_THROWS_AS(read_tensor(bad), ParseError);
  std::stringstream tr;
  write_tensor(tr, t);
  std::string s = tr.str();
  s.resize(s.size() - 3);
  std::stringstream trunc(s);
  CHECK_THROWS_AS(read_tensor(trunc), ParseError);
}
