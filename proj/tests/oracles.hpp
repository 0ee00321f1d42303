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

// Independent reference models shared by the unit tests and the acceptance
// suite. None of them touch the packed-word fast paths of the library.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "xne/golden.hpp"
#include "xne/microcode.hpp"

namespace xne::oracle {

// Bit-at-a-time accumulation, indexed [(ko * h_out + i) * w_out + j].
inline std::vector<uint32_t> naive_acc(const BinaryTensor& x, const WeightTensor& w, const LayerSpec& s) {
  std::vector<uint32_t> acc(size_t{s.nof} * s.h_out * s.w_out);
  const uint32_t nin = s.inputs_per_output();
  for (uint32_t ko = 0; ko < s.nof; ++ko) {
    const uint32_t base = s.kind == LayerKind::GroupedConv ? (s.group * ko) % s.nif : 0;
    for (uint32_t i = 0; i < s.h_out; ++i)
      for (uint32_t j = 0; j < s.w_out; ++j) {
        uint32_t n = 0;
        for (uint32_t fi = 0; fi < s.fs; ++fi)
          for (uint32_t fj = 0; fj < s.fs; ++fj)
            for (uint32_t c = 0; c < nin; ++c) n += x.get(base + c, i + fi, j + fj) == w.get(ko, c, fi, fj);
        acc[(size_t{ko} * s.h_out + i) * s.w_out + j] = n;
      }
  }
  return acc;
}

inline BinaryTensor naive_layer(const BinaryTensor& x, const WeightTensor& w, const ThresholdSpec& th,
                                const LayerSpec& s) {
  const auto acc = naive_acc(x, w, s);
  BinaryTensor y(s.nof, s.h_out, s.w_out);
  for (uint32_t ko = 0; ko < s.nof; ++ko)
    for (uint32_t i = 0; i < s.h_out; ++i)
      for (uint32_t j = 0; j < s.w_out; ++j) {
        const int64_t a = std::min<uint32_t>(acc[(size_t{ko} * s.h_out + i) * s.w_out + j], 65535);
        const int64_t t = int64_t{th.tau_q[ko]} * (int64_t{1} << th.shift);
        y.set(ko, i, j, th.lambda_positive[ko] ? a >= t : a <= t);
      }
  return y;
}

struct Offsets {
  uint32_t w, x, y;
  std::array<uint32_t, 6> c;  // innermost first
};

// Closed-form offsets of the reordered conv nest, in iteration order.
inline std::vector<Offsets> direct_offsets(const ucode::LoopGeometry& g) {
  std::vector<Offsets> out;
  const uint32_t L = g.n_in_tiles, T = g.tile_bytes;
  for (uint32_t i = 0; i < g.h_out; ++i)
    for (uint32_t j = 0; j < g.w_out; ++j)
      for (uint32_t ko = 0; ko < g.n_out_tiles; ++ko)
        for (uint32_t ui = 0; ui < g.fs; ++ui)
          for (uint32_t uj = 0; uj < g.fs; ++uj)
            for (uint32_t ki = 0; ki < L; ++ki) {
              const uint32_t w = (((ko * g.fs + ui) * g.fs + uj) * L + ki) * g.block_bytes;
              const uint32_t x = ((i + ui) * g.w_in + (j + uj)) * g.pix_in + (ko * g.in_tile_stride + ki) * T;
              const uint32_t y = (i * g.w_out + j) * g.pix_out + ko * T;
              out.push_back({w, x, y, {ki, uj, ui, ko, j, i}});
            }
  return out;
}

inline ucode::LoopGeometry random_geometry(std::mt19937_64& rng) {
  auto u = [&](uint32_t lo, uint32_t hi) { return std::uniform_int_distribution<uint32_t>(lo, hi)(rng); };
  ucode::LoopGeometry g;
  g.tile_bytes = 4 * u(1, 16);
  g.fs = u(1, 3);
  g.h_out = u(1, 4);
  g.w_out = u(1, 5);
  g.w_in = g.w_out + g.fs - 1;
  g.n_in_tiles = u(1, 3);
  g.n_out_tiles = u(1, 3);
  g.in_tile_stride = u(0, 1) ? g.n_in_tiles : 0;
  g.block_bytes = 4 * u(1, 64);
  g.pix_in = g.tile_bytes * (g.n_in_tiles + g.in_tile_stride * (g.n_out_tiles - 1)) + 4 * u(0, 2);
  g.pix_out = g.tile_bytes * g.n_out_tiles + 4 * u(0, 2);
  return g;
}

// Byte-slice realignment: gather whole bytes, then read bits one at a time.
inline std::vector<uint32_t> realign(std::span<const uint32_t> words, uint32_t off, uint32_t bits) {
  std::vector<uint8_t> bytes;
  for (uint32_t w : words)
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<uint8_t>(w >> (8 * b)));
  std::vector<uint32_t> out((bits + 31) / 32, 0);
  for (uint32_t i = 0; i < bits; ++i) {
    const uint8_t byte = bytes[off + i / 8];
    if ((byte >> (i % 8)) & 1) out[i / 32] |= 1u << (i % 32);
  }
  return out;
}

// Batch-norm parameters whose +-1-domain thresholds are drawn from t(rng).
template <class Dist>
BatchNormParams bn_with_thresholds(std::mt19937_64& rng, uint32_t nof, Dist t) {
  std::uniform_real_distribution<double> mag(0.5, 2.0), any(-3.0, 3.0);
  std::bernoulli_distribution neg(0.5);
  BatchNormParams bn;
  for (uint32_t k = 0; k < nof; ++k) {
    const double g = neg(rng) ? -mag(rng) : mag(rng);
    const double sg = mag(rng), mu = any(rng), b = any(rng);
    bn.gamma.push_back(g);
    bn.sigma.push_back(sg);
    bn.mu.push_back(mu);
    bn.bias.push_back(b);
    bn.beta.push_back(g / sg * (mu - b - t(rng, g > 0)));
  }
  return bn;
}

inline BatchNormParams bn_with_thresholds(std::mt19937_64& rng, uint32_t nof, uint32_t n_acc) {
  std::uniform_real_distribution<double> t(-double(n_acc) - 4, double(n_acc) + 4);
  return bn_with_thresholds(rng, nof, [&](std::mt19937_64& r, bool) { return t(r); });
}

}  // namespace xne::oracle
