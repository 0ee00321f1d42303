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

// Bit-exact golden model of binarized conv / dense / grouped-conv layers.
//
// Bits encode {-1,+1} as {0,1}. Tensors are packed channel-fastest, LSB
// first inside 32-bit words; each pixel's channel vector is padded to a
// whole number of words and pad bits are kept at zero.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace xne {

inline constexpr uint32_t kAccumulatorMax = 65535;

inline uint32_t words_for_bits(uint64_t bits) { return static_cast<uint32_t>((bits + 31) / 32); }

class BinaryTensor {
 public:
  BinaryTensor() = default;
  BinaryTensor(uint32_t channels, uint32_t height, uint32_t width);

  uint32_t channels() const { return channels_; }
  uint32_t height() const { return height_; }
  uint32_t width() const { return width_; }
  uint32_t words_per_pixel() const { return wpp_; }
  uint32_t pixel_bytes() const { return wpp_ * 4; }
  uint64_t size_bits() const { return uint64_t{height_} * width_ * wpp_ * 32; }

  bool get(uint32_t c, uint32_t h, uint32_t w) const;
  void set(uint32_t c, uint32_t h, uint32_t w, bool v);

  std::span<const uint32_t> pixel(uint32_t h, uint32_t w) const;
  std::span<uint32_t> pixel(uint32_t h, uint32_t w);
  std::span<const uint32_t> words() const { return words_; }
  std::span<uint32_t> words() { return words_; }

  // Little-endian byte image of the payload.
  std::vector<uint8_t> payload_bytes() const;
  void load_payload(std::span<const uint8_t> bytes);

  // True iff every pad bit is zero.
  bool pad_bits_clear() const;

  static BinaryTensor random(uint32_t channels, uint32_t height, uint32_t width, std::mt19937_64& rng);

  friend bool operator==(const BinaryTensor&, const BinaryTensor&) = default;

 private:
  uint32_t channels_ = 0;
  uint32_t height_ = 0;
  uint32_t width_ = 0;
  uint32_t wpp_ = 0;
  std::vector<uint32_t> words_;
};

// 4-D weights (nof, nin, fs, fs). For grouped layers nin is the group
// width d, i.e. only the in-band input channels are stored.
class WeightTensor {
 public:
  WeightTensor() = default;
  WeightTensor(uint32_t nof, uint32_t nin, uint32_t fs);

  uint32_t nof() const { return nof_; }
  uint32_t nin() const { return nin_; }
  uint32_t fs() const { return fs_; }
  uint32_t words_per_vector() const { return wpv_; }

  bool get(uint32_t ko, uint32_t ki, uint32_t fi, uint32_t fj) const;
  void set(uint32_t ko, uint32_t ki, uint32_t fi, uint32_t fj, bool v);
  std::span<const uint32_t> vec(uint32_t ko, uint32_t fi, uint32_t fj) const;
  std::span<uint32_t> vec(uint32_t ko, uint32_t fi, uint32_t fj);

  static WeightTensor random(uint32_t nof, uint32_t nin, uint32_t fs, std::mt19937_64& rng);

  friend bool operator==(const WeightTensor&, const WeightTensor&) = default;

 private:
  uint32_t nof_ = 0, nin_ = 0, fs_ = 0, wpv_ = 0;
  std::vector<uint32_t> words_;
};

struct BatchNormParams {
  std::vector<double> gamma, sigma, mu, beta, bias;

  size_t size() const { return gamma.size(); }
  void validate(size_t nof) const;
};

// Per-output-channel hardware threshold: 7-bit signed tau plus sign(lambda),
// with the layer-wide left shift applied before comparing with the 16-bit
// accumulator.
struct ThresholdSpec {
  std::vector<int8_t> tau_q;
  std::vector<uint8_t> lambda_positive;
  uint32_t shift = 0;

  size_t size() const { return tau_q.size(); }
  int32_t effective(size_t k) const { return static_cast<int32_t>(tau_q[k]) * (int32_t{1} << shift); }
  bool binarize(size_t k, uint32_t acc) const {
    const int64_t a = acc;
    return lambda_positive[k] ? a >= effective(k) : a <= effective(k);
  }
  // One packed byte per channel: bits 6..0 tau (two's complement), bit 7 = lambda > 0.
  uint8_t hw_byte(size_t k) const;
  static void decode_hw_byte(uint8_t b, int8_t& tau, bool& lambda_pos);

  void validate(size_t nof) const;
};

enum class LayerKind { Conv, Dense, GroupedConv };

const char* to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

// Stride 1, no padding: the input is expected pre-padded to
// (h_out + fs - 1) x (w_out + fs - 1).
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  uint32_t nif = 1, nof = 1, fs = 1, h_out = 1, w_out = 1;
  uint32_t group = 0;  // inputs per output channel for GroupedConv

  void validate() const;
  uint32_t inputs_per_output() const { return kind == LayerKind::GroupedConv ? group : nif; }
  uint32_t n_acc() const { return inputs_per_output() * fs * fs; }
  uint32_t h_in() const { return h_out + fs - 1; }
  uint32_t w_in() const { return w_out + fs - 1; }
  // First input channel of k_out's band (grouped layers).
  uint32_t band_start(uint32_t k_out) const;
  uint64_t ops() const { return 2ull * nof * h_out * w_out * inputs_per_output() * fs * fs; }
  uint64_t weight_bits() const { return uint64_t{nof} * inputs_per_output() * fs * fs; }

  static LayerSpec conv(uint32_t nif, uint32_t nof, uint32_t fs, uint32_t h_out, uint32_t w_out);
  static LayerSpec dense(uint32_t nif, uint32_t nof);
  static LayerSpec grouped(uint32_t nif, uint32_t nof, uint32_t d, uint32_t fs, uint32_t h_out, uint32_t w_out);
};

// Number of positions where mask is set and a equals b.
uint32_t xnor_popcount(std::span<const uint32_t> a, std::span<const uint32_t> b,
                       std::span<const uint32_t> mask);

struct ThresholdDerivation {
  double lambda = 0;
  double kappa = 0;
  double tau_pm1 = 0;     // threshold in the +-1 sum domain
  double tau_pc = 0;      // threshold in the popcount domain, unrounded
  int64_t tau_pc_int = 0;  // direction-aware rounded popcount threshold
};

ThresholdDerivation derive_threshold_channel(const BatchNormParams& bn, size_t k, uint32_t n_acc);
ThresholdSpec derive_threshold(const BatchNormParams& bn, uint32_t n_acc, uint32_t shift);

// Raw (unsaturated) popcount accumulations, indexed [(k_out * h_out + i) * w_out + j].
std::vector<uint32_t> accumulate_golden(const BinaryTensor& x, const WeightTensor& w, const LayerSpec& spec);

BinaryTensor binarize_accumulators(std::span<const uint32_t> acc, const ThresholdSpec& th,
                                   const LayerSpec& spec);

BinaryTensor conv_layer_golden(const BinaryTensor& x, const WeightTensor& w, const ThresholdSpec& th,
                               const LayerSpec& spec);
BinaryTensor grouped_conv_golden(const BinaryTensor& x, const WeightTensor& w, const ThresholdSpec& th,
                                 const LayerSpec& spec);
// Dispatches on spec.kind.
BinaryTensor layer_golden(const BinaryTensor& x, const WeightTensor& w, const ThresholdSpec& th,
                          const LayerSpec& spec);

// +-1 real-arithmetic cross-check: sign(gamma * (b + t - mu) / sigma + beta).
BinaryTensor real_reference(const BinaryTensor& x, const WeightTensor& w, const BatchNormParams& bn,
                            const LayerSpec& spec);

// Tensor file: "XBT1", u32 channels, u32 height, u32 width (LE), payload.
void write_tensor(std::ostream& os, const BinaryTensor& t);
BinaryTensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const BinaryTensor& t);
BinaryTensor load_tensor(const std::string& path);

}  // namespace xne
