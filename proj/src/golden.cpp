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
#include "xne/golden.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "xne/error.hpp"

namespace xne {

namespace {

uint32_t get_bit(std::span<const uint32_t> words, uint64_t i) { return (words[i / 32] >> (i % 32)) & 1u; }

void put_bit(std::span<uint32_t> words, uint64_t i, bool v) {
  const uint32_t m = 1u << (i % 32);
  if (v) {
    words[i / 32] |= m;
  } else {
    words[i / 32] &= ~m;
  }
}

// Copies bits [start, start+len) of src into a fresh zero-padded vector.
std::vector<uint32_t> extract_bits(std::span<const uint32_t> src, uint32_t start, uint32_t len) {
  std::vector<uint32_t> out(words_for_bits(len), 0);
  for (uint32_t w = 0; w < out.size(); ++w) {
    const uint64_t bit = uint64_t{start} + w * 32ull;
    const uint64_t word = bit / 32, off = bit % 32;
    uint64_t v = src[word] >> off;
    if (off != 0 && word + 1 < src.size()) v |= uint64_t{src[word + 1]} << (32 - off);
    out[w] = static_cast<uint32_t>(v);
  }
  const uint32_t tail = len % 32;
  if (tail != 0) out.back() &= (1u << tail) - 1;
  return out;
}

std::vector<uint32_t> low_mask(uint32_t len) {
  std::vector<uint32_t> m(words_for_bits(len), ~0u);
  if (len % 32 != 0) m.back() = (1u << (len % 32)) - 1;
  return m;
}

void check_shapes(const BinaryTensor& x, const WeightTensor& w, const LayerSpec& spec) {
  spec.validate();
  if (x.channels() != spec.nif || x.height() != spec.h_in() || x.width() != spec.w_in())
    throw UsageError("input tensor dims do not match layer spec");
  if (w.nof() != spec.nof || w.nin() != spec.inputs_per_output() || w.fs() != spec.fs)
    throw UsageError("weight tensor dims do not match layer spec");
}

}  // namespace

// ---------------------------------------------------------------- tensors

BinaryTensor::BinaryTensor(uint32_t channels, uint32_t height, uint32_t width)
    : channels_(channels), height_(height), width_(width), wpp_(words_for_bits(channels)),
      words_(size_t{height} * width * wpp_, 0) {}

bool BinaryTensor::get(uint32_t c, uint32_t h, uint32_t w) const {
  if (c >= channels_ || h >= height_ || w >= width_) throw UsageError("tensor index out of range");
  return get_bit(pixel(h, w), c) != 0;
}

void BinaryTensor::set(uint32_t c, uint32_t h, uint32_t w, bool v) {
  if (c >= channels_ || h >= height_ || w >= width_) throw UsageError("tensor index out of range");
  put_bit(pixel(h, w), c, v);
}

std::span<const uint32_t> BinaryTensor::pixel(uint32_t h, uint32_t w) const {
  return std::span<const uint32_t>(words_).subspan((size_t{h} * width_ + w) * wpp_, wpp_);
}

std::span<uint32_t> BinaryTensor::pixel(uint32_t h, uint32_t w) {
  return std::span<uint32_t>(words_).subspan((size_t{h} * width_ + w) * wpp_, wpp_);
}

std::vector<uint8_t> BinaryTensor::payload_bytes() const {
  std::vector<uint8_t> out(words_.size() * 4);
  for (size_t i = 0; i < words_.size(); ++i)
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<uint8_t>(words_[i] >> (8 * b));
  return out;
}

void BinaryTensor::load_payload(std::span<const uint8_t> bytes) {
  if (bytes.size() != words_.size() * 4) throw UsageError("payload size mismatch");
  for (size_t i = 0; i < words_.size(); ++i) {
    uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= uint32_t{bytes[i * 4 + b]} << (8 * b);
    words_[i] = v;
  }
}

bool BinaryTensor::pad_bits_clear() const {
  if (channels_ % 32 == 0) return true;
  const uint32_t keep = (1u << (channels_ % 32)) - 1;
  for (size_t p = 0; p < size_t{height_} * width_; ++p)
    if (words_[p * wpp_ + wpp_ - 1] & ~keep) return false;
  return true;
}

BinaryTensor BinaryTensor::random(uint32_t channels, uint32_t height, uint32_t width, std::mt19937_64& rng) {
  BinaryTensor t(channels, height, width);
  for (uint32_t h = 0; h < height; ++h)
    for (uint32_t w = 0; w < width; ++w) {
      auto px = t.pixel(h, w);
      for (auto& word : px) word = static_cast<uint32_t>(rng());
      if (channels % 32 != 0) px.back() &= (1u << (channels % 32)) - 1;
    }
  return t;
}

WeightTensor::WeightTensor(uint32_t nof, uint32_t nin, uint32_t fs)
    : nof_(nof), nin_(nin), fs_(fs), wpv_(words_for_bits(nin)), words_(size_t{nof} * fs * fs * wpv_, 0) {}

std::span<const uint32_t> WeightTensor::vec(uint32_t ko, uint32_t fi, uint32_t fj) const {
  return std::span<const uint32_t>(words_).subspan(((size_t{ko} * fs_ + fi) * fs_ + fj) * wpv_, wpv_);
}

std::span<uint32_t> WeightTensor::vec(uint32_t ko, uint32_t fi, uint32_t fj) {
  return std::span<uint32_t>(words_).subspan(((size_t{ko} * fs_ + fi) * fs_ + fj) * wpv_, wpv_);
}

bool WeightTensor::get(uint32_t ko, uint32_t ki, uint32_t fi, uint32_t fj) const {
  if (ko >= nof_ || ki >= nin_ || fi >= fs_ || fj >= fs_) throw UsageError("weight index out of range");
  return get_bit(vec(ko, fi, fj), ki) != 0;
}

void WeightTensor::set(uint32_t ko, uint32_t ki, uint32_t fi, uint32_t fj, bool v) {
  if (ko >= nof_ || ki >= nin_ || fi >= fs_ || fj >= fs_) throw UsageError("weight index out of range");
  put_bit(vec(ko, fi, fj), ki, v);
}

WeightTensor WeightTensor::random(uint32_t nof, uint32_t nin, uint32_t fs, std::mt19937_64& rng) {
  WeightTensor t(nof, nin, fs);
  for (uint32_t ko = 0; ko < nof; ++ko)
    for (uint32_t fi = 0; fi < fs; ++fi)
      for (uint32_t fj = 0; fj < fs; ++fj) {
        auto v = t.vec(ko, fi, fj);
        for (auto& word : v) word = static_cast<uint32_t>(rng());
        if (nin % 32 != 0) v.back() &= (1u << (nin % 32)) - 1;
      }
  return t;
}

// ------------------------------------------------------------- parameters

void BatchNormParams::validate(size_t nof) const {
  if (gamma.size() != nof || sigma.size() != nof || mu.size() != nof || beta.size() != nof ||
      bias.size() != nof)
    throw UsageError("batch-norm arrays must all have length nof");
  for (double s : sigma)
    if (s == 0.0) throw UsageError("batch-norm sigma must be nonzero");
}

uint8_t ThresholdSpec::hw_byte(size_t k) const {
  return static_cast<uint8_t>((static_cast<uint8_t>(tau_q[k]) & 0x7F) | (lambda_positive[k] ? 0x80 : 0));
}

void ThresholdSpec::decode_hw_byte(uint8_t b, int8_t& tau, bool& lambda_pos) {
  lambda_pos = (b & 0x80) != 0;
  const int v = b & 0x7F;
  tau = static_cast<int8_t>(v >= 64 ? v - 128 : v);
}

void ThresholdSpec::validate(size_t nof) const {
  if (tau_q.size() != nof || lambda_positive.size() != nof)
    throw UsageError("threshold arrays must have length nof");
  for (int8_t t : tau_q)
    if (t < -64 || t > 63) throw UsageError("tau_q outside the 7-bit range");
  if (int64_t{63} << shift > 32767) throw UsageError("threshold shift too large for 16-bit comparison");
}

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
    case LayerKind::GroupedConv: return "grouped";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "dense") return LayerKind::Dense;
  if (s == "grouped" || s == "grouped-conv") return LayerKind::GroupedConv;
  throw UsageError("unknown layer kind '" + s + "'");
}

void LayerSpec::validate() const {
  if (nif == 0 || nof == 0 || fs == 0 || h_out == 0 || w_out == 0)
    throw UsageError("layer dimensions must be positive");
  if (kind == LayerKind::Dense && (fs != 1 || h_out != 1 || w_out != 1))
    throw UsageError("dense layer requires fs = h_out = w_out = 1");
  if (kind == LayerKind::GroupedConv) {
    if (group == 0 || group > nif || nif % group != 0)
      throw UsageError("grouped layer requires 0 < d <= nif and nif divisible by d");
  }
}

uint32_t LayerSpec::band_start(uint32_t k_out) const {
  if (kind != LayerKind::GroupedConv) return 0;
  return static_cast<uint32_t>((uint64_t{group} * k_out) % nif);
}

LayerSpec LayerSpec::conv(uint32_t nif, uint32_t nof, uint32_t fs, uint32_t h_out, uint32_t w_out) {
  return LayerSpec{LayerKind::Conv, nif, nof, fs, h_out, w_out, 0};
}

LayerSpec LayerSpec::dense(uint32_t nif, uint32_t nof) { return LayerSpec{LayerKind::Dense, nif, nof, 1, 1, 1, 0}; }

LayerSpec LayerSpec::grouped(uint32_t nif, uint32_t nof, uint32_t d, uint32_t fs, uint32_t h_out,
                             uint32_t w_out) {
  return LayerSpec{LayerKind::GroupedConv, nif, nof, fs, h_out, w_out, d};
}

// ------------------------------------------------------------- operations

uint32_t xnor_popcount(std::span<const uint32_t> a, std::span<const uint32_t> b, std::span<const uint32_t> mask) {
  if (a.size() != b.size() || a.size() != mask.size()) throw UsageError("xnor_popcount: length mismatch");
  uint32_t n = 0;
  for (size_t i = 0; i < a.size(); ++i) n += static_cast<uint32_t>(std::popcount(~(a[i] ^ b[i]) & mask[i]));
  return n;
}

ThresholdDerivation derive_threshold_channel(const BatchNormParams& bn, size_t k, uint32_t n_acc) {
  ThresholdDerivation d;
  if (bn.sigma[k] == 0.0) throw UsageError("batch-norm sigma must be nonzero");
  d.lambda = bn.gamma[k] / bn.sigma[k];
  if (d.lambda == 0.0) throw DegenerateBatchNormError("lambda = gamma/sigma is zero");
  d.kappa = bn.beta[k] + d.lambda * (bn.bias[k] - bn.mu[k]);
  d.tau_pm1 = -d.kappa / d.lambda;
  d.tau_pc = (d.tau_pm1 + n_acc) / 2.0;
  d.tau_pc_int = static_cast<int64_t>(d.lambda > 0 ? std::ceil(d.tau_pc) : std::floor(d.tau_pc));
  return d;
}

ThresholdSpec derive_threshold(const BatchNormParams& bn, uint32_t n_acc, uint32_t shift) {
  if (n_acc == 0) throw UsageError("n_acc must be positive");
  bn.validate(bn.size());
  if (shift > 9) throw UsageError("threshold shift too large for 16-bit comparison");
  ThresholdSpec th;
  th.shift = shift;
  th.tau_q.resize(bn.size());
  th.lambda_positive.resize(bn.size());
  for (size_t k = 0; k < bn.size(); ++k) {
    const auto d = derive_threshold_channel(bn, k, n_acc);
    int64_t q = d.tau_pc_int;
    if (shift > 0) {
      // round half up: floor((v + 2^(s-1)) / 2^s)
      const int64_t half = int64_t{1} << (shift - 1);
      q = (q + half) >> shift;  // arithmetic shift floors negatives
    }
    q = std::clamp<int64_t>(q, -64, 63);
    th.tau_q[k] = static_cast<int8_t>(q);
    th.lambda_positive[k] = d.lambda > 0 ? 1 : 0;
  }
  return th;
}

std::vector<uint32_t> accumulate_golden(const BinaryTensor& x, const WeightTensor& w, const LayerSpec& spec) {
  check_shapes(x, w, spec);
  const uint32_t nin = spec.inputs_per_output();
  const auto mask = low_mask(nin);
  std::vector<uint32_t> acc(size_t{spec.nof} * spec.h_out * spec.w_out, 0);
  const bool grouped = spec.kind == LayerKind::GroupedConv;
  std::vector<uint32_t> band;
  for (uint32_t ko = 0; ko < spec.nof; ++ko) {
    const uint32_t start = spec.band_start(ko);
    for (uint32_t i = 0; i < spec.h_out; ++i)
      for (uint32_t j = 0; j < spec.w_out; ++j) {
        uint32_t sum = 0;
        for (uint32_t fi = 0; fi < spec.fs; ++fi)
          for (uint32_t fj = 0; fj < spec.fs; ++fj) {
            auto px = x.pixel(i + fi, j + fj);
            if (grouped) {
              band = extract_bits(px, start, nin);
              sum += xnor_popcount(band, w.vec(ko, fi, fj), mask);
            } else {
              sum += xnor_popcount(px, w.vec(ko, fi, fj), mask);
            }
          }
        acc[(size_t{ko} * spec.h_out + i) * spec.w_out + j] = sum;
      }
  }
  return acc;
}

BinaryTensor binarize_accumulators(std::span<const uint32_t> acc, const ThresholdSpec& th, const LayerSpec& spec) {
  th.validate(spec.nof);
  if (acc.size() != size_t{spec.nof} * spec.h_out * spec.w_out) throw UsageError("accumulator count mismatch");
  BinaryTensor y(spec.nof, spec.h_out, spec.w_out);
  for (uint32_t ko = 0; ko < spec.nof; ++ko)
    for (uint32_t i = 0; i < spec.h_out; ++i)
      for (uint32_t j = 0; j < spec.w_out; ++j) {
        const uint32_t a = std::min(acc[(size_t{ko} * spec.h_out + i) * spec.w_out + j], kAccumulatorMax);
        y.set(ko, i, j, th.binarize(ko, a));
      }
  return y;
}

BinaryTensor conv_layer_golden(const BinaryTensor& x, const WeightTensor& w, const ThresholdSpec& th,
                               const LayerSpec& spec) {
  if (spec.kind == LayerKind::GroupedConv) throw UsageError("conv_layer_golden: grouped layer spec");
  return binarize_accumulators(accumulate_golden(x, w, spec), th, spec);
}

BinaryTensor grouped_conv_golden(const BinaryTensor& x, const WeightTensor& w, const ThresholdSpec& th,
                                 const LayerSpec& spec) {
  if (spec.kind != LayerKind::GroupedConv) throw UsageError("grouped_conv_golden: not a grouped layer spec");
  return binarize_accumulators(accumulate_golden(x, w, spec), th, spec);
}

BinaryTensor layer_golden(const BinaryTensor& x, const WeightTensor& w, const ThresholdSpec& th,
                          const LayerSpec& spec) {
  return binarize_accumulators(accumulate_golden(x, w, spec), th, spec);
}

BinaryTensor real_reference(const BinaryTensor& x, const WeightTensor& w, const BatchNormParams& bn,
                            const LayerSpec& spec) {
  check_shapes(x, w, spec);
  bn.validate(spec.nof);
  BinaryTensor y(spec.nof, spec.h_out, spec.w_out);
  const uint32_t nin = spec.inputs_per_output();
  for (uint32_t ko = 0; ko < spec.nof; ++ko) {
    const uint32_t start = spec.band_start(ko);
    for (uint32_t i = 0; i < spec.h_out; ++i)
      for (uint32_t j = 0; j < spec.w_out; ++j) {
        double t = 0;
        for (uint32_t fi = 0; fi < spec.fs; ++fi)
          for (uint32_t fj = 0; fj < spec.fs; ++fj)
            for (uint32_t ki = 0; ki < nin; ++ki) {
              const double xv = x.get(start + ki, i + fi, j + fj) ? 1.0 : -1.0;
              const double wv = w.get(ko, ki, fi, fj) ? 1.0 : -1.0;
              t += xv * wv;
            }
        const double pre = bn.bias[ko] + t;
        const double v = bn.gamma[ko] * (pre - bn.mu[ko]) / bn.sigma[ko] + bn.beta[ko];
        y.set(ko, i, j, v >= 0.0);
      }
  }
  return y;
}

// ------------------------------------------------------------ file format

namespace {
void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}
uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("tensor file truncated");
  return uint32_t{b[0]} | uint32_t{b[1]} << 8 | uint32_t{b[2]} << 16 | uint32_t{b[3]} << 24;
}
}  // namespace

void write_tensor(std::ostream& os, const BinaryTensor& t) {
  os.write("XBT1", 4);
  put_u32(os, t.channels());
  put_u32(os, t.height());
  put_u32(os, t.width());
  const auto bytes = t.payload_bytes();
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

BinaryTensor read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "XBT1") throw ParseError("bad tensor magic");
  const uint32_t c = get_u32(is), h = get_u32(is), w = get_u32(is);
  BinaryTensor t(c, h, w);
  std::vector<uint8_t> bytes(t.words().size() * 4);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw ParseError("tensor payload truncated");
  t.load_payload(bytes);
  if (!t.pad_bits_clear()) throw ParseError("tensor pad bits must be zero");
  return t;
}

void save_tensor(const std::string& path, const BinaryTensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot open " + path);
  write_tensor(os, t);
}

BinaryTensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot open " + path);
  return read_tensor(is);
}

}  // namespace xne
