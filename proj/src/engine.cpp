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
#include "xne/engine.hpp"

#include <algorithm>
#include <bit>

#include "xne/error.hpp"
#include "xne/golden.hpp"

namespace xne::engine {

namespace {

// Loops 0..2 (k_in_major, u_j, u_i) form one accumulation window; loop 3 is k_out_major.
constexpr size_t kWindowLoops = 3;
constexpr size_t kOutTileLoop = 3;

void set_bit_range(std::span<uint32_t> words, uint32_t lo, uint32_t hi) {
  for (uint32_t b = lo; b < hi; ++b) words[b / 32] |= uint32_t{1} << (b % 32);
}

}  // namespace

void JobDescriptor::validate(uint32_t tp) const {
  if (empty()) return;
  if (out_lanes > tp) throw UsageError("job output lanes exceed TP");
  if (n_out_tiles > 1 && out_lanes != tp) throw UsageError("multi-tile jobs need full TP-lane output tiles");
  if (weight_vec_bits == 0 || weight_vec_bits % 32 != 0 || weight_vec_bits > tp)
    throw UsageError("weight vector width must be a multiple of 32 bits and at most TP");
  if (nif == 0) throw UsageError("job needs at least one input channel");
  if (w_in != w_out + fs - 1) throw UsageError("job input width must equal w_out + fs - 1");
  if (pix_in % 4 != 0 || pix_out % 4 != 0) throw UsageError("pixel strides must be whole words");
  if (shift > 9) throw UsageError("threshold shift above 9");
  if (group > nif) throw UsageError("group width exceeds input channels");
  const uint64_t last_tile = uint64_t{in_tile_base} + uint64_t{n_out_tiles - 1} * in_tile_stride + n_in_tiles - 1;
  if (last_tile * tp >= nif) throw UsageError("job input tiles run past the input channels");
}

ucode::LoopGeometry JobDescriptor::geometry(uint32_t tp) const {
  ucode::LoopGeometry g;
  g.tile_bytes = tp / 8;
  g.block_bytes = out_lanes * weight_vec_bits / 8;
  g.pix_in = pix_in;
  g.pix_out = pix_out;
  g.w_in = w_in;
  g.fs = fs;
  g.h_out = h_out;
  g.w_out = w_out;
  g.n_in_tiles = n_in_tiles;
  g.n_out_tiles = n_out_tiles;
  g.in_tile_stride = in_tile_stride;
  return g;
}

std::span<const RegisterField> job_register_map() {
  static const RegisterField map[] = {
      {"WEIGHT_PTR", 0x00, &JobDescriptor::weight_ptr},
      {"THRESHOLD_PTR", 0x04, &JobDescriptor::threshold_ptr},
      {"INPUT_PTR", 0x08, &JobDescriptor::input_ptr},
      {"OUTPUT_PTR", 0x0C, &JobDescriptor::output_ptr},
      {"NIF", 0x10, &JobDescriptor::nif},
      {"IN_TILE_BASE", 0x14, &JobDescriptor::in_tile_base},
      {"N_IN_TILES", 0x18, &JobDescriptor::n_in_tiles},
      {"IN_TILE_STRIDE", 0x1C, &JobDescriptor::in_tile_stride},
      {"N_OUT_TILES", 0x20, &JobDescriptor::n_out_tiles},
      {"OUT_LANES", 0x24, &JobDescriptor::out_lanes},
      {"OUT_CH_BASE", 0x28, &JobDescriptor::out_channel_base},
      {"WEIGHT_VEC_BITS", 0x2C, &JobDescriptor::weight_vec_bits},
      {"FS", 0x30, &JobDescriptor::fs},
      {"H_OUT", 0x34, &JobDescriptor::h_out},
      {"W_OUT", 0x38, &JobDescriptor::w_out},
      {"W_IN", 0x3C, &JobDescriptor::w_in},
      {"PIX_IN", 0x40, &JobDescriptor::pix_in},
      {"PIX_OUT", 0x44, &JobDescriptor::pix_out},
      {"GROUP", 0x48, &JobDescriptor::group},
      {"SHIFT", 0x4C, &JobDescriptor::shift},
  };
  return map;
}

std::array<uint32_t, kJobSetBytes / 4> encode_job(const JobDescriptor& jd) {
  std::array<uint32_t, kJobSetBytes / 4> regs{};
  for (const auto& f : job_register_map()) regs[f.offset / 4] = jd.*(f.field);
  return regs;
}

JobDescriptor decode_job(std::span<const uint32_t> regs) {
  if (regs.size() < kJobSetBytes / 4) throw DecodeError("job register image too short");
  JobDescriptor jd;
  for (const auto& f : job_register_map()) jd.*(f.field) = regs[f.offset / 4];
  return jd;
}

RegisterFile::RegisterFile(uint32_t tp, const ucode::MicrocodeProgram& program) : tp_(tp) { load_microcode(program); }

void RegisterFile::load_microcode(const ucode::MicrocodeProgram& program) {
  generic_ = ucode::assemble(program).register_image();
  for (int b = 0; b < 4; ++b) generic_.push_back(static_cast<uint8_t>(tp_ >> (8 * b)));
  program_ = program;
}

void RegisterFile::offload(const JobDescriptor& jd) {
  if (!active_) {
    active_ = jd;
  } else if (!pending_) {
    pending_ = jd;
  } else {
    throw BusyError("both job register sets are occupied; wait for the end-of-job event");
  }
}

const JobDescriptor& RegisterFile::active() const {
  if (!active_) throw UsageError("no active job");
  return *active_;
}

bool RegisterFile::promote() {
  if (active_) throw UsageError("cannot promote while a job is active");
  if (!pending_) return false;
  active_ = std::move(pending_);
  pending_.reset();
  return true;
}

void RegisterFile::retire() { active_.reset(); }

uint16_t datapath_accumulate(std::span<const uint32_t> feature, std::span<const uint32_t> weight,
                             std::span<const uint32_t> mask, uint16_t acc, bool saturate) {
  uint32_t pc = 0;
  for (size_t i = 0; i < mask.size(); ++i) {
    const uint32_t f = i < feature.size() ? feature[i] : 0;
    const uint32_t w = i < weight.size() ? weight[i] : 0;
    pc += static_cast<uint32_t>(std::popcount(~(f ^ w) & mask[i]));
  }
  const uint32_t sum = uint32_t{acc} + pc;
  return static_cast<uint16_t>(saturate ? std::min(sum, kAccumulatorMax) : sum & 0xFFFF);
}

std::vector<uint32_t> threshold_binarize(std::span<const uint16_t> acc, std::span<const uint8_t> th, uint32_t shift,
                                         uint32_t valid_lanes) {
  std::vector<uint32_t> out(words_for_bits(acc.size()), 0);
  const uint32_t n = std::min<uint32_t>({valid_lanes, static_cast<uint32_t>(acc.size()), static_cast<uint32_t>(th.size())});
  for (uint32_t k = 0; k < n; ++k) {
    int8_t tau = 0;
    bool lp = false;
    ThresholdSpec::decode_hw_byte(th[k], tau, lp);
    const int32_t eff = static_cast<int32_t>(tau) * (int32_t{1} << shift);
    const int32_t a = acc[k];
    if (lp ? a >= eff : a <= eff) out[k / 32] |= uint32_t{1} << (k % 32);
  }
  return out;
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "idle";
    case Phase::Setup: return "setup";
    case Phase::FeatureLoad: return "feature-load";
    case Phase::Accumulate: return "accumulate";
    case Phase::Threshold: return "threshold";
    case Phase::Drain: return "drain";
  }
  return "?";
}

void EngineConfig::validate() const {
  if (tp < 32 || tp > 512 || !std::has_single_bit(tp)) throw UsageError("TP must be one of 32, 64, 128, 256, 512");
  if (timing.mem_latency == 0) throw UsageError("memory latency must be at least one cycle");
  if (contention.core_rate < 0 || contention.core_rate > 1 || contention.dma_rate < 0 || contention.dma_rate > 1)
    throw UsageError("background access rates must lie in [0, 1]");
}

Engine::Engine(EngineConfig cfg, mem::Memory* memory, mem::MemoryMap map)
    : cfg_((cfg.validate(), cfg)),
      memory_(memory),
      ic_(memory ? memory->map() : map, cfg.tp / 32, cfg.contention),
      rf_(cfg.tp),
      ports_(cfg.tp / 32),
      tp_words_(cfg.tp / 32) {
  if (cfg_.functional && memory_ == nullptr) throw UsageError("functional simulation needs a memory");
  acc_.assign(cfg_.tp, 0);
  feature_.assign(tp_words_, 0);
}

void Engine::offload(const JobDescriptor& jd) {
  jd.validate(cfg_.tp);
  rf_.offload(jd);
}

void Engine::step() {
  eoj_ = false;
  if (phase_ == Phase::Idle && (rf_.has_active() || rf_.promote())) start_job();
  const bool busy = phase_ != Phase::Idle || eoj_;
  controller();
  streamer();
  ucode_tick();
  if (busy) ++stats_.busy_cycles;
  ++cycle_;
}

uint64_t Engine::run_until_idle(uint64_t max_cycles) {
  const uint64_t start = cycle_;
  while (!idle()) {
    if (cycle_ - start >= max_cycles) throw Error("engine did not finish within the cycle budget");
    step();
  }
  return cycle_ - start;
}

EngineStats Engine::stats() const {
  EngineStats s = stats_;
  s.cycles = cycle_;
  s.memory = ic_.stats();
  return s;
}

void Engine::start_job() {
  job_ = rf_.active();
  if (!job_.empty()) us_ = ucode::ucode_init(rf_.program(), ucode::reference_ro_values(job_.geometry(cfg_.tp)));
  if (job_.empty() || us_.done) {
    finish_job();
    return;
  }
  std::fill(acc_.begin(), acc_.end(), 0);
  ucode_run_ = false;
  phase_ = Phase::Setup;
  countdown_ = cfg_.timing.job_setup;
  lane_ = 0;
  feature_ready_ = false;
}

void Engine::finish_job() {
  rf_.retire();
  phase_ = Phase::Idle;
  eoj_ = true;
  ++stats_.jobs_completed;
  if (eoj_cb_) eoj_cb_(cycle_);
}

bool Engine::window_end() const {
  const auto& loops = rf_.program().loops;
  for (size_t k = 0; k < kWindowLoops && k < loops.size(); ++k)
    if (it_.counter[k] + 1 != us_.ro[loops[k].range_source]) return false;
  return true;
}

void Engine::build_masks() {
  const uint32_t tp = cfg_.tp;
  const uint64_t tile =
      uint64_t{job_.in_tile_base} + uint64_t{it_.counter[kOutTileLoop]} * job_.in_tile_stride + it_.counter[0];
  const uint64_t cin0 = tile * tp;
  const uint32_t valid = cin0 < job_.nif ? static_cast<uint32_t>(std::min<uint64_t>(tp, job_.nif - cin0)) : 0;
  if (job_.group == 0) {
    uniform_mask_ = true;
    masks_.assign(tp_words_, 0);
    set_bit_range(masks_, 0, valid);
    return;
  }
  uniform_mask_ = false;
  masks_.assign(size_t{job_.out_lanes} * tp_words_, 0);
  const uint64_t nif = job_.nif;
  for (uint32_t l = 0; l < job_.out_lanes; ++l) {
    const uint64_t k = uint64_t{job_.out_channel_base} + uint64_t{it_.counter[kOutTileLoop]} * tp + l;
    const uint64_t start = (uint64_t{job_.group} * k) % nif;
    const uint64_t end = start + job_.group;
    std::span<uint32_t> m(masks_.data() + size_t{l} * tp_words_, tp_words_);
    // Band [start, end) wraps around nif.
    const std::pair<uint64_t, uint64_t> parts[] = {{start, std::min(end, nif)}, {0, end > nif ? end - nif : 0}};
    for (const auto& [lo, hi] : parts) {
      const uint64_t a = std::max(lo, cin0);
      const uint64_t b = std::min(hi, cin0 + valid);
      if (a < b) set_bit_range(m, static_cast<uint32_t>(a - cin0), static_cast<uint32_t>(b - cin0));
    }
  }
}

void Engine::capture_iteration() {
  it_ = ucode::current_offsets(us_);
  build_masks();
  const uint64_t tile =
      uint64_t{job_.in_tile_base} + uint64_t{it_.counter[kOutTileLoop]} * job_.in_tile_stride + it_.counter[0];
  const uint64_t cin0 = tile * cfg_.tp;
  const auto valid = static_cast<uint32_t>(std::min<uint64_t>(cfg_.tp, job_.nif - cin0));
  feature_fetch_.emplace();
  prepare(*feature_fetch_, uint64_t{job_.input_ptr} + it_.x, valid);
  weights_to_issue_ = job_.out_lanes;
  weights_issued_ = 0;
  threshold_wanted_ = window_end();
  ucode_run_ = true;
  feature_ready_ = false;
  lane_ = 0;
}

void Engine::controller() {
  switch (phase_) {
    case Phase::Idle:
      return;
    case Phase::Setup:
      if (countdown_ > 0) {
        --countdown_;
        return;
      }
      phase_ = Phase::FeatureLoad;
      [[fallthrough]];
    case Phase::FeatureLoad: {
      if (!feature_fetch_ && feature_fifo_.empty() && !feature_ready_) {
        // Next iteration: offsets come from an idle microcode processor.
        if (us_.busy() || ucode_run_) {
          ++stats_.feature_stall_cycles;
          return;
        }
        if (us_.done) {
          phase_ = Phase::Drain;
          return;
        }
        capture_iteration();
      }
      if (!feature_ready_) {
        if (feature_fifo_.empty() || feature_fifo_.front().ready > cycle_) {
          ++stats_.feature_stall_cycles;
          return;
        }
        feature_ready_ = true;
        countdown_ = cfg_.timing.feature_setup;
      }
      if (countdown_ > 0) {
        --countdown_;
        return;
      }
      if (cfg_.functional) {
        auto bits = payload(feature_fifo_.front());
        std::fill(feature_.begin(), feature_.end(), 0);
        std::copy_n(bits.begin(), std::min<size_t>(bits.size(), feature_.size()), feature_.begin());
      }
      feature_fifo_.erase(feature_fifo_.begin());
      ++stats_.feature_vectors;
      feature_ready_ = false;
      phase_ = Phase::Accumulate;
      lane_ = 0;
      return;
    }
    case Phase::Accumulate: {
      if (weight_fifo_.empty() || weight_fifo_.front().ready > cycle_) {
        ++stats_.weight_stall_cycles;
        return;
      }
      const size_t mofs = uniform_mask_ ? 0 : size_t{lane_} * tp_words_;
      std::span<const uint32_t> mask(masks_.data() + mofs, tp_words_);
      uint32_t mask_bits = 0;
      for (uint32_t w : mask) mask_bits += static_cast<uint32_t>(std::popcount(w));
      if (cfg_.functional) {
        const auto w = payload(weight_fifo_.front());
        acc_[lane_] = datapath_accumulate(feature_, w, mask, acc_[lane_], cfg_.saturate);
        stats_.max_accumulator = std::max<uint32_t>(stats_.max_accumulator, acc_[lane_]);
      }
      weight_fifo_.erase(weight_fifo_.begin());
      stats_.ops += 2ull * mask_bits;
      ++stats_.accumulate_cycles;
      ++stats_.weight_vectors;
      if (++lane_ == job_.out_lanes) {
        phase_ = threshold_wanted_ ? Phase::Threshold : Phase::FeatureLoad;
        feature_ready_ = false;
        countdown_ = cfg_.timing.threshold_setup;
      }
      return;
    }
    case Phase::Threshold: {
      if (!threshold_buf_ || threshold_buf_->ready > cycle_) {
        ++stats_.threshold_stall_cycles;
        return;
      }
      if (countdown_ > 0) {
        --countdown_;
        return;
      }
      if (out_fifo_.size() >= kOutputFifoDepth) {
        ++stats_.sink_stall_cycles;
        return;
      }
      OutputVector ov;
      ov.addr = uint64_t{job_.output_ptr} + it_.y;
      ov.lanes = job_.out_lanes;
      if (cfg_.functional) {
        const auto words = payload(*threshold_buf_);
        std::vector<uint8_t> th(job_.out_lanes);
        for (uint32_t k = 0; k < job_.out_lanes; ++k) th[k] = static_cast<uint8_t>(words[k / 4] >> (8 * (k % 4)));
        ov.bits = threshold_binarize(std::span<const uint16_t>(acc_.data(), job_.out_lanes), th, job_.shift,
                                     job_.out_lanes);
      } else {
        ov.bits.assign(words_for_bits(job_.out_lanes), 0);
      }
      out_fifo_.push_back(std::move(ov));
      threshold_buf_.reset();
      threshold_wanted_ = false;
      std::fill(acc_.begin(), acc_.end(), 0);
      phase_ = Phase::FeatureLoad;
      return;
    }
    case Phase::Drain:
      if (out_fifo_.empty() && !sink_write_) finish_job();
      return;
  }
}

uint64_t Engine::fold(uint64_t addr) const {
  if (cfg_.functional) return addr;
  const auto& map = ic_.map();
  const auto& r = map.region(map.sram_powered ? mem::Region::SharedSram : mem::Region::SharedScm);
  return r.base + (addr >= r.base ? addr - r.base : addr) % r.size;
}

void Engine::prepare(Transfer& t, uint64_t addr, uint32_t bits) const {
  t.addr = addr;
  t.bits = bits;
  const uint32_t n = mem::words_for_vector(addr, bits);
  const uint64_t lo = addr / mem::kWordBytes * mem::kWordBytes;
  t.words.resize(n);
  for (uint32_t i = 0; i < n; ++i) t.words[i] = lo + uint64_t{i} * mem::kWordBytes;
  t.data.assign(n, 0);
  t.granted.assign(n, 0);
  t.remaining = n;
  t.ready = 0;
}

std::vector<uint32_t> Engine::payload(const Transfer& t) const {
  return mem::realign(t.data, static_cast<uint32_t>(t.addr % mem::kWordBytes), t.bits);
}

void Engine::issue(Transfer& t, bool write) {
  req_.clear();
  std::array<uint32_t, 16> idx{};
  for (uint32_t i = 0; i < t.words.size() && req_.size() < ports_; ++i) {
    if (t.granted[i]) continue;
    idx[req_.size()] = i;
    req_.push_back({static_cast<uint32_t>(req_.size()), fold(t.words[i]), write});
  }
  grant_.resize(req_.size());
  ic_.cycle(req_, grant_);
  for (size_t k = 0; k < req_.size(); ++k) {
    if (!grant_[k]) continue;
    const uint32_t i = idx[k];
    t.granted[i] = 1;
    --t.remaining;
    if (!cfg_.functional) continue;
    if (write) {
      const uint32_t w = t.data[i];
      const uint8_t bytes[4] = {static_cast<uint8_t>(w), static_cast<uint8_t>(w >> 8), static_cast<uint8_t>(w >> 16),
                                static_cast<uint8_t>(w >> 24)};
      memory_->write(t.words[i], bytes);
    } else {
      t.data[i] = memory_->read_word(t.words[i]);
    }
  }
  if (t.remaining == 0) t.ready = cycle_ + cfg_.timing.mem_latency;
}

void Engine::streamer() {
  const bool sink_ok = !sink_blocked_ || !sink_blocked_(cycle_);
  if (sink_ok && (sink_write_ || !out_fifo_.empty())) {
    if (!sink_write_) {
      const auto& ov = out_fifo_.front();
      sink_write_.emplace();
      // Whole words: lanes past the tile are pad bits of the output pixel.
      prepare(*sink_write_, ov.addr, static_cast<uint32_t>(ov.bits.size() * 32));
      std::copy_n(ov.bits.begin(), std::min(ov.bits.size(), sink_write_->data.size()), sink_write_->data.begin());
    }
    issue(*sink_write_, true);
    if (sink_write_->remaining == 0) {
      sink_write_.reset();
      out_fifo_.erase(out_fifo_.begin());
      ++stats_.output_vectors;
    }
    return;
  }
  if (feature_fetch_ && feature_fifo_.size() < kInputFifoDepth) {
    if (feature_fetch_->words.empty()) {
      feature_fetch_->ready = cycle_ + cfg_.timing.mem_latency;
      feature_fifo_.push_back(std::move(*feature_fetch_));
      feature_fetch_.reset();
    } else {
      issue(*feature_fetch_, false);
      if (feature_fetch_->remaining == 0) {
        feature_fifo_.push_back(std::move(*feature_fetch_));
        feature_fetch_.reset();
      }
      return;
    }
  }
  const bool weight_credit = weight_fifo_.size() + (weight_fetch_ ? 1 : 0) < kWeightFifoDepth;
  if (weight_fetch_ || (weights_issued_ < weights_to_issue_ && weight_credit)) {
    if (!weight_fetch_) {
      const uint32_t vec_bytes = job_.weight_vec_bits / 8;
      weight_fetch_.emplace();
      prepare(*weight_fetch_, uint64_t{job_.weight_ptr} + it_.w + uint64_t{weights_issued_} * vec_bytes,
              job_.weight_vec_bits);
      ++weights_issued_;
    }
    issue(*weight_fetch_, false);
    if (weight_fetch_->remaining == 0) {
      weight_fifo_.push_back(std::move(*weight_fetch_));
      weight_fetch_.reset();
    }
    return;
  }
  if (threshold_wanted_ && !threshold_buf_ && weights_issued_ == weights_to_issue_) {
    if (!threshold_fetch_) {
      threshold_fetch_.emplace();
      prepare(*threshold_fetch_,
              uint64_t{job_.threshold_ptr} + uint64_t{it_.counter[kOutTileLoop]} * job_.out_lanes,
              job_.out_lanes * 8);
    }
    issue(*threshold_fetch_, false);
    if (threshold_fetch_->remaining == 0) {
      threshold_buf_ = std::move(*threshold_fetch_);
      threshold_fetch_.reset();
    }
    return;
  }
  req_.clear();
  grant_.clear();
  ic_.cycle(req_, grant_);
}

void Engine::ucode_tick() {
  if (!ucode_run_) return;
  us_ = ucode::ucode_step(us_, rf_.program());
  if (us_.done || us_.boundary) ucode_run_ = false;
}

}  // namespace xne::engine
