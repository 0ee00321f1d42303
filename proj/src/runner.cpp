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
#include "xne/runner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <tuple>

#include "xne/error.hpp"

namespace xne::runner {

namespace {

uint32_t ceil_div(uint64_t a, uint64_t b) { return static_cast<uint32_t>((a + b - 1) / b); }
uint64_t align4(uint64_t v) { return (v + 3) / 4 * 4; }

struct TileRange {
  uint32_t first = 0, count = 0;
};

// Input tiles touched by the bands of output channels [k0, k0 + lanes).
TileRange band_tiles(const LayerSpec& s, uint32_t tp, uint32_t k0, uint32_t lanes, uint32_t n_in) {
  if (s.kind != LayerKind::GroupedConv) return {0, n_in};
  uint32_t lo = n_in, hi = 0;
  for (uint32_t k = k0; k < k0 + lanes; ++k) {
    const uint32_t start = s.band_start(k);
    const uint32_t end = start + s.group;
    if (end > s.nif) return {0, n_in};
    lo = std::min(lo, start / tp);
    hi = std::max(hi, (end - 1) / tp);
  }
  return {lo, hi - lo + 1};
}

}  // namespace

void TilePlan::place(const Placement& in, const Placement& out, const Placement& w, const Placement& th) {
  input = in;
  output = out;
  weights = w;
  thresholds = th;
  for (auto& j : jobs) {
    j.input_ptr += static_cast<uint32_t>(in.addr);
    j.output_ptr += static_cast<uint32_t>(out.addr);
    j.weight_ptr += static_cast<uint32_t>(w.addr);
    j.threshold_ptr += static_cast<uint32_t>(th.addr);
  }
}

TilePlan plan_layer(const LayerSpec& spec, uint32_t tp, uint32_t max_out_lanes) {
  spec.validate();
  if (tp < 32 || tp > 512 || (tp & (tp - 1)) != 0) throw UsageError("TP must be one of 32, 64, 128, 256, 512");
  TilePlan p;
  p.spec = spec;
  p.tp = tp;
  // Output tiles start on word boundaries so the sink writes whole words.
  uint32_t cap = max_out_lanes == 0 ? tp : std::min(max_out_lanes, tp);
  cap = std::max(32u, cap / 32 * 32);
  p.out_tile_lanes = cap;
  p.n_in_tiles = ceil_div(spec.nif, tp);
  p.n_out_tiles = ceil_div(spec.nof, cap);
  p.weight_vec_bits = spec.nif <= tp ? ceil_div(spec.nif, 32) * 32 : tp;
  for (uint32_t t = 0; t < p.n_in_tiles; ++t) p.in_tile_valid.push_back(std::min(tp, spec.nif - t * tp));
  for (uint32_t t = 0; t < p.n_out_tiles; ++t) p.out_tile_valid.push_back(std::min(cap, spec.nof - t * cap));

  engine::JobDescriptor base;
  base.nif = spec.nif;
  base.weight_vec_bits = p.weight_vec_bits;
  base.fs = spec.fs;
  base.h_out = spec.h_out;
  base.w_out = spec.w_out;
  base.w_in = spec.w_in();
  base.pix_in = ceil_div(spec.nif, 32) * 4;
  base.pix_out = ceil_div(spec.nof, 32) * 4;
  base.group = spec.kind == LayerKind::GroupedConv ? spec.group : 0;

  auto add_job = [&](uint32_t first_out_tile, uint32_t n_out_tiles, uint32_t lanes, TileRange in, uint32_t stride) {
    engine::JobDescriptor j = base;
    j.out_channel_base = first_out_tile * cap;
    j.n_out_tiles = n_out_tiles;
    j.out_lanes = lanes;
    j.in_tile_base = in.first;
    j.n_in_tiles = in.count;
    j.in_tile_stride = stride;
    j.input_ptr = in.first * (tp / 8);
    j.output_ptr = j.out_channel_base / 8;
    j.threshold_ptr = j.out_channel_base;
    j.weight_ptr = static_cast<uint32_t>(p.weight_stream_bytes);
    p.job_weight_offset.push_back(p.weight_stream_bytes);
    p.weight_stream_bytes +=
        uint64_t{n_out_tiles} * spec.fs * spec.fs * in.count * lanes * (p.weight_vec_bits / 8);
    p.jobs.push_back(j);
  };

  const uint32_t full = cap == tp ? spec.nof / tp : 0;
  std::vector<TileRange> ranges;
  for (uint32_t t = 0; t < p.n_out_tiles; ++t)
    ranges.push_back(band_tiles(spec, tp, t * cap, p.out_tile_valid[t], p.n_in_tiles));

  uint32_t next = 0;
  if (full > 0) {
    // One job for all full tiles when the input window is uniform.
    uint32_t len = 0;
    for (uint32_t t = 0; t < full; ++t) len = std::max(len, ranges[t].count);
    const int64_t stride = full > 1 ? int64_t{ranges[1].first} - ranges[0].first : 0;
    bool uniform = stride >= 0;
    for (uint32_t t = 0; uniform && t < full; ++t) {
      const int64_t first = int64_t{ranges[0].first} + stride * t;
      uniform = ranges[t].first >= first && ranges[t].first + ranges[t].count <= first + len &&
                first + len <= p.n_in_tiles;
    }
    if (uniform) {
      add_job(0, full, tp, {ranges[0].first, len}, static_cast<uint32_t>(stride));
      next = full;
    }
  }
  for (uint32_t t = next; t < p.n_out_tiles; ++t) add_job(t, 1, p.out_tile_valid[t], ranges[t], 0);
  p.threshold_bytes = spec.nof;
  p.dma.push_back({"weights", mem::Region::HyperRam, mem::Region::SharedSram, spec.weight_bits()});
  return p;
}

std::vector<uint8_t> pack_weights(const TilePlan& plan, const WeightTensor& w) {
  const auto& s = plan.spec;
  if (w.nof() != s.nof || w.nin() != s.inputs_per_output() || w.fs() != s.fs)
    throw UsageError("weight tensor does not match the layer");
  std::vector<uint8_t> out(plan.weight_stream_bytes, 0);
  const uint32_t vec_bytes = plan.weight_vec_bits / 8;
  const uint32_t tp = plan.tp;
  for (size_t jn = 0; jn < plan.jobs.size(); ++jn) {
    const auto& j = plan.jobs[jn];
    uint64_t ofs = plan.job_weight_offset[jn];
    for (uint32_t ko = 0; ko < j.n_out_tiles; ++ko)
      for (uint32_t ui = 0; ui < s.fs; ++ui)
        for (uint32_t uj = 0; uj < s.fs; ++uj)
          for (uint32_t ki = 0; ki < j.n_in_tiles; ++ki) {
            const uint64_t cin0 = (uint64_t{j.in_tile_base} + uint64_t{ko} * j.in_tile_stride + ki) * tp;
            for (uint32_t l = 0; l < j.out_lanes; ++l, ofs += vec_bytes) {
              const uint32_t k = j.out_channel_base + ko * tp + l;
              const uint32_t start = s.kind == LayerKind::GroupedConv ? s.band_start(k) : 0;
              for (uint32_t b = 0; b < plan.weight_vec_bits; ++b) {
                const uint64_t c = cin0 + b;
                if (c >= s.nif) break;
                bool bit = false;
                if (s.kind == LayerKind::GroupedConv) {
                  const uint32_t t = static_cast<uint32_t>((c + s.nif - start) % s.nif);
                  if (t >= s.group) continue;
                  bit = w.get(k, t, ui, uj);
                } else {
                  bit = w.get(k, static_cast<uint32_t>(c), ui, uj);
                }
                if (bit) out[ofs + b / 8] |= static_cast<uint8_t>(1u << (b % 8));
              }
            }
          }
  }
  return out;
}

std::vector<uint8_t> pack_thresholds(const ThresholdSpec& th) {
  std::vector<uint8_t> out(th.size());
  for (size_t k = 0; k < th.size(); ++k) out[k] = th.hw_byte(k);
  return out;
}

uint32_t minimal_shift(uint32_t n_acc) {
  uint32_t s = 0;
  while ((uint32_t{63} << s) < n_acc && s < 9) ++s;
  return s;
}

ThresholdSpec random_thresholds(uint32_t nof, uint32_t n_acc, std::mt19937_64& rng) {
  ThresholdSpec th;
  th.shift = minimal_shift(n_acc);
  const int hi = std::min(63, static_cast<int>((n_acc >> th.shift) + 1));
  std::uniform_int_distribution<int> tau(-1, hi);
  std::bernoulli_distribution sign(0.5);
  for (uint32_t k = 0; k < nof; ++k) {
    th.tau_q.push_back(static_cast<int8_t>(tau(rng)));
    th.lambda_positive.push_back(sign(rng) ? 1 : 0);
  }
  return th;
}

namespace {

engine::EngineConfig engine_config(const RunConfig& cfg, bool functional) {
  engine::EngineConfig ec;
  ec.tp = cfg.tp;
  ec.timing = cfg.timing;
  ec.contention = cfg.contention;
  ec.saturate = cfg.saturate;
  ec.functional = functional;
  return ec;
}

void run_jobs(engine::Engine& eng, const std::vector<engine::JobDescriptor>& jobs) {
  size_t next = 0;
  uint64_t guard = 0;
  while (next < jobs.size() || !eng.idle()) {
    // Double-buffered offload: keep the shadow set filled.
    if (next < jobs.size() && !eng.registers().has_pending()) eng.offload(jobs[next++]);
    eng.step();
    if (++guard > (uint64_t{1} << 36)) throw Error("layer simulation did not terminate");
  }
}

}  // namespace

LayerRunResult run_layer(const LayerSpec& spec, const BinaryTensor& x, const WeightTensor& w, const ThresholdSpec& th,
                         const RunConfig& cfg, std::vector<mem::TraceEntry>* trace) {
  spec.validate();
  if (x.channels() != spec.nif || x.height() != spec.h_in() || x.width() != spec.w_in())
    throw UsageError("input tensor does not match the layer");
  th.validate(spec.nof);
  TilePlan plan = plan_layer(spec, cfg.tp);
  const auto wbytes = pack_weights(plan, w);
  const auto tbytes = pack_thresholds(th);
  const auto xbytes = x.payload_bytes();
  BinaryTensor out(spec.nof, spec.h_out, spec.w_out);
  const uint64_t obytes = out.payload_bytes().size();

  mem::Memory memory;
  const auto& sram = memory.map().region(mem::Region::SharedSram);
  Placement pin{sram.id, sram.base, xbytes.size()};
  Placement pout{sram.id, align4(pin.addr + pin.bytes), obytes};
  Placement pw{sram.id, align4(pout.addr + pout.bytes), wbytes.size()};
  Placement pth{sram.id, align4(pw.addr + pw.bytes), tbytes.size()};
  if (pth.addr + pth.bytes > sram.end()) throw CapacityError("layer buffers do not fit the shared SRAM");
  plan.place(pin, pout, pw, pth);
  for (auto& j : plan.jobs) j.shift = th.shift;
  memory.write(pin.addr, xbytes);
  memory.write(pw.addr, wbytes);
  memory.write(pth.addr, tbytes);

  engine::Engine eng(engine_config(cfg, true), &memory);
  eng.enable_trace(trace != nullptr);
  run_jobs(eng, plan.jobs);

  LayerRunResult r;
  r.stats = eng.stats();
  r.cycles = r.stats.busy_cycles;
  r.output = std::move(out);
  r.output.load_payload(memory.read(pout.addr, obytes));
  if (trace) *trace = eng.trace();
  return r;
}

engine::EngineStats simulate_layer_timing(const LayerSpec& spec, const RunConfig& cfg, energy::MemoryMode mode,
                                          uint32_t max_out_lanes) {
  LayerSpec slice = spec;
  uint32_t rows = std::max(1u, std::min(cfg.sim_rows, spec.h_out));
  if (spec.h_out % rows != 0) rows = 1;
  slice.h_out = rows;
  TilePlan plan = plan_layer(slice, cfg.tp, max_out_lanes);
  // Buffers are laid out back to back; timing-only runs fold them into the memory.
  const uint64_t in_bytes = uint64_t{slice.h_in()} * slice.w_in() * ceil_div(slice.nif, 32) * 4;
  const uint64_t out_bytes = uint64_t{slice.h_out} * slice.w_out * ceil_div(slice.nof, 32) * 4;
  mem::MemoryMap map = mem::MemoryMap::defaults();
  map.sram_powered = mode != energy::MemoryMode::ScmOnly;
  const auto& r = map.region(map.sram_powered ? mem::Region::SharedSram : mem::Region::SharedScm);
  Placement pin{r.id, r.base, in_bytes};
  Placement pout{r.id, align4(pin.addr + in_bytes), out_bytes};
  Placement pw{r.id, align4(pout.addr + out_bytes), plan.weight_stream_bytes};
  Placement pth{r.id, align4(pw.addr + pw.bytes), plan.threshold_bytes};
  plan.place(pin, pout, pw, pth);

  engine::Engine eng(engine_config(cfg, false), nullptr, map);
  run_jobs(eng, plan.jobs);
  auto s = eng.stats();
  const uint64_t f = spec.h_out / rows;
  for (uint64_t* v : {&s.cycles, &s.busy_cycles, &s.accumulate_cycles, &s.weight_stall_cycles, &s.feature_stall_cycles,
                      &s.threshold_stall_cycles, &s.sink_stall_cycles, &s.ops, &s.feature_vectors, &s.weight_vectors,
                      &s.output_vectors, &s.memory.engine_requests, &s.memory.engine_grants, &s.memory.scm_accesses,
                      &s.memory.sram_accesses, &s.memory.background_requests, &s.memory.background_grants})
    *v *= f;
  return s;
}

namespace {

using SimKey = std::tuple<int, uint32_t, uint32_t, uint32_t, uint32_t, uint32_t, uint32_t, uint32_t, int>;

energy::OperatingPoint layer_point(const energy::OperatingPoint& op, const energy::EnergyCoefficients& c,
                                   bool marshaled) {
  energy::OperatingPoint p = op;
  if (op.mode == energy::MemoryMode::SramMarshal && !marshaled) p.fj_per_op = c.sram_fj_per_op;
  return p;
}

}  // namespace

ExecutionReport run_network(const NetworkDescriptor& nd, const energy::OperatingPoint& op, const RunConfig& cfg) {
  nd.validate();
  op.validate();
  cfg.coeffs.validate();
  ExecutionReport rep;
  rep.network = nd.name;
  rep.op_point = op.name;
  rep.tp = cfg.tp;
  rep.freq_hz = op.freq_hz;
  rep.weight_bytes = nd.weight_bytes();
  rep.peak_activation_bytes = nd.peak_activation_bytes();
  if (nd.layers.empty()) return rep;

  const auto map = mem::MemoryMap::defaults();
  const uint64_t scm = map.region(mem::Region::SharedScm).size;
  const uint64_t sram = map.region(mem::Region::SharedSram).size;
  const uint64_t staging_bits = (sram - kActivationBudgetBytes) * 8;
  switch (op.mode) {
    case energy::MemoryMode::ScmOnly:
      if (rep.weight_bytes + rep.peak_activation_bytes > scm)
        throw CapacityError(nd.name + " needs " + std::to_string(rep.weight_bytes + rep.peak_activation_bytes) +
                            " bytes and does not fit the shared SCM");
      break;
    case energy::MemoryMode::Sram:
    case energy::MemoryMode::SramMarshal:
      if (rep.peak_activation_bytes > kActivationBudgetBytes)
        throw CapacityError("activation buffers exceed the on-chip budget");
      if (rep.weight_bytes + rep.peak_activation_bytes > scm + sram)
        throw CapacityError(nd.name + " weights do not fit on chip; stream them from HyperRAM");
      break;
    case energy::MemoryMode::HyperRam:
      if (rep.peak_activation_bytes > kActivationBudgetBytes)
        throw CapacityError("activation buffers exceed the on-chip budget");
      if (rep.weight_bytes > map.region(mem::Region::HyperRam).size)
        throw CapacityError("weights exceed the HyperRAM");
      break;
  }

  std::map<SimKey, engine::EngineStats> cache;
  const double bits_per_cycle = energy::kHyperRamBitsPerSecond / op.freq_hz;
  uint64_t prefetched = 0;
  for (size_t i = 0; i < nd.layers.size(); ++i) {
    const auto& l = nd.layers[i];
    const auto& s = l.spec;
    LayerReport lr;
    lr.name = l.name;
    lr.spec = s;
    lr.ops = s.ops();
    lr.weight_bits = s.weight_bits();
    // Dense layers too large for half the staging buffer run as sequential filter tiles.
    uint32_t lanes = 0;
    if (s.kind == LayerKind::Dense && lr.weight_bits * 2 > staging_bits)
      lanes = static_cast<uint32_t>(std::min<uint64_t>(cfg.tp, staging_bits / 2 / s.nif));
    const SimKey key{static_cast<int>(s.kind), s.nif, s.nof, s.fs, s.h_out, s.w_out, s.group, lanes,
                     static_cast<int>(op.mode)};
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, simulate_layer_timing(s, cfg, op.mode, lanes)).first;
    const auto& st = it->second;
    lr.compute_cycles = st.busy_cycles;
    const double c = static_cast<double>(lr.compute_cycles);
    lr.trace.ops = lr.ops;
    lr.trace.sram_accesses = st.memory.sram_accesses;
    lr.trace.scm_accesses = st.memory.scm_accesses;

    double t = c;
    if (op.mode == energy::MemoryMode::HyperRam) {
      const bool streaming = uint64_t{s.h_out} * s.w_out == 1;
      const double remaining = static_cast<double>(lr.weight_bits - std::min(prefetched, lr.weight_bits));
      const double fetch = remaining / bits_per_cycle;
      double window = 0;
      if (streaming) {
        t = std::max(c, fetch);
        window = t - fetch;
      } else {
        t = fetch + c;  // every output pixel needs the whole filter set
        window = c;
      }
      uint64_t next_prefetch = 0;
      if (i + 1 < nd.layers.size()) {
        const double held = streaming ? static_cast<double>(staging_bits) / 2 : static_cast<double>(lr.weight_bits);
        const double free_bits = std::max(0.0, static_cast<double>(staging_bits) - held);
        next_prefetch = static_cast<uint64_t>(
            std::min({static_cast<double>(nd.layers[i + 1].spec.weight_bits()), free_bits, window * bits_per_cycle}));
      }
      lr.fetch_cycles = static_cast<uint64_t>(std::llround(fetch + static_cast<double>(next_prefetch) / bits_per_cycle));
      lr.trace.hyperram_bits = lr.weight_bits;
      prefetched = next_prefetch;
    } else if (op.mode == energy::MemoryMode::SramMarshal) {
      const double direct = cfg.coeffs.sram_fj_per_op * static_cast<double>(lr.ops);
      const double marshal = cfg.coeffs.marshal_fj_per_op * static_cast<double>(lr.ops) +
                             cfg.coeffs.marshal_pj_per_bit * 1e3 * static_cast<double>(lr.weight_bits);
      lr.marshaled = (lr.weight_bits + 7) / 8 <= scm && marshal < direct;
      if (lr.marshaled) {
        lr.trace.marshal_bits = lr.weight_bits;
        const double m = std::ceil(static_cast<double>(lr.weight_bits) / 32.0);
        lr.fetch_cycles = static_cast<uint64_t>(m);
        t = std::max(c, m);
      }
    }
    lr.cycles = static_cast<uint64_t>(std::llround(t));
    lr.exposed_cycles = lr.cycles - lr.compute_cycles;
    lr.memory_bound = lr.fetch_cycles > lr.compute_cycles;
    lr.trace.seconds = static_cast<double>(lr.cycles) / op.freq_hz;
    lr.energy = energy::account_energy(lr.trace, cfg.coeffs, layer_point(op, cfg.coeffs, lr.marshaled));

    rep.total_cycles += lr.cycles;
    rep.compute_cycles += lr.compute_cycles;
    rep.total_ops += lr.ops;
    rep.sram_bits += lr.trace.sram_accesses * 32;
    rep.scm_bits += lr.trace.scm_accesses * 32;
    rep.hyperram_bits += lr.trace.hyperram_bits;
    rep.marshal_bits += lr.trace.marshal_bits;
    rep.energy += lr.energy;
    rep.layers.push_back(std::move(lr));
  }
  return rep;
}

void ExecutionReport::write_text(std::ostream& os) const {
  const auto flags = os.flags();
  os << "network        " << network << "\n"
     << "operating point " << op_point << " (" << std::fixed << std::setprecision(1) << freq_hz / 1e6 << " MHz)\n"
     << "TP             " << tp << "\n"
     << "layers         " << layers.size() << "\n"
     << "ops            " << total_ops << "\n"
     << "cycles         " << total_cycles << " (compute " << compute_cycles << ")\n"
     << std::setprecision(1) << "op/cycle       " << op_per_cycle() << "\n"
     << std::setprecision(2) << "frame time     " << seconds_per_frame() * 1e3 << " ms\n"
     << "fps            " << fps() << "\n"
     << std::setprecision(4) << "energy         " << mj_per_frame() << " mJ/frame\n"
     << "  compute      " << energy.compute_j * 1e3 << " mJ\n"
     << "  memory       " << energy.memory_j * 1e3 << " mJ\n"
     << "  dma          " << energy.dma_j * 1e3 << " mJ\n"
     << "  marshal      " << energy.marshal_j * 1e3 << " mJ\n"
     << "  leakage      " << energy.leakage_j * 1e3 << " mJ\n"
     << "traffic bits   sram " << sram_bits << ", scm " << scm_bits << ", hyperram " << hyperram_bits
     << ", marshal " << marshal_bits << "\n"
     << "weights        " << weight_bytes << " B, peak activations " << peak_activation_bytes << " B\n";
  if (!layers.empty()) {
    os << "\n" << std::left << std::setw(10) << "layer" << std::right << std::setw(14) << "ops" << std::setw(12)
       << "cycles" << std::setw(12) << "exposed" << std::setw(9) << "bound" << std::setw(12) << "uJ" << "\n";
    for (const auto& l : layers)
      os << std::left << std::setw(10) << l.name << std::right << std::setw(14) << l.ops << std::setw(12) << l.cycles
         << std::setw(12) << l.exposed_cycles << std::setw(9) << (l.memory_bound ? "memory" : "compute")
         << std::setw(12) << std::setprecision(2) << l.energy.total() * 1e6 << "\n";
  }
  os.flags(flags);
}

void ExecutionReport::write_csv(std::ostream& os) const {
  const auto flags = os.flags();
  os << "layer,kind,nif,nof,fs,h_out,w_out,group,ops,compute_cycles,fetch_cycles,exposed_cycles,cycles,bound,"
        "weight_bits,marshaled,energy_uj\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& l : layers)
    os << l.name << ',' << to_string(l.spec.kind) << ',' << l.spec.nif << ',' << l.spec.nof << ',' << l.spec.fs << ','
       << l.spec.h_out << ',' << l.spec.w_out << ',' << l.spec.group << ',' << l.ops << ',' << l.compute_cycles << ','
       << l.fetch_cycles << ',' << l.exposed_cycles << ',' << l.cycles << ',' << (l.memory_bound ? "memory" : "compute")
       << ',' << l.weight_bits << ',' << (l.marshaled ? 1 : 0) << ',' << l.energy.total() * 1e6 << '\n';
  os << "total,,,,,,,," << total_ops << ',' << compute_cycles << ",,," << total_cycles << ",,"
     << weight_bytes * 8 << ",," << energy.total() * 1e6 << '\n';
  os.flags(flags);
}

std::string select_mode(const NetworkDescriptor& nd, const mem::MemoryMap& map) {
  const uint64_t need = nd.weight_bytes() + nd.peak_activation_bytes();
  if (need <= map.region(mem::Region::SharedScm).size) return "scm-0v4";
  if (nd.peak_activation_bytes() <= kActivationBudgetBytes &&
      need <= map.region(mem::Region::SharedScm).size + map.region(mem::Region::SharedSram).size)
    return "marshal-0v6";
  return "hyperram";
}

VerifyResult verify_against_golden(const NetworkDescriptor& nd, uint64_t seed, const VerifyOptions& opt) {
  std::mt19937_64 rng(seed);
  VerifyResult res;
  BinaryTensor cur;
  bool have = false;
  for (size_t i = 0; i < nd.layers.size(); ++i) {
    const auto& s = nd.layers[i].spec;
    s.validate();
    BinaryTensor x = have && cur.channels() == s.nif && cur.height() == s.h_in() && cur.width() == s.w_in()
                         ? cur
                         : BinaryTensor::random(s.nif, s.h_in(), s.w_in(), rng);
    const auto w = WeightTensor::random(s.nof, s.inputs_per_output(), s.fs, rng);
    const auto th = random_thresholds(s.nof, s.n_acc(), rng);
    const auto golden = layer_golden(x, w, th, s);
    auto th_engine = th;
    if (opt.corrupt_threshold_channel >= 0 && static_cast<uint32_t>(opt.corrupt_threshold_channel) < s.nof)
      th_engine.lambda_positive[static_cast<size_t>(opt.corrupt_threshold_channel)] ^= 1;
    const auto got = run_layer(s, x, w, th_engine, opt.run).output;
    for (uint32_t h = 0; h < s.h_out; ++h)
      for (uint32_t ww = 0; ww < s.w_out; ++ww)
        for (uint32_t c = 0; c < s.nof; ++c) {
          if (got.get(c, h, ww) == golden.get(c, h, ww)) continue;
          if (res.mismatches++ == 0) {
            res.layer = static_cast<int>(i);
            res.c = c;
            res.h = h;
            res.w = ww;
          }
        }
    if (res.mismatches > 0) {
      res.passed = false;
      res.message = "layer " + std::to_string(res.layer) + " (" + nd.layers[i].name + "): " +
                    std::to_string(res.mismatches) + " mismatching bits, first at channel " + std::to_string(res.c) +
                    ", row " + std::to_string(res.h) + ", column " + std::to_string(res.w);
      return res;
    }
    cur = golden;
    have = true;
  }
  return res;
}

NetworkDescriptor random_network(std::mt19937_64& rng, uint32_t max_layers) {
  auto uni = [&](uint32_t lo, uint32_t hi) { return std::uniform_int_distribution<uint32_t>(lo, hi)(rng); };
  const uint32_t fs_choice[] = {1, 3, 5};
  const uint32_t d_choice[] = {1, 2, 4};
  NetworkDescriptor nd;
  nd.name = "random";
  const uint32_t n = uni(1, std::max(1u, max_layers));
  uint32_t c = uni(1, 256), h = 0, w = 0;
  for (uint32_t i = 0; i < n; ++i) {
    LayerDesc l;
    l.name = "l" + std::to_string(i);
    const uint32_t nof = uni(1, 256);
    const uint32_t kind = uni(0, 4);  // dense, conv, grouped d = 1, 2, 4
    if (i == 0) {
      if (kind == 0) {
        l.spec = LayerSpec::dense(c, nof);
      } else {
        const uint32_t fs = fs_choice[uni(0, 2)];
        const uint32_t ho = uni(1, 8), wo = uni(1, 8);
        if (kind == 1) {
          l.spec = LayerSpec::conv(c, nof, fs, ho, wo);
        } else {
          const uint32_t d = d_choice[kind - 2];
          c = std::min(256u, (c + d - 1) / d * d);
          l.spec = LayerSpec::grouped(c, nof, d, fs, ho, wo);
        }
      }
      nd.input = {l.spec.nif, l.spec.h_in(), l.spec.w_in()};
    } else {
      std::vector<uint32_t> fits;
      for (uint32_t fs : fs_choice)
        if (fs <= h && fs <= w) fits.push_back(fs);
      const uint32_t fs = fits[uni(0, static_cast<uint32_t>(fits.size() - 1))];
      std::vector<uint32_t> ds;
      for (uint32_t d : d_choice)
        if (c % d == 0) ds.push_back(d);
      if (kind == 0 && h == 1 && w == 1) {
        l.spec = LayerSpec::dense(c, nof);
      } else if (kind <= 1) {
        l.spec = LayerSpec::conv(c, nof, fs, h - fs + 1, w - fs + 1);
      } else {
        l.spec = LayerSpec::grouped(c, nof, ds[uni(0, static_cast<uint32_t>(ds.size() - 1))], fs, h - fs + 1,
                                    w - fs + 1);
      }
    }
    c = l.spec.nof;
    h = l.spec.h_out;
    w = l.spec.w_out;
    nd.layers.push_back(l);
  }
  nd.validate();
  return nd;
}

}  // namespace xne::runner
