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
#include <algorithm>
#include <bit>
#include <json.hpp>

#include "xne/error.hpp"
#include "xne/runner.hpp"

namespace xne::runner {

TensorShape LayerDesc::output() const {
  if (pool == 0) return output_before_pool();
  if (pool == kGlobalPool) return {spec.nof, 1, 1};
  return {spec.nof, spec.h_out / pool, spec.w_out / pool};
}

TensorShape NetworkDescriptor::input_of(size_t i) const {
  const int src = layers.at(i).input;
  if (src < 0) return i == 0 ? input : layers[i - 1].output();
  return layers.at(static_cast<size_t>(src)).output();
}

void NetworkDescriptor::validate() const {
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const auto where = "layer " + std::to_string(i) + " (" + l.name + "): ";
    l.spec.validate();
    if (l.input >= static_cast<int>(i)) throw UsageError(where + "input must come from an earlier layer");
    if (l.shortcut >= static_cast<int>(i)) throw UsageError(where + "shortcut must come from an earlier layer");
    if (l.stride == 0) throw UsageError(where + "stride must be positive");
    if (l.pool != 0 && l.pool != kGlobalPool && (l.pool < 2 || l.spec.h_out % l.pool || l.spec.w_out % l.pool))
      throw UsageError(where + "pool size must divide the output");
    const TensorShape in = input_of(i);
    if (in.c != 0) {
      const auto& s = l.spec;
      bool ok = false;
      if (l.im2col > 0) {
        ok = s.nif == in.c * l.im2col * l.im2col && s.h_out * l.stride == in.h && s.w_out * l.stride == in.w;
      } else if (s.kind == LayerKind::Dense) {
        ok = uint64_t{s.nif} == uint64_t{in.c} * in.h * in.w;
      } else {
        const bool same = s.h_out * l.stride == in.h && s.w_out * l.stride == in.w;
        const bool valid = l.stride == 1 && s.h_in() == in.h && s.w_in() == in.w;
        ok = s.nif == in.c && (same || valid);
      }
      if (!ok) throw UsageError(where + "shape does not match its input");
    }
    if (l.shortcut >= 0 && layers[static_cast<size_t>(l.shortcut)].output() != l.output_before_pool())
      throw UsageError(where + "shortcut shape does not match the output");
  }
}

uint64_t NetworkDescriptor::ops() const {
  uint64_t n = 0;
  for (const auto& l : layers) n += l.spec.ops();
  return n;
}

uint64_t NetworkDescriptor::weight_bits() const {
  uint64_t n = 0;
  for (const auto& l : layers) n += l.spec.weight_bits();
  return n;
}

uint64_t NetworkDescriptor::largest_layer_weight_bytes() const {
  uint64_t n = 0;
  for (const auto& l : layers) n = std::max(n, (l.spec.weight_bits() + 7) / 8);
  return n;
}

uint64_t NetworkDescriptor::peak_activation_bytes() const {
  const size_t n = layers.size();
  if (n == 0) return 0;
  // Tensor t + 1: t = -1 is the network input, t >= 0 the (pooled) output of layer t.
  std::vector<int64_t> last_use(n + 1, -1);
  for (size_t j = 0; j < n; ++j) {
    const int src = layers[j].input < 0 ? static_cast<int>(j) - 1 : layers[j].input;
    last_use[static_cast<size_t>(src + 1)] = std::max<int64_t>(last_use[static_cast<size_t>(src + 1)], static_cast<int64_t>(j));
    if (layers[j].shortcut >= 0)
      last_use[static_cast<size_t>(layers[j].shortcut + 1)] =
          std::max<int64_t>(last_use[static_cast<size_t>(layers[j].shortcut + 1)], static_cast<int64_t>(j));
  }
  last_use[n] = static_cast<int64_t>(n);
  auto size_of = [&](size_t t) { return t == 0 ? input.compact_bytes() : layers[t - 1].output().compact_bytes(); };
  uint64_t peak = 0;
  for (size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<int64_t>(i);
    uint64_t live = 0, live_after = 0;
    for (size_t t = 0; t <= i; ++t) {
      if (last_use[t] >= ii) live += size_of(t);
      if (last_use[t] > ii) live_after += size_of(t);
    }
    const uint64_t out = layers[i].output_before_pool().compact_bytes();
    peak = std::max(peak, live + out);
    if (layers[i].pool != 0) peak = std::max(peak, live_after + out + layers[i].output().compact_bytes());
  }
  return peak;
}

namespace {

uint32_t get_u32(const nlohmann::json& j, const char* key, uint32_t def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer() || j[key].get<int64_t>() < 0)
    throw ParseError(std::string("field '") + key + "' must be a non-negative integer");
  return j[key].get<uint32_t>();
}

int get_int(const nlohmann::json& j, const char* key, int def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer");
  return j[key].get<int>();
}

}  // namespace

NetworkDescriptor NetworkDescriptor::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("network descriptor: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("network descriptor must be a JSON object");
  NetworkDescriptor nd;
  nd.name = j.value("name", std::string("network"));
  if (j.contains("input")) {
    const auto& in = j["input"];
    nd.input = {get_u32(in, "c", 0), get_u32(in, "h", 0), get_u32(in, "w", 0)};
  }
  if (j.contains("layers")) {
    if (!j["layers"].is_array()) throw ParseError("'layers' must be a list");
    for (const auto& lj : j["layers"]) {
      if (!lj.is_object()) throw ParseError("layer entry must be an object");
      LayerDesc l;
      l.name = lj.value("name", "layer" + std::to_string(nd.layers.size()));
      try {
        l.spec.kind = layer_kind_from_string(lj.value("kind", std::string("conv")));
      } catch (const Error& e) {
        throw ParseError(e.what());
      }
      l.spec.nif = get_u32(lj, "nif", 1);
      l.spec.nof = get_u32(lj, "nof", 1);
      l.spec.fs = get_u32(lj, "fs", 1);
      l.spec.h_out = get_u32(lj, "h_out", 1);
      l.spec.w_out = get_u32(lj, "w_out", 1);
      l.spec.group = get_u32(lj, "d", 0);
      l.input = get_int(lj, "input", -1);
      l.shortcut = get_int(lj, "shortcut", -1);
      l.stride = get_u32(lj, "stride", 1);
      l.im2col = get_u32(lj, "im2col", 0);
      l.shift = get_u32(lj, "shift", 0);
      if (lj.contains("pool")) {
        if (lj["pool"].is_string() && lj["pool"] == "global") {
          l.pool = kGlobalPool;
        } else {
          l.pool = get_u32(lj, "pool", 0);
        }
      }
      nd.layers.push_back(l);
    }
  }
  nd.validate();
  return nd;
}

std::string NetworkDescriptor::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["input"] = {{"c", input.c}, {"h", input.h}, {"w", input.w}};
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : layers) {
    nlohmann::ordered_json lj;
    lj["name"] = l.name;
    lj["kind"] = to_string(l.spec.kind);
    lj["nif"] = l.spec.nif;
    lj["nof"] = l.spec.nof;
    lj["fs"] = l.spec.fs;
    lj["h_out"] = l.spec.h_out;
    lj["w_out"] = l.spec.w_out;
    if (l.spec.kind == LayerKind::GroupedConv) lj["d"] = l.spec.group;
    if (l.input >= 0) lj["input"] = l.input;
    if (l.shortcut >= 0) lj["shortcut"] = l.shortcut;
    if (l.pool == kGlobalPool) {
      lj["pool"] = "global";
    } else if (l.pool) {
      lj["pool"] = l.pool;
    }
    if (l.stride != 1) lj["stride"] = l.stride;
    if (l.im2col) lj["im2col"] = l.im2col;
    if (l.shift) lj["shift"] = l.shift;
    j["layers"].push_back(lj);
  }
  return j.dump(2) + "\n";
}

NetworkDescriptor make_mvgg(uint32_t d) {
  if (d != 0 && (d > 64 || !std::has_single_bit(d))) throw UsageError("mVGG grouping must be a power of two in [1, 64] or F");
  NetworkDescriptor nd;
  nd.name = d == 0 ? "mvgg-F" : "mvgg-" + std::to_string(d);
  nd.input = {3, 32, 32};
  struct Row {
    uint32_t nif, nof, h, pool;
  };
  const Row rows[] = {{3, 16, 32, 0},   {16, 16, 32, 2},  {16, 64, 16, 0},
                      {64, 64, 16, 2},  {64, 256, 8, 0},  {256, 256, 8, kGlobalPool}};
  for (size_t i = 0; i < std::size(rows); ++i) {
    const auto& r = rows[i];
    LayerDesc l;
    l.name = "conv" + std::to_string(i + 1);
    const uint32_t width = i == 0 ? r.nif : (d == 0 ? 1 : std::max(1u, r.nif / d));
    l.spec = width == r.nif ? LayerSpec::conv(r.nif, r.nof, 3, r.h, r.h)
                            : LayerSpec::grouped(r.nif, r.nof, width, 3, r.h, r.h);
    l.pool = r.pool;
    nd.layers.push_back(l);
  }
  LayerDesc fc;
  fc.name = "fc";
  fc.spec = LayerSpec::dense(256, 10);
  nd.layers.push_back(fc);
  nd.validate();
  return nd;
}

NetworkDescriptor make_resnet(uint32_t depth) {
  std::vector<uint32_t> blocks;
  if (depth == 18) {
    blocks = {2, 2, 2, 2};
  } else if (depth == 34) {
    blocks = {3, 4, 6, 3};
  } else {
    throw UsageError("ResNet depth must be 18 or 34");
  }
  NetworkDescriptor nd;
  nd.name = "resnet" + std::to_string(depth);
  nd.input = {3, 224, 224};
  LayerDesc conv1;
  conv1.name = "conv1";
  conv1.spec = LayerSpec::conv(147, 64, 1, 112, 112);
  conv1.im2col = 7;
  conv1.stride = 2;
  conv1.pool = 2;
  nd.layers.push_back(conv1);

  const uint32_t channels[] = {64, 128, 256, 512};
  const uint32_t size[] = {56, 28, 14, 7};
  int block_in = 0;
  uint32_t cin = 64;
  for (size_t s = 0; s < 4; ++s) {
    const uint32_t c = channels[s], h = size[s];
    for (uint32_t b = 0; b < blocks[s]; ++b) {
      const std::string tag = "s" + std::to_string(s + 1) + "b" + std::to_string(b + 1);
      const bool down = s > 0 && b == 0;
      LayerDesc a;
      a.name = tag + "a";
      a.spec = LayerSpec::conv(cin, c, 3, h, h);
      a.input = block_in;
      a.stride = down ? 2 : 1;
      nd.layers.push_back(a);
      const int a_idx = static_cast<int>(nd.layers.size()) - 1;
      int shortcut = block_in;
      if (down) {
        LayerDesc ds;
        ds.name = tag + "ds";
        ds.spec = LayerSpec::conv(cin, c, 1, h, h);
        ds.input = block_in;
        ds.stride = 2;
        nd.layers.push_back(ds);
        shortcut = static_cast<int>(nd.layers.size()) - 1;
      }
      LayerDesc bl;
      bl.name = tag + "b";
      bl.spec = LayerSpec::conv(c, c, 3, h, h);
      bl.input = a_idx;
      bl.shortcut = shortcut;
      nd.layers.push_back(bl);
      block_in = static_cast<int>(nd.layers.size()) - 1;
      cin = c;
    }
  }
  LayerDesc fc;
  fc.name = "fc";
  fc.spec = LayerSpec::dense(512 * 7 * 7, 1000);
  fc.input = block_in;
  nd.layers.push_back(fc);
  nd.validate();
  return nd;
}

NetworkDescriptor builtin_network(const std::string& name) {
  if (name == "resnet18") return make_resnet(18);
  if (name == "resnet34") return make_resnet(34);
  if (name.rfind("mvgg-", 0) == 0) {
    const std::string d = name.substr(5);
    if (d == "F" || d == "f") return make_mvgg(0);
    if (!d.empty() && std::all_of(d.begin(), d.end(), [](unsigned char ch) { return std::isdigit(ch); }) &&
        d.size() <= 3)
      return make_mvgg(static_cast<uint32_t>(std::stoul(d)));
  }
  throw UsageError("unknown built-in network '" + name + "'");
}

std::vector<std::string> builtin_network_names() {
  return {"resnet18", "resnet34", "mvgg-1", "mvgg-2", "mvgg-4", "mvgg-8", "mvgg-16", "mvgg-32", "mvgg-64", "mvgg-F"};
}

}  // namespace xne::runner
