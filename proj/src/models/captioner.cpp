// Copyright 2026 The MergeMix Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mergemix/models/captioner.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mergemix/error.hpp"
#include "mergemix/models/layers.hpp"

namespace mergemix::models {

void CaptionerConfig::validate() const {
  vision.validate();
  if (vocab < 3 || vocab > 64) throw ConfigError("captioner.vocab: must be in [3, 64]");
  if (text_depth == 0) throw ConfigError("captioner.text_depth: must be > 0");
  if (text_heads == 0 || vision.dim % text_heads != 0) {
    throw ConfigError("captioner.text_heads: must divide model.dim");
  }
  if (max_len < 2) throw ConfigError("captioner.max_len: must be >= 2");
  if (pad_id >= vocab || bos_id >= vocab) throw ConfigError("captioner: special ids outside vocab");
}

ToyCaptioner::ToyCaptioner(CaptionerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ModelParams ToyCaptioner::init(std::uint64_t seed) const {
  data::Rng rng(seed);
  ModelParams params;
  add_trunk_params(params, cfg_.vision, kVisionPrefix, rng);
  const std::size_t D = cfg_.vision.dim;
  params.add("text.embed", trunc_normal({cfg_.vocab, D}, kInitStd, rng));
  params.add("text.pos", trunc_normal({cfg_.max_len, D}, kInitStd, rng));
  for (std::size_t i = 0; i < cfg_.text_depth; ++i) {
    const std::string b = "text.block" + std::to_string(i) + ".";
    add_layernorm(params, b + "ln1", D);
    add_attention(params, b + "self", D, rng);
    add_layernorm(params, b + "ln2", D);
    add_attention(params, b + "cross", D, rng);
    add_layernorm(params, b + "ln3", D);
    add_mlp(params, b + "mlp", D, cfg_.vision.mlp_hidden, rng);
  }
  add_layernorm(params, "text.norm", D);
  params.add("text.out.w", trunc_normal({D, cfg_.vocab}, kInitStd, rng));
  params.add("text.out.b", nx::Tensor({cfg_.vocab}));
  return params;
}

ToyCaptioner::Output ToyCaptioner::forward(const Bound& p, const nx::Tensor& images,
                                           std::span<const std::size_t> prompt,
                                           const std::vector<std::vector<std::size_t>>& targets,
                                           const tome::MergeSchedule& schedule) const {
  const std::size_t B = images.dim(0);
  if (targets.size() != B) throw ShapeError("captioner: one target per image required");
  std::size_t T = 0;
  for (const auto& t : targets) {
    if (t.empty()) throw DomainError("captioner: empty target");
    T = std::max(T, t.size());
  }
  const std::size_t S = prompt.size() + T;  // prompt, BOS, target[:-1]
  if (S > cfg_.max_len) {
    throw DomainError("captioner: sequence of " + std::to_string(S) + " exceeds max_len " +
                      std::to_string(cfg_.max_len));
  }
  auto check_id = [&](std::size_t id) {
    if (id >= cfg_.vocab) {
      throw DomainError("captioner: token id " + std::to_string(id) + " outside vocab of " +
                        std::to_string(cfg_.vocab));
    }
  };
  for (std::size_t id : prompt) check_id(id);

  Output out;
  std::vector<std::size_t> inputs, picks(B * S, cfg_.pad_id);
  inputs.reserve(B * S);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t id : targets[b]) check_id(id);
    out.lengths.push_back(targets[b].size());
    inputs.insert(inputs.end(), prompt.begin(), prompt.end());
    inputs.push_back(cfg_.bos_id);
    for (std::size_t t = 0; t + 1 < T; ++t) {
      inputs.push_back(t < targets[b].size() ? targets[b][t] : cfg_.pad_id);
    }
    for (std::size_t t = 0; t < targets[b].size(); ++t) picks[b * S + prompt.size() + t] = targets[b][t];
  }

  std::vector<std::size_t> positions(S);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  nx::Var y = nx::add(gather_rows(p["text.embed"], inputs),
                      tile_rows(gather_rows(p["text.pos"], positions), B));

  nx::Var memory;
  nx::Tensor cross_bias;
  if (!cfg_.ablate_cross) {
    out.vision = run_trunk(p, cfg_.vision, kVisionPrefix, images, schedule);
    memory = out.vision.tokens;
    cross_bias = tome::attention_bias(out.vision.sizes, cfg_.text_heads, S, false);
  }
  const nx::Tensor self_bias =
      tome::attention_bias(std::vector<std::vector<double>>(B, std::vector<double>(S, 1.0)),
                           cfg_.text_heads, S, true);

  for (std::size_t i = 0; i < cfg_.text_depth; ++i) {
    const std::string bp = "text.block" + std::to_string(i) + ".";
    nx::Var h = layernorm(p, bp + "ln1", y);
    y = nx::add(y, tome::multi_head_attention(h, h, attention_weights(p, bp + "self", cfg_.text_heads),
                                              B, S, S, &self_bias)
                       .out);
    if (!cfg_.ablate_cross) {
      h = layernorm(p, bp + "ln2", y);
      y = nx::add(y, tome::multi_head_attention(h, memory,
                                                attention_weights(p, bp + "cross", cfg_.text_heads),
                                                B, S, out.vision.count, &cross_bias)
                         .out);
    }
    y = nx::add(y, mlp(p, bp + "mlp", layernorm(p, bp + "ln3", y)));
  }
  nx::Var logits = nx::linear(layernorm(p, "text.norm", y), p["text.out.w"], p["text.out.b"]);
  nx::Var picked = nx::reshape(nx::pick(nx::log_softmax_rows(logits), picks), {B * S, 1});

  nx::RowMix rows;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      rows.add(b * S + prompt.size() + t, 1.0);
      rows.end_row();
    }
  }
  out.token_logprobs = nx::reshape(nx::combine_rows(picked, rows), {B, T});
  return out;
}

nx::Tensor ToyCaptioner::score(const ModelParams& params, const nx::Tensor& images,
                               std::span<const std::size_t> prompt,
                               const std::vector<std::vector<std::size_t>>& targets,
                               const tome::MergeSchedule& schedule) const {
  nx::Tape tape;
  Bound p(tape, params, false);
  return forward(p, images, prompt, targets, schedule).token_logprobs.value();
}

}  // namespace mergemix::models
