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

#include "mergemix/models/vit.hpp"

#include <string>

#include "mergemix/error.hpp"
#include "mergemix/models/layers.hpp"
#include "mergemix/tome/bsm.hpp"

namespace mergemix::models {

void ViTConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("model." + field + ": " + why);
  };
  if (patch == 0) fail("patch", "must be > 0");
  if (image_h % patch != 0 || image_w % patch != 0) fail("patch", "must divide the image size");
  if (image_h == 0 || image_w == 0) fail("image", "must be non-empty");
  if (channels == 0) fail("channels", "must be > 0");
  if (dim == 0 || heads == 0 || dim % heads != 0) fail("heads", "must divide dim");
  if (depth == 0) fail("depth", "must be > 0");
  if (mlp_hidden == 0) fail("mlp_hidden", "must be > 0");
  if (num_classes < 2) fail("num_classes", "must be >= 2");
  if (norm_mean.size() != channels || norm_std.size() != channels) {
    fail("norm_mean", "need one mean and std per channel");
  }
  for (double s : norm_std) {
    if (!(s > 0.0)) fail("norm_std", "must be > 0");
  }
}

nx::Tensor patchify(const nx::Tensor& images, const ViTConfig& cfg) {
  if (images.rank() != 4 || images.dim(1) != cfg.image_h || images.dim(2) != cfg.image_w ||
      images.dim(3) != cfg.channels) {
    throw ShapeError("patchify: images " + nx::shape_string(images.shape()) + " for a " +
                     std::to_string(cfg.image_h) + "x" + std::to_string(cfg.image_w) + "x" +
                     std::to_string(cfg.channels) + " model");
  }
  const std::size_t batch = images.dim(0), P = cfg.patch, C = cfg.channels;
  const std::size_t gh = cfg.grid_h(), gw = cfg.grid_w(), W = cfg.image_w;
  nx::Tensor out({batch * cfg.patches(), cfg.patch_dim()});
  double* o = out.data().data();
  const double* in = images.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* img = in + b * cfg.image_h * W * C;
    for (std::size_t gy = 0; gy < gh; ++gy) {
      for (std::size_t gx = 0; gx < gw; ++gx) {
        for (std::size_t py = 0; py < P; ++py) {
          for (std::size_t px = 0; px < P; ++px) {
            const double* pix = img + ((gy * P + py) * W + gx * P + px) * C;
            for (std::size_t c = 0; c < C; ++c) *o++ = (pix[c] - cfg.norm_mean[c]) / cfg.norm_std[c];
          }
        }
      }
    }
  }
  return out;
}

void add_trunk_params(ModelParams& params, const ViTConfig& cfg, const std::string& prefix,
                      data::Rng& rng) {
  cfg.validate();
  const std::size_t D = cfg.dim;
  params.add(prefix + "patch.w", trunc_normal({cfg.patch_dim(), D}, kInitStd, rng));
  params.add(prefix + "patch.b", nx::Tensor({D}));
  params.add(prefix + "pos", trunc_normal({cfg.patches(), D}, kInitStd, rng));
  if (cfg.use_cls) params.add(prefix + "cls", trunc_normal({1, D}, kInitStd, rng));
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::string b = prefix + "block" + std::to_string(i) + ".";
    add_layernorm(params, b + "ln1", D);
    add_attention(params, b + "attn", D, rng);
    add_layernorm(params, b + "ln2", D);
    add_mlp(params, b + "mlp", D, cfg.mlp_hidden, rng);
  }
  add_layernorm(params, prefix + "norm", D);
}

TrunkOutput run_trunk(const Bound& p, const ViTConfig& cfg, const std::string& prefix,
                      const nx::Tensor& images, const tome::MergeSchedule& schedule,
                      tome::AttentionStat stat) {
  if (!schedule.r_per_layer.empty() && schedule.layers() != cfg.depth) {
    throw ConfigError("merge schedule has " + std::to_string(schedule.layers()) +
                      " layers for a depth-" + std::to_string(cfg.depth) + " model");
  }
  if (stat == tome::AttentionStat::kClsRow && !cfg.use_cls) {
    throw ConfigError("attn_stat cls_row requires model.use_cls");
  }
  nx::Tape& tape = p.tape();
  const std::size_t B = images.dim(0), L0 = cfg.patches(), pre = cfg.prefix();

  TrunkOutput out;
  out.batch = B;
  out.count = L0 + pre;
  out.token_counts = schedule.r_per_layer.empty()
                         ? std::vector<std::size_t>(cfg.depth + 1, out.count)
                         : schedule.token_counts(out.count, pre);

  nx::Var x = nx::linear(tape.constant(patchify(images, cfg)), p[prefix + "patch.w"],
                         p[prefix + "patch.b"]);
  x = nx::add(x, tile_rows(p[prefix + "pos"], B));
  if (cfg.use_cls) {
    // Interleave one class row in front of each sample's patches.
    nx::Var both = nx::concat_rows({p[prefix + "cls"], x});
    nx::RowMix mix;
    for (std::size_t b = 0; b < B; ++b) {
      mix.add(0, 1.0);
      mix.end_row();
      for (std::size_t l = 0; l < L0; ++l) {
        mix.add(1 + b * L0 + l, 1.0);
        mix.end_row();
      }
    }
    x = nx::combine_rows(both, mix);
  }

  out.sizes.assign(B, std::vector<double>(out.count, 1.0));
  out.source.assign(B, tome::SourceMatrix::identity(L0));

  for (std::size_t layer = 0; layer < cfg.depth; ++layer) {
    const std::string bp = prefix + "block" + std::to_string(layer) + ".";
    const std::size_t L = out.count;
    const std::size_t r = schedule.r_per_layer.empty() ? 0 : schedule.r_per_layer[layer];
    const bool last = layer + 1 == cfg.depth;

    nx::Var h = layernorm(p, bp + "ln1", x);
    const nx::Tensor bias = tome::attention_bias(out.sizes, cfg.heads, L, false);
    const tome::AttentionResult attn =
        tome::multi_head_attention(h, h, attention_weights(p, bp + "attn", cfg.heads), B, L, L, &bias);
    x = nx::add(x, attn.out);

    std::vector<tome::MergePlan> plans(B);
    if (r > 0 || last) {
      const nx::Tensor& keys = attn.keys.value();
      for (std::size_t b = 0; b < B; ++b) {
        if (r == 0) {
          plans[b] = tome::identity_plan(L);
          continue;
        }
        nx::Tensor metric({L, cfg.dim});
        std::copy_n(keys.data().data() + b * L * cfg.dim, L * cfg.dim, metric.data().data());
        plans[b] = tome::bipartite_soft_matching(metric, r, pre);
      }
    }
    if (last) {
      out.a_k.resize(B);
      for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> scores =
            tome::attention_summary(attn.probs.value(), B, cfg.heads, b, stat);
        std::vector<double> merged = tome::merge_scores(plans[b], out.sizes[b], scores);
        out.a_k[b] = nx::Tensor::vector(std::vector<double>(merged.begin() + static_cast<std::ptrdiff_t>(pre), merged.end()));
      }
    }
    if (r > 0) {
      nx::RowMix mix;
      for (std::size_t b = 0; b < B; ++b) {
        tome::append_merge_rows(plans[b], out.sizes[b], b * L, mix);
        out.sizes[b] = tome::merge_sizes(plans[b], out.sizes[b]);
        std::vector<std::size_t> patch_map(L - pre);
        for (std::size_t i = pre; i < L; ++i) patch_map[i - pre] = plans[b].output_of[i] - pre;
        out.source[b] = tome::compose_source(out.source[b], tome::SourceMatrix(patch_map, L - r - pre));
      }
      x = nx::combine_rows(x, mix);
      out.count = L - r;
    }

    x = nx::add(x, mlp(p, bp + "mlp", layernorm(p, bp + "ln2", x)));
  }
  out.tokens = layernorm(p, prefix + "norm", x);
  return out;
}

TinyViT::TinyViT(ViTConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ModelParams TinyViT::init(std::uint64_t seed) const {
  data::Rng rng(seed);
  ModelParams params;
  add_trunk_params(params, cfg_, "", rng);
  params.add("head.w", trunc_normal({cfg_.dim, cfg_.num_classes}, kInitStd, rng));
  params.add("head.b", nx::Tensor({cfg_.num_classes}));
  return params;
}

TinyViT::Output TinyViT::forward(const Bound& p, const nx::Tensor& images,
                                 const tome::MergeSchedule& schedule,
                                 tome::AttentionStat stat) const {
  Output out;
  out.trunk = run_trunk(p, cfg_, "", images, schedule, stat);
  const TrunkOutput& t = out.trunk;
  nx::RowMix pool;
  const double total = static_cast<double>(cfg_.patches());
  for (std::size_t b = 0; b < t.batch; ++b) {
    if (cfg_.use_cls) {
      pool.add(b * t.count, 1.0);
    } else {
      for (std::size_t k = 0; k < t.count; ++k) pool.add(b * t.count + k, t.sizes[b][k] / total);
    }
    pool.end_row();
  }
  out.logits = nx::linear(nx::combine_rows(t.tokens, pool), p["head.w"], p["head.b"]);
  return out;
}

nx::Tensor TinyViT::predict(const ModelParams& params, const nx::Tensor& images,
                            const tome::MergeSchedule& schedule) const {
  nx::Tape tape;
  Bound p(tape, params, false);
  return forward(p, images, schedule).logits.value();
}

mixer::Saliency TrunkSaliency::saliency(const nx::Tensor& image,
                                        const tome::MergeSchedule& schedule) const {
  nx::Tape tape;
  Bound p(tape, params_, false);
  const TrunkOutput t = run_trunk(p, cfg_, prefix_, stack_images({&image}), schedule, stat_);
  return {t.a_k[0], t.source[0]};
}

nx::Tensor stack_images(const std::vector<const nx::Tensor*>& images) {
  if (images.empty()) throw ShapeError("stack_images: empty batch");
  const nx::Shape& s = images.front()->shape();
  if (s.size() != 3) throw ShapeError("stack_images: images must be H x W x C");
  nx::Tensor out({images.size(), s[0], s[1], s[2]});
  const std::size_t n = images.front()->size();
  for (std::size_t b = 0; b < images.size(); ++b) {
    if (images[b]->shape() != s) throw ShapeError("stack_images: mixed image shapes");
    std::copy_n(images[b]->data().data(), n, out.data().data() + b * n);
  }
  return out;
}

nx::Tensor batch_item(const nx::Tensor& batch, std::size_t b) {
  nx::Tensor out({batch.dim(1), batch.dim(2), batch.dim(3)});
  const std::size_t n = out.size();
  std::copy_n(batch.data().data() + b * n, n, out.data().data());
  return out;
}

}  // namespace mergemix::models
