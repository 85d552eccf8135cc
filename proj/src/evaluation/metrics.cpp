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

#include "mergemix/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mergemix/data/rng.hpp"
#include "mergemix/error.hpp"
#include "mergemix/numerics/ops.hpp"

namespace mergemix::eval {

std::size_t argmax_row(const nx::Tensor& logits, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c) {
    if (logits.at(row, c) > logits.at(row, best)) best = c;
  }
  return best;
}

double top1_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
  if (predictions.empty()) throw DomainError("top1_accuracy: empty split");
  if (predictions.size() != labels.size()) throw DomainError("top1_accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double Predictions::accuracy() const {
  if (correct.empty()) throw DomainError("top1_accuracy: empty split");
  return static_cast<double>(std::count(correct.begin(), correct.end(), true)) /
         static_cast<double>(correct.size());
}

namespace {

void collect(const nx::Tensor& logits, std::span<const std::size_t> labels, Predictions& out) {
  const nx::Tensor probs = nx::softmax_rows(logits);
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const std::size_t cls = argmax_row(logits, b);
    out.classes.push_back(cls);
    out.confidences.push_back(probs.at(b, cls));
    out.correct.push_back(cls == labels[b]);
  }
}

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return idx;
}

}  // namespace

Predictions predict(const models::TinyViT& model, const models::ModelParams& params, const data::ImageDataset& split,
                    const tome::MergeSchedule& schedule, std::size_t batch_size) {
  if (split.size() == 0) throw DomainError("evaluation: empty split");
  if (batch_size == 0) throw DomainError("evaluation: batch size must be >= 1");
  Predictions out;
  for (std::size_t begin = 0; begin < split.size(); begin += batch_size) {
    const auto idx = iota_range(begin, std::min(split.size(), begin + batch_size));
    collect(model.predict(params, split.batch(idx), schedule), split.labels_of(idx), out);
  }
  return out;
}

double top1_accuracy(const models::TinyViT& model, const models::ModelParams& params, const data::ImageDataset& split,
                     const tome::MergeSchedule& schedule) {
  return predict(model, params, split, schedule).accuracy();
}

CalibrationReport ece(std::span<const double> confidences, const std::vector<bool>& correct, std::size_t n_bins) {
  if (n_bins == 0) throw DomainError("ece: n_bins must be >= 1");
  if (confidences.size() != correct.size()) throw DomainError("ece: length mismatch");
  CalibrationReport r;
  r.n_bins = n_bins;
  r.bins.resize(n_bins);
  std::vector<double> conf_sum(n_bins, 0), hit_sum(n_bins, 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw DomainError("ece: confidence " + std::to_string(c) + " outside [0, 1]");
    const auto b = std::min(n_bins - 1, static_cast<std::size_t>(c * static_cast<double>(n_bins)));
    conf_sum[b] += c;
    hit_sum[b] += correct[i] ? 1.0 : 0.0;
    r.bins[b].count += 1;
  }
  const double n = static_cast<double>(confidences.size());
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& bin = r.bins[b];
    bin.lower = static_cast<double>(b) / n_bins;
    bin.upper = static_cast<double>(b + 1) / n_bins;
    if (bin.count == 0) continue;
    bin.confidence = conf_sum[b] / bin.count;
    bin.accuracy = hit_sum[b] / bin.count;
    r.ece += (bin.count / n) * std::abs(bin.accuracy - bin.confidence);
  }
  r.ece *= 100.0;
  return r;
}

void occlude_patches(nx::Tensor& images, std::size_t b, std::span<const std::size_t> patches, std::size_t patch,
                     std::size_t grid_w) {
  const std::size_t H = images.dim(1), W = images.dim(2), C = images.dim(3);
  double* base = images.data().data() + b * H * W * C;
  for (std::size_t idx : patches) {
    const std::size_t gy = idx / grid_w, gx = idx % grid_w;
    for (std::size_t y = gy * patch; y < (gy + 1) * patch; ++y) {
      std::fill_n(base + (y * W + gx * patch) * C, patch * C, 0.0);
    }
  }
}

OcclusionCurve occlusion_eval(const models::TinyViT& model, const models::ModelParams& params,
                              const data::ImageDataset& split, std::span<const double> ratios, std::uint64_t seed,
                              const tome::MergeSchedule& schedule) {
  if (split.size() == 0) throw DomainError("occlusion: empty split");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] >= 0.0 && ratios[i] < 1.0)) throw DomainError("occlusion: ratio outside [0, 1)");
    if (i > 0 && !(ratios[i] > ratios[i - 1])) throw DomainError("occlusion: ratios must be strictly increasing");
  }
  const auto& cfg = model.config();
  const std::size_t l0 = cfg.patches();
  data::Rng rng(seed);
  std::vector<std::vector<std::size_t>> order(split.size());
  for (auto& o : order) {
    o.resize(l0);
    std::iota(o.begin(), o.end(), 0);
    rng.shuffle(std::span<std::size_t>(o));
  }
  OcclusionCurve curve{{ratios.begin(), ratios.end()}, {}};
  constexpr std::size_t kBatch = 100;
  for (double ratio : ratios) {
    const auto count = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(l0)));
    std::size_t hits = 0;
    for (std::size_t begin = 0; begin < split.size(); begin += kBatch) {
      const auto idx = iota_range(begin, std::min(split.size(), begin + kBatch));
      nx::Tensor images = split.batch(idx);
      for (std::size_t b = 0; b < idx.size(); ++b) {
        occlude_patches(images, b, std::span<const std::size_t>(order[idx[b]]).first(count), cfg.patch,
                        cfg.grid_w());
      }
      const nx::Tensor logits = model.predict(params, images, schedule);
      for (std::size_t b = 0; b < idx.size(); ++b) hits += argmax_row(logits, b) == split.labels[idx[b]];
    }
    curve.accuracy.push_back(static_cast<double>(hits) / static_cast<double>(split.size()));
  }
  return curve;
}

ArchSpec ArchSpec::from(const models::ViTConfig& cfg) {
  return {cfg.patches(), cfg.patch_dim(), cfg.dim, cfg.depth, cfg.mlp_hidden, cfg.num_classes, cfg.use_cls};
}

void ArchSpec::validate() const {
  if (patches == 0 || patch_dim == 0 || dim == 0 || depth == 0 || mlp_hidden == 0 || num_classes == 0) {
    throw ConfigError("arch: every dimension must be >= 1");
  }
}

CostEstimate flops_estimate(const ArchSpec& spec, const tome::MergeSchedule& schedule) {
  spec.validate();
  const tome::MergeSchedule sched = schedule.layers() == 0 ? tome::MergeSchedule::none(spec.depth) : schedule;
  if (sched.layers() != spec.depth) {
    throw ConfigError("merge_schedule: " + std::to_string(sched.layers()) + " entries for depth " +
                      std::to_string(spec.depth));
  }
  CostEstimate est;
  est.tokens_per_layer = sched.token_counts(spec.tokens(), spec.use_cls ? 1 : 0);
  const double D = static_cast<double>(spec.dim), H = static_cast<double>(spec.mlp_hidden);
  double macs = static_cast<double>(spec.patches) * spec.patch_dim * D + D * spec.num_classes;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    const double n = static_cast<double>(est.tokens_per_layer[l]);
    const double m = static_cast<double>(est.tokens_per_layer[l + 1]);
    macs += 4 * n * D * D + 2 * n * n * D + 2 * m * D * H;
  }
  est.flops = 2 * macs;
  return est;
}

double vit_flops(const ArchSpec& spec) {
  spec.validate();
  const double L = static_cast<double>(spec.tokens()), D = static_cast<double>(spec.dim);
  return 2 * (static_cast<double>(spec.patches) * spec.patch_dim * D +
              spec.depth * (4 * L * D * D + 2 * L * L * D + 2 * L * D * spec.mlp_hidden) + D * spec.num_classes);
}

}  // namespace mergemix::eval
