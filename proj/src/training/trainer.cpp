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

#include "mergemix/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "mergemix/error.hpp"
#include "mergemix/evaluation/metrics.hpp"
#include "mergemix/io/binary.hpp"
#include "mergemix/numerics/ops.hpp"
#include "mergemix/objectives/losses.hpp"

namespace mergemix::training {
namespace {

constexpr char kStateMagic[4] = {'M', 'M', 'X', 'S'};
constexpr std::uint32_t kStateVersion = 1;

// Stream salts so that init, data order and mixing never share draws.
constexpr std::uint64_t kInitSalt = 0x696e6974ULL, kDataSalt = 0x64617461ULL, kMixSalt = 0x6d697821ULL;

std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  return data::splitmix64(s);
}

void put_blob(io::ByteWriter& w, const std::vector<std::uint8_t>& blob) {
  w.u64(blob.size());
  w.bytes(blob.data(), blob.size());
}

std::vector<std::uint8_t> get_blob(io::ByteReader& r, const std::string& what) {
  const std::uint64_t n = r.u64();
  if (n > r.remaining()) throw IoError(what + ": truncated payload");
  std::vector<std::uint8_t> out(n);
  r.bytes(out.data(), n);
  return out;
}

models::ModelParams zeros_named(const models::ModelParams& like) {
  models::ModelParams out;
  for (std::size_t i = 0; i < like.size(); ++i) out.add(like.name(i), nx::Tensor(like.value(i).shape()));
  return out;
}

std::vector<nx::Tensor> grads_of(const nx::Tape& tape, const models::Bound& p) {
  std::vector<nx::Tensor> g;
  g.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g.push_back(tape.grad(p.at(i)));
  return g;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool same_schedule(const tome::MergeSchedule& a, const tome::MergeSchedule& b, std::size_t depth) {
  auto norm = [depth](const tome::MergeSchedule& s) {
    return s.layers() == 0 ? tome::MergeSchedule::none(depth).r_per_layer : s.r_per_layer;
  };
  return norm(a) == norm(b);
}

// Accumulates per-step scalars into epoch means.
struct EpochMeans {
  std::vector<std::pair<std::string, double>> sums;
  std::size_t count = 0;

  void add(const nlohmann::ordered_json& step, const std::vector<std::string>& keys) {
    if (sums.empty()) {
      for (const auto& k : keys) sums.emplace_back(k, 0.0);
    }
    for (auto& [k, v] : sums) {
      if (step.contains(k)) v += step.at(k).get<double>();
    }
    count += 1;
  }
  void write(nlohmann::ordered_json& j) const {
    for (const auto& [k, v] : sums) j[k] = count ? v / static_cast<double>(count) : 0.0;
  }
};

// Saliency for a batch: reuse the trained forward when its merge schedule
// matches, otherwise a value-only trunk pass with the mixing schedule.
std::vector<mixer::Saliency> batch_saliency(const models::TrunkOutput* reuse, const models::ModelParams& params,
                                            const models::ViTConfig& vcfg, const std::string& prefix,
                                            const nx::Tensor& images, const tome::MergeSchedule& schedule) {
  std::vector<mixer::Saliency> out;
  auto collect = [&out](const models::TrunkOutput& t) {
    for (std::size_t b = 0; b < t.batch; ++b) out.push_back({t.a_k[b], t.source[b]});
  };
  if (reuse != nullptr) {
    collect(*reuse);
  } else {
    nx::Tape tape;
    const models::Bound cp(tape, params, false);
    collect(models::run_trunk(cp, vcfg, prefix, images, schedule));
  }
  return out;
}

struct MixedBatch {
  nx::Tensor images;
  std::vector<double> lambda_hat;
  double lambda = 0;
};

MixedBatch mix_batch(const nx::Tensor& images, const nx::Tensor& partners, const std::vector<mixer::Saliency>& sal,
                     const models::ViTConfig& vcfg, const mixer::MixConfig& mix, data::Rng& rng) {
  MixedBatch mb;
  mb.lambda = mixer::sample_lambda(mix.alpha, rng);
  std::vector<nx::Tensor> mixed;
  const std::size_t B = images.dim(0);
  for (std::size_t b = 0; b < B; ++b) {
    const nx::Tensor x_i = models::batch_item(images, b), x_j = models::batch_item(partners, b);
    mixer::MixPlan plan =
        mixer::plan_from_saliency(x_i, x_j, sal[b], mb.lambda, vcfg.grid_h(), vcfg.grid_w(), mix, rng);
    mb.lambda_hat.push_back(plan.lambda_hat);
    mixed.push_back(std::move(plan.mixed_image));
  }
  std::vector<const nx::Tensor*> ptrs;
  for (const auto& m : mixed) ptrs.push_back(&m);
  mb.images = models::stack_images(ptrs);
  return mb;
}

nx::Tensor gather_batch(const nx::Tensor& images, std::span<const std::size_t> order) {
  const std::size_t n = images.size() / images.dim(0);
  nx::Shape shape = images.shape();
  shape[0] = order.size();
  nx::Tensor out(shape);
  for (std::size_t b = 0; b < order.size(); ++b) {
    std::copy_n(images.data().data() + order[b] * n, n, out.data().data() + b * n);
  }
  return out;
}

[[noreturn]] void rethrow_numeric(const NumericError& e, std::size_t epoch, std::size_t step, double lr) {
  char lr_text[32];
  std::snprintf(lr_text, sizeof lr_text, "%.6g", lr);
  throw NumericError("non-finite value at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                     " (lr " + lr_text + "): " + e.what());
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite");
}

void restore_streams(const RunState& s, data::Rng& data_rng, data::Rng& mix_rng) {
  data_rng.set_state(s.data_rng);
  mix_rng.set_state(s.mix_rng);
}

}  // namespace

std::uint64_t init_seed(const TrainConfig& cfg) { return derive(cfg.seed, kInitSalt); }

RunState initial_state(const TrainConfig& cfg, models::ModelParams params) {
  RunState s;
  s.opt = AdamState::zeros_like(params);
  if (cfg.mode == Mode::kPreference && cfg.objective.use_reference_model) s.reference = params;
  s.params = std::move(params);
  s.data_rng = data::Rng(derive(cfg.seed, kDataSalt)).state();
  s.mix_rng = data::Rng(derive(cfg.seed, kMixSalt)).state();
  return s;
}

std::vector<std::uint8_t> encode_run_state(const RunState& s) {
  io::ByteWriter w;
  w.bytes(kStateMagic, 4);
  w.u32(kStateVersion);
  w.u64(s.epoch);
  w.u64(s.step);
  w.u64(s.opt.t);
  for (auto v : s.data_rng) w.u64(v);
  for (auto v : s.mix_rng) w.u64(v);
  w.u64(s.loss_history.size());
  for (double v : s.loss_history) w.f64(v);
  put_blob(w, models::encode_params(s.params));
  put_blob(w, models::encode_params(s.reference));
  models::ModelParams m = zeros_named(s.params), v = zeros_named(s.params);
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    m.value(i) = s.opt.m.at(i);
    v.value(i) = s.opt.v.at(i);
  }
  put_blob(w, models::encode_params(m));
  put_blob(w, models::encode_params(v));
  return w.buffer();
}

RunState decode_run_state(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kStateMagic, 4) != 0) throw IoError(what + ": bad magic");
  io::ByteReader r(bytes, what);
  char magic[4];
  r.bytes(magic, 4);
  if (r.u32() != kStateVersion) throw IoError(what + ": unsupported version");
  RunState s;
  s.epoch = r.u64();
  s.step = r.u64();
  s.opt.t = r.u64();
  for (auto& v : s.data_rng) v = r.u64();
  for (auto& v : s.mix_rng) v = r.u64();
  const std::uint64_t n = r.u64();
  if (n * 8 > r.remaining()) throw IoError(what + ": truncated payload");
  s.loss_history.resize(n);
  for (double& v : s.loss_history) v = r.f64();
  s.params = models::decode_params(get_blob(r, what), what);
  s.reference = models::decode_params(get_blob(r, what), what);
  const models::ModelParams m = models::decode_params(get_blob(r, what), what);
  const models::ModelParams v = models::decode_params(get_blob(r, what), what);
  if (m.size() != s.params.size() || v.size() != s.params.size()) throw IoError(what + ": moment count mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) {
    s.opt.m.push_back(m.value(i));
    s.opt.v.push_back(v.value(i));
  }
  if (!r.done()) throw IoError(what + ": trailing bytes");
  return s;
}

void save_run_state(const RunState& s, const std::filesystem::path& path) {
  io::write_file(path.string(), encode_run_state(s));
}

RunState load_run_state(const std::filesystem::path& path) {
  return decode_run_state(io::read_file(path.string()), "run state " + path.string());
}

std::vector<std::size_t> random_derangement(std::size_t n, data::Rng& rng) {
  if (n < 2) throw DomainError("derangement: needs n >= 2");
  std::vector<std::size_t> p(n);
  while (true) {
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(std::span<std::size_t>(p));
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) fixed = p[i] == i;
    if (!fixed) return p;
  }
}

std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
  const std::size_t full = n / batch_size, rest = n % batch_size;
  return full + (rest >= 2 ? 1 : 0);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, data::Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    if (end - begin < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

TrainResult train_classifier(const TrainConfig& cfg, const models::ViTConfig& model_cfg,
                             const data::ImageDataset& train, const data::ImageDataset* test, const Hooks& hooks,
                             std::optional<RunState> resume) {
  model_cfg.validate();
  cfg.validate(model_cfg.depth);
  if (train.num_classes < 2) throw DomainError("train_classifier: dataset needs >= 2 classes");
  if (train.num_classes != model_cfg.num_classes) {
    throw ConfigError("model.num_classes: " + std::to_string(model_cfg.num_classes) + " but the dataset has " +
                      std::to_string(train.num_classes));
  }
  if (train.height != model_cfg.image_h || train.width != model_cfg.image_w ||
      train.channels != model_cfg.channels) {
    throw ConfigError("model: image shape does not match the dataset");
  }
  const models::TinyViT model(model_cfg);
  const mixer::MixConfig mix = cfg.effective_mix(model_cfg.depth);
  const bool mixing = cfg.variant != Variant::kVanilla;
  const bool reuse_raw = same_schedule(mix.merge_schedule, cfg.forward_schedule, model_cfg.depth);

  TrainResult result;
  RunState& st = result.state;
  st = resume ? std::move(*resume) : initial_state(cfg, model.init(init_seed(cfg)));
  data::Rng data_rng, mix_rng;
  restore_streams(st, data_rng, mix_rng);

  const std::size_t per_epoch = steps_per_epoch(train.size(), cfg.batch_size);
  const std::size_t total_steps = per_epoch * cfg.epochs;
  const AdamWConfig adam = cfg.adamw();

  for (std::size_t epoch = st.epoch; epoch < cfg.epochs; ++epoch) {
    EpochMeans means;
    std::size_t hits = 0, seen = 0;
    for (const auto& idx : epoch_batches(train.size(), cfg.batch_size, data_rng)) {
      const double lr = lr_at(st.step, total_steps, cfg.lr, cfg.warmup_fraction);
      nlohmann::ordered_json rec;
      rec["kind"] = "step";
      rec["epoch"] = epoch;
      rec["step"] = st.step;
      rec["lr"] = lr;
      try {
        const nx::Tensor x = train.batch(idx);
        const std::vector<std::size_t> y = train.labels_of(idx);
        nx::Tape tape;
        const models::Bound p(tape, st.params, true);
        const auto raw = model.forward(p, x, cfg.forward_schedule);
        nx::Var ce = nx::cross_entropy(raw.logits, y);
        nx::Var loss = ce;
        rec["ce"] = ce.value()[0];
        for (std::size_t b = 0; b < idx.size(); ++b) hits += eval::argmax_row(raw.logits.value(), b) == y[b];
        seen += idx.size();
        if (mixing) {
          const std::vector<std::size_t> perm = random_derangement(idx.size(), mix_rng);
          std::vector<std::size_t> y_j(idx.size());
          for (std::size_t b = 0; b < idx.size(); ++b) y_j[b] = y[perm[b]];
          const auto sal = batch_saliency(reuse_raw ? &raw.trunk : nullptr, st.params, model_cfg, "", x,
                                          mix.merge_schedule);
          const MixedBatch mb = mix_batch(x, gather_batch(x, perm), sal, model_cfg, mix, mix_rng);
          const auto mixed = model.forward(p, mb.images, cfg.forward_schedule);
          const nx::Var mce = objectives::mce_loss(mixed.logits, y, y_j, mb.lambda_hat);
          loss = nx::add(mce, ce);
          rec["mce"] = mce.value()[0];
          rec["lambda"] = mb.lambda;
          rec["lambda_hat"] = mean_of(mb.lambda_hat);
        }
        rec["total"] = loss.value()[0];
        check_finite(loss.value()[0], "loss");
        tape.backward(loss);
        adamw_step(st.params, grads_of(tape, p), st.opt, adam, lr);
        if (!st.params.all_finite()) throw NumericError("parameters after the optimizer step");
      } catch (const NumericError& e) {
        rethrow_numeric(e, epoch, st.step, lr);
      }
      st.loss_history.push_back(rec["total"].get<double>());
      st.step += 1;
      means.add(rec, {"ce", "mce", "total", "lambda_hat"});
      if (hooks.on_step) hooks.on_step(rec);
      result.metrics.steps.push_back(std::move(rec));
    }
    st.epoch = epoch + 1;
    st.data_rng = data_rng.state();
    st.mix_rng = mix_rng.state();

    nlohmann::ordered_json ep;
    ep["kind"] = "epoch";
    ep["epoch"] = epoch;
    ep["step"] = st.step;
    means.write(ep);
    if (!mixing) {
      ep.erase("mce");
      ep.erase("lambda_hat");
    }
    ep["train_acc"] = seen ? static_cast<double>(hits) / static_cast<double>(seen) : 0.0;
    if (test != nullptr) {
      const eval::Predictions pred = eval::predict(model, st.params, *test, cfg.forward_schedule);
      ep["test_acc"] = pred.accuracy();
      ep["test_ece"] = eval::ece(pred.confidences, pred.correct).ece;
    }
    if (hooks.on_epoch) hooks.on_epoch(ep, st);
    result.metrics.epochs.push_back(std::move(ep));
  }
  return result;
}

namespace {

std::vector<std::vector<std::size_t>> targets_of(const data::CaptionDataset& ds, std::span<const std::size_t> idx) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i : idx) out.push_back(ds.targets.at(i));
  return out;
}

// A random other image of the set for each index.
std::vector<std::size_t> auxiliary_indices(std::span<const std::size_t> idx, std::size_t n, data::Rng& rng) {
  std::vector<std::size_t> out;
  for (std::size_t i : idx) {
    std::size_t j = rng.below(n - 1);
    if (j >= i) ++j;
    out.push_back(j);
  }
  return out;
}

std::vector<double> row_values(const nx::Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TrainResult train_preference(const TrainConfig& cfg, const models::CaptionerConfig& model_cfg,
                             const data::CaptionDataset& train, const data::CaptionDataset* heldout,
                             const Hooks& hooks, std::optional<RunState> resume) {
  model_cfg.validate();
  cfg.validate(model_cfg.vision.depth);
  if (train.size() < 2) throw DomainError("train_preference: needs >= 2 triples");
  const models::ToyCaptioner model(model_cfg);
  const auto& vcfg = model_cfg.vision;
  const mixer::MixConfig mix = cfg.effective_mix(vcfg.depth);
  const double beta = cfg.objective.beta;

  TrainResult result;
  RunState& st = result.state;
  st = resume ? std::move(*resume) : initial_state(cfg, model.init(init_seed(cfg)));
  data::Rng data_rng, mix_rng;
  restore_streams(st, data_rng, mix_rng);

  const std::size_t per_epoch = steps_per_epoch(train.size(), cfg.batch_size);
  const std::size_t total_steps = per_epoch * cfg.epochs;
  const AdamWConfig adam = cfg.adamw();

  for (std::size_t epoch = st.epoch; epoch < cfg.epochs; ++epoch) {
    EpochMeans means;
    for (const auto& idx : epoch_batches(train.size(), cfg.batch_size, data_rng)) {
      const double lr = lr_at(st.step, total_steps, cfg.lr, cfg.warmup_fraction);
      nlohmann::ordered_json rec;
      rec["kind"] = "step";
      rec["epoch"] = epoch;
      rec["step"] = st.step;
      rec["lr"] = lr;
      try {
        const nx::Tensor x = train.images.batch(idx);
        const auto aux_idx = auxiliary_indices(idx, train.size(), mix_rng);
        const nx::Tensor x_aux = train.images.batch(aux_idx);
        const auto targets = targets_of(train, idx);
        const auto sal = batch_saliency(nullptr, st.params, vcfg, models::ToyCaptioner::kVisionPrefix, x,
                                        mix.merge_schedule);
        const MixedBatch mb = mix_batch(x, x_aux, sal, vcfg, mix, mix_rng);
        std::vector<double> margin;
        for (double lh : mb.lambda_hat) margin.push_back(1.0 - lh);

        nx::Tape tape;
        const models::Bound p(tape, st.params, true);
        const auto win = model.forward(p, x, train.prompt, targets, cfg.forward_schedule);
        const auto lose = model.forward(p, mb.images, train.prompt, targets, cfg.forward_schedule);
        const nx::Var sft = objectives::sft_loss(win.token_logprobs, win.lengths);
        const nx::Var s_w = objectives::avg_logprob_score(win.token_logprobs, win.lengths, beta);
        const nx::Var s_l = objectives::avg_logprob_score(lose.token_logprobs, lose.lengths, beta);
        nx::Var loss = sft;
        rec["sft"] = sft.value()[0];
        if (cfg.objective.ranking) {
          nx::Var rank;
          if (cfg.objective.use_reference_model) {
            const auto ref_w = model.score(st.reference, x, train.prompt, targets, cfg.forward_schedule);
            const auto ref_l = model.score(st.reference, mb.images, train.prompt, targets, cfg.forward_schedule);
            std::vector<double> rw, rl;
            for (std::size_t b = 0; b < idx.size(); ++b) {
              double a = 0, c = 0;
              for (std::size_t t = 0; t < win.lengths[b]; ++t) {
                a += ref_w.at(b, t);
                c += ref_l.at(b, t);
              }
              rw.push_back(a);
              rl.push_back(c);
            }
            rank = objectives::dpo_loss(objectives::sequence_logprob(win.token_logprobs, win.lengths),
                                        objectives::sequence_logprob(lose.token_logprobs, lose.lengths), rw, rl,
                                        beta);
            rec["dpo"] = rank.value()[0];
          } else {
            rank = objectives::mixed_simpo_loss(s_w, s_l, margin);
            rec["simpo"] = rank.value()[0];
          }
          loss = objectives::total_mllm_loss(sft, rank);
        }
        const auto sw = row_values(s_w.value()), sl = row_values(s_l.value());
        std::vector<double> gap(sw.size());
        for (std::size_t b = 0; b < gap.size(); ++b) gap[b] = sw[b] - sl[b];
        rec["total"] = loss.value()[0];
        rec["lambda"] = mb.lambda;
        rec["lambda_hat"] = mean_of(mb.lambda_hat);
        rec["margin_min"] = *std::min_element(margin.begin(), margin.end());
        rec["margin_max"] = *std::max_element(margin.begin(), margin.end());
        rec["gap"] = mean_of(gap);
        check_finite(loss.value()[0], "loss");
        tape.backward(loss);
        adamw_step(st.params, grads_of(tape, p), st.opt, adam, lr);
        if (!st.params.all_finite()) throw NumericError("parameters after the optimizer step");
      } catch (const NumericError& e) {
        rethrow_numeric(e, epoch, st.step, lr);
      }
      st.loss_history.push_back(rec["total"].get<double>());
      st.step += 1;
      means.add(rec, {"sft", "simpo", "dpo", "total", "lambda_hat", "gap"});
      if (hooks.on_step) hooks.on_step(rec);
      result.metrics.steps.push_back(std::move(rec));
    }
    st.epoch = epoch + 1;
    st.data_rng = data_rng.state();
    st.mix_rng = mix_rng.state();

    nlohmann::ordered_json ep;
    ep["kind"] = "epoch";
    ep["epoch"] = epoch;
    ep["step"] = st.step;
    means.write(ep);
    if (!cfg.objective.ranking || cfg.objective.use_reference_model) ep.erase("simpo");
    if (!cfg.objective.ranking || !cfg.objective.use_reference_model) ep.erase("dpo");
    if (heldout != nullptr) {
      ep["heldout_gap"] = evaluate_preference(model, st.params, *heldout, mix, beta, cfg.seed, cfg.forward_schedule).mean;
    }
    if (hooks.on_epoch) hooks.on_epoch(ep, st);
    result.metrics.epochs.push_back(std::move(ep));
  }
  return result;
}

PreferenceGap evaluate_preference(const models::ToyCaptioner& model, const models::ModelParams& params,
                                  const data::CaptionDataset& split, const mixer::MixConfig& mix, double beta,
                                  std::uint64_t seed, const tome::MergeSchedule& forward) {
  if (split.size() < 2) throw DomainError("evaluate_preference: needs >= 2 triples");
  const auto& vcfg = model.config().vision;
  const tome::MergeSchedule schedule = mix.merge_schedule.layers() ? mix.merge_schedule
                                                                   : tome::MergeSchedule::none(vcfg.depth);
  data::Rng rng(derive(seed, kMixSalt + 1));
  PreferenceGap out;
  constexpr std::size_t kBatch = 100;
  for (std::size_t begin = 0; begin < split.size(); begin += kBatch) {
    std::vector<std::size_t> idx(std::min(split.size(), begin + kBatch) - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const nx::Tensor x = split.images.batch(idx);
    const nx::Tensor x_aux = split.images.batch(auxiliary_indices(idx, split.size(), rng));
    const auto targets = targets_of(split, idx);
    const auto sal = batch_saliency(nullptr, params, vcfg, models::ToyCaptioner::kVisionPrefix, x, schedule);
    const MixedBatch mb = mix_batch(x, x_aux, sal, vcfg, mix, rng);
    const nx::Tensor w = model.score(params, x, split.prompt, targets, forward);
    const nx::Tensor l = model.score(params, mb.images, split.prompt, targets, forward);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      double sw = 0, sl = 0;
      for (std::size_t t = 0; t < targets[b].size(); ++t) {
        sw += w.at(b, t);
        sl += l.at(b, t);
      }
      out.gaps.push_back(objectives::avg_logprob_score(sw, targets[b].size(), beta) -
                         objectives::avg_logprob_score(sl, targets[b].size(), beta));
    }
  }
  out.mean = mean_of(out.gaps);
  return out;
}

}  // namespace mergemix::training
