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

#include "mergemix/training/config.hpp"

#include <concepts>
#include <cstdio>
#include <set>

#include "mergemix/error.hpp"

namespace mergemix::training {
namespace {

using nlohmann::json;

// One JSON object being read; remembers which keys were consumed so that
// leftovers can be reported as unknown fields.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError((path_.empty() ? "config" : path_) + ": expected an object");
  }

  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <std::unsigned_integral U>
  void get(const std::string& key, U& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw ConfigError(full(key) + ": expected a non-negative integer");
    out = v.get<U>();
  }
  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(full(key) + ": expected a number");
    out = v.get<double>();
  }
  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(full(key) + ": expected true or false");
    out = v.get<bool>();
  }
  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(full(key) + ": expected a string");
    out = v.get<std::string>();
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(full(key) + ": expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(full(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }
  void get(const std::string& key, tome::MergeSchedule& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(full(key) + ": expected an array of per-layer r values");
    out.r_per_layer.clear();
    for (const auto& e : v) {
      if (!e.is_number_unsigned()) throw ConfigError(full(key) + ": expected non-negative integers");
      out.r_per_layer.push_back(e.get<std::size_t>());
    }
  }
  template <typename E>
  void get_enum(const std::string& key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    if (!has(key)) return;
    std::string s;
    get(key, s);
    std::string options;
    for (const auto& [name, value] : names) {
      if (s == name) {
        out = value;
        return;
      }
      options += (options.empty() ? "" : ", ") + std::string(name);
    }
    throw ConfigError(full(key) + ": unknown value \"" + s + "\" (expected one of " + options + ")");
  }

  Section child(const std::string& key) { return Section(raw(key), full(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(full(key) + ": unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_model(Section s, models::ViTConfig& m) {
  s.get("image_h", m.image_h);
  s.get("image_w", m.image_w);
  s.get("channels", m.channels);
  s.get("patch", m.patch);
  s.get("dim", m.dim);
  s.get("depth", m.depth);
  s.get("heads", m.heads);
  s.get("mlp_hidden", m.mlp_hidden);
  s.get("num_classes", m.num_classes);
  s.get("use_cls", m.use_cls);
  s.get("norm_mean", m.norm_mean);
  s.get("norm_std", m.norm_std);
  s.finish();
}

void read_mix(Section s, mixer::MixConfig& m) {
  s.get("alpha", m.alpha);
  s.get("tau", m.tau);
  s.get("merge_schedule", m.merge_schedule);
  s.get("rescale_batch", m.rescale_batch);
  s.get("rescale_index", m.rescale_index);
  s.get_enum("label_ratio", m.label_ratio,
             {{"rescaled", mixer::LabelRatio::kRescaled}, {"area", mixer::LabelRatio::kArea}});
  s.get_enum("recovery", m.recovery,
             {{"broadcast", recovery::RecoveryMode::kBroadcast},
              {"size_normalized", recovery::RecoveryMode::kSizeNormalized}});
  s.finish();
}

bool all_zero(const tome::MergeSchedule& s) {
  for (std::size_t r : s.r_per_layer) {
    if (r != 0) return false;
  }
  return true;
}

}  // namespace

const char* to_string(Mode m) { return m == Mode::kClassification ? "cls" : "pref"; }

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kVanilla: return "vanilla";
    case Variant::kTopK: return "topk";
    default: return "mergemix";
  }
}

void TrainConfig::validate(std::size_t depth) const {
  if (!(lr > 0.0)) throw ConfigError("lr: must be > 0");
  if (batch_size < 2) throw ConfigError("batch_size: must be >= 2 (pairing needs two samples)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay: must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("betas: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas: beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps: must be > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw ConfigError("warmup_fraction: must lie in [0, 1]");
  if (schedule != "cosine") throw ConfigError("schedule: only \"cosine\" is supported");
  if (forward_schedule.layers() != 0 && forward_schedule.layers() != depth) {
    throw ConfigError("forward_schedule: " + std::to_string(forward_schedule.layers()) + " entries for depth " +
                      std::to_string(depth));
  }
  mix.validate();
  if (mix.merge_schedule.layers() != 0 && mix.merge_schedule.layers() != depth) {
    throw ConfigError("mix.merge_schedule: " + std::to_string(mix.merge_schedule.layers()) +
                      " entries for depth " + std::to_string(depth));
  }
  if (mode == Mode::kClassification && variant == Variant::kMergeMix && mix.merge_schedule.layers() == 0) {
    throw ConfigError("mix.merge_schedule: required for variant mergemix (one r per block)");
  }
  objective.validate();
}

mixer::MixConfig TrainConfig::effective_mix(std::size_t depth) const {
  mixer::MixConfig m = mix;
  if (mode == Mode::kClassification && variant == Variant::kTopK) {
    m.merge_schedule = tome::MergeSchedule::none(depth);
    m.label_ratio = mixer::LabelRatio::kArea;
  }
  if (m.merge_schedule.layers() == 0 || all_zero(m.merge_schedule)) m.merge_schedule = tome::MergeSchedule::none(depth);
  return m;
}

void RunConfig::validate() const {
  model.validate();
  train.validate(model.depth);
  if (train.mode == Mode::kPreference) {
    models::CaptionerConfig c = captioner;
    c.vision = model;
    c.validate();
  }
  if (eval.n_bins == 0) throw ConfigError("eval.n_bins: must be >= 1");
  for (std::size_t i = 0; i < eval.occlusion_ratios.size(); ++i) {
    const double r = eval.occlusion_ratios[i];
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("eval.occlusion_ratios: values must lie in [0, 1)");
    if (i > 0 && !(r > eval.occlusion_ratios[i - 1])) {
      throw ConfigError("eval.occlusion_ratios: must be strictly increasing");
    }
  }
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  Section top(j, "");
  if (!top.has("lr")) throw ConfigError("lr: required");
  TrainConfig& t = cfg.train;
  top.get_enum("mode", t.mode,
               {{"cls", Mode::kClassification}, {"classification", Mode::kClassification},
                {"pref", Mode::kPreference}, {"preference", Mode::kPreference}});
  top.get_enum("variant", t.variant,
               {{"vanilla", Variant::kVanilla}, {"topk", Variant::kTopK}, {"mergemix", Variant::kMergeMix}});
  top.get("epochs", t.epochs);
  top.get("batch_size", t.batch_size);
  top.get("lr", t.lr);
  top.get("weight_decay", t.weight_decay);
  if (top.has("betas")) {
    std::vector<double> betas;
    top.get("betas", betas);
    if (betas.size() != 2) throw ConfigError("betas: expected [beta1, beta2]");
    t.beta1 = betas[0];
    t.beta2 = betas[1];
  }
  top.get("eps", t.eps);
  top.get("warmup_fraction", t.warmup_fraction);
  top.get("schedule", t.schedule);
  top.get("seed", t.seed);
  top.get("forward_schedule", t.forward_schedule);
  if (top.has("mix")) read_mix(top.child("mix"), t.mix);
  if (top.has("objective")) {
    Section s = top.child("objective");
    s.get("beta", t.objective.beta);
    s.get("use_reference_model", t.objective.use_reference_model);
    s.get("ranking", t.objective.ranking);
    s.finish();
  }
  if (top.has("model")) read_model(top.child("model"), cfg.model);
  if (top.has("captioner")) {
    Section s = top.child("captioner");
    s.get("vocab", cfg.captioner.vocab);
    s.get("text_depth", cfg.captioner.text_depth);
    s.get("text_heads", cfg.captioner.text_heads);
    s.get("max_len", cfg.captioner.max_len);
    s.get("ablate_cross", cfg.captioner.ablate_cross);
    s.finish();
  }
  cfg.captioner.vision = cfg.model;
  if (top.has("data")) {
    Section s = top.child("data");
    s.get("train", cfg.data.train);
    s.get("test", cfg.data.test);
    s.finish();
  }
  if (top.has("eval")) {
    Section s = top.child("eval");
    s.get("n_bins", cfg.eval.n_bins);
    s.get("occlusion_ratios", cfg.eval.occlusion_ratios);
    s.get("occlusion_seed", cfg.eval.occlusion_seed);
    s.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  const auto& m = cfg.model;
  nlohmann::ordered_json j;
  j["mode"] = to_string(t.mode);
  j["variant"] = to_string(t.variant);
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["lr"] = t.lr;
  j["weight_decay"] = t.weight_decay;
  j["betas"] = {t.beta1, t.beta2};
  j["eps"] = t.eps;
  j["warmup_fraction"] = t.warmup_fraction;
  j["schedule"] = t.schedule;
  j["seed"] = t.seed;
  j["forward_schedule"] = t.forward_schedule.r_per_layer;
  j["mix"] = {{"alpha", t.mix.alpha},
              {"tau", t.mix.tau},
              {"merge_schedule", t.mix.merge_schedule.r_per_layer},
              {"rescale_batch", t.mix.rescale_batch},
              {"rescale_index", t.mix.rescale_index},
              {"label_ratio", t.mix.label_ratio == mixer::LabelRatio::kArea ? "area" : "rescaled"},
              {"recovery", t.mix.recovery == recovery::RecoveryMode::kBroadcast ? "broadcast" : "size_normalized"}};
  j["objective"] = {{"beta", t.objective.beta},
                    {"use_reference_model", t.objective.use_reference_model},
                    {"ranking", t.objective.ranking}};
  j["model"] = {{"image_h", m.image_h},       {"image_w", m.image_w}, {"channels", m.channels},
                {"patch", m.patch},           {"dim", m.dim},         {"depth", m.depth},
                {"heads", m.heads},           {"mlp_hidden", m.mlp_hidden},
                {"num_classes", m.num_classes}, {"use_cls", m.use_cls},
                {"norm_mean", m.norm_mean},   {"norm_std", m.norm_std}};
  j["captioner"] = {{"vocab", cfg.captioner.vocab},
                    {"text_depth", cfg.captioner.text_depth},
                    {"text_heads", cfg.captioner.text_heads},
                    {"max_len", cfg.captioner.max_len},
                    {"ablate_cross", cfg.captioner.ablate_cross}};
  j["data"] = {{"train", cfg.data.train}, {"test", cfg.data.test}};
  j["eval"] = {{"n_bins", cfg.eval.n_bins},
               {"occlusion_ratios", cfg.eval.occlusion_ratios},
               {"occlusion_seed", cfg.eval.occlusion_seed}};
  return j;
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected key=value, got \"" + assignment + "\"");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("--set: empty key in \"" + path + "\"");
    if (!node->is_object()) throw ConfigError(path.substr(0, start ? start - 1 : 0) + ": not an object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::string config_hash(const nlohmann::ordered_json& j) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mergemix::training
