#pragma once

// JSON (de)serialization of configuration with strict key checking.

#include <filesystem>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "soynet/adam.hpp"
#include "soynet/data.hpp"
#include "soynet/loss.hpp"
#include "soynet/matcher.hpp"
#include "soynet/model.hpp"

namespace soynet {

using Json = nlohmann::json;

struct TrainConfig {
  ModelConfig model = ModelConfig::from_variant("T");
  std::size_t batch_size = 4;
  std::size_t epochs = 100;
  double lr = 2e-4;
  double weight_decay = 1e-7;
  std::uint64_t seed = 0;
  MatchConfig match;
  LossConfig loss;
  bool augment = true;
  double val_threshold = kDefaultThreshold;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    match.validate();
    loss.validate();
    model.backbone.validate();
  }
};

/// Everything a CLI run needs.
struct RunConfig {
  TrainConfig train;
  SplitSpec split;
  std::string data_dir;
  std::string output_dir = "runs/default";
  std::string checkpoint;  // optional initial weights
};

namespace detail {

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename V>
void read_opt(const Json& obj, const char* key, V& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<V>();
  } catch (const Json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

}  // namespace detail

inline Json to_json(const ModelConfig& m) {
  const auto& b = m.backbone;
  return {{"variant", m.variant},
          {"embed_dim", b.embed_dim},
          {"depths", b.depths},
          {"heads", b.heads},
          {"window", b.window},
          {"mlp_ratio", b.mlp_ratio},
          {"relative_position_bias", b.relative_position_bias},
          {"anchors", m.anchors}};
}

/// "variant" T/S/B/L fills the architecture; "custom" requires embed_dim and depths.
/// Any explicit field overrides the variant's value.
inline ModelConfig model_config_from_json(const Json& j) {
  const std::string where = "model";
  detail::reject_unknown(j, {"variant", "embed_dim", "depths", "heads", "window", "mlp_ratio", "relative_position_bias", "anchors"}, where);
  std::string variant = "T";
  detail::read_opt(j, "variant", variant, where);
  ModelConfig m;
  if (variant == "custom") {
    if (!j.contains("embed_dim") || !j.contains("depths")) throw ConfigError("custom model needs embed_dim and depths");
    std::size_t c = 0;
    std::array<std::size_t, 3> depths{};
    detail::read_opt(j, "embed_dim", c, where);
    detail::read_opt(j, "depths", depths, where);
    m = ModelConfig::custom(c, depths);
  } else {
    m = ModelConfig::from_variant(variant);
    detail::read_opt(j, "embed_dim", m.backbone.embed_dim, where);
    detail::read_opt(j, "depths", m.backbone.depths, where);
    if (j.contains("embed_dim") && !j.contains("heads")) m.backbone.heads = BackboneConfig::default_heads(m.backbone.embed_dim);
  }
  detail::read_opt(j, "heads", m.backbone.heads, where);
  detail::read_opt(j, "window", m.backbone.window, where);
  detail::read_opt(j, "mlp_ratio", m.backbone.mlp_ratio, where);
  detail::read_opt(j, "relative_position_bias", m.backbone.relative_position_bias, where);
  detail::read_opt(j, "anchors", m.anchors, where);
  if (m.anchors == 0) throw ConfigError("model.anchors must be >= 1");
  m.backbone.validate();
  return m;
}

inline Json to_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"lr", t.lr},
          {"weight_decay", t.weight_decay},
          {"seed", t.seed},
          {"augment", t.augment},
          {"val_threshold", t.val_threshold}};
}

inline Json to_json(const SplitSpec& s) {
  return {{"train", s.train}, {"val", s.val}, {"test", s.test}, {"seed", s.seed}};
}

/// Full training description (model + optimization + matching + loss).
inline Json train_config_json(const TrainConfig& t) {
  return {{"model", to_json(t.model)},
          {"train", to_json(t)},
          {"match", {{"tau", t.match.tau}}},
          {"loss", {{"lambda1", t.loss.lambda1}, {"lambda2", t.loss.lambda2}}}};
}

inline void apply_train_section(const Json& j, TrainConfig& t) {
  const std::string where = "train";
  detail::reject_unknown(j, {"batch_size", "epochs", "lr", "weight_decay", "seed", "augment", "val_threshold"}, where);
  detail::read_opt(j, "batch_size", t.batch_size, where);
  detail::read_opt(j, "epochs", t.epochs, where);
  detail::read_opt(j, "lr", t.lr, where);
  detail::read_opt(j, "weight_decay", t.weight_decay, where);
  detail::read_opt(j, "seed", t.seed, where);
  detail::read_opt(j, "augment", t.augment, where);
  detail::read_opt(j, "val_threshold", t.val_threshold, where);
}

inline TrainConfig train_config_from_json(const Json& j) {
  detail::reject_unknown(j, {"model", "train", "match", "loss"}, "training config");
  TrainConfig t;
  if (j.contains("model")) t.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) apply_train_section(j.at("train"), t);
  if (j.contains("match")) {
    detail::reject_unknown(j.at("match"), {"tau"}, "match");
    detail::read_opt(j.at("match"), "tau", t.match.tau, "match");
  }
  if (j.contains("loss")) {
    detail::reject_unknown(j.at("loss"), {"lambda1", "lambda2"}, "loss");
    detail::read_opt(j.at("loss"), "lambda1", t.loss.lambda1, "loss");
    detail::read_opt(j.at("loss"), "lambda2", t.loss.lambda2, "loss");
  }
  t.validate();
  return t;
}

inline Json to_json(const RunConfig& r) {
  Json j = train_config_json(r.train);
  j["split"] = to_json(r.split);
  j["data_dir"] = r.data_dir;
  j["output_dir"] = r.output_dir;
  if (!r.checkpoint.empty()) j["checkpoint"] = r.checkpoint;
  return j;
}

/// Strict parse: unknown keys anywhere are rejected; referenced inputs must exist.
inline RunConfig run_config_from_json(const Json& j, bool check_paths = true) {
  detail::reject_unknown(j, {"model", "train", "match", "loss", "split", "data_dir", "output_dir", "checkpoint"}, "config");
  RunConfig r;
  Json core = Json::object();
  for (const char* k : {"model", "train", "match", "loss"})
    if (j.contains(k)) core[k] = j.at(k);
  r.train = train_config_from_json(core);
  if (j.contains("split")) {
    const Json& s = j.at("split");
    detail::reject_unknown(s, {"train", "val", "test", "seed"}, "split");
    detail::read_opt(s, "train", r.split.train, "split");
    detail::read_opt(s, "val", r.split.val, "split");
    detail::read_opt(s, "test", r.split.test, "split");
    detail::read_opt(s, "seed", r.split.seed, "split");
  }
  r.split.validate();
  if (!j.contains("data_dir")) throw ConfigError("config needs data_dir");
  detail::read_opt(j, "data_dir", r.data_dir, "config");
  detail::read_opt(j, "output_dir", r.output_dir, "config");
  detail::read_opt(j, "checkpoint", r.checkpoint, "config");
  if (check_paths) {
    if (!std::filesystem::is_directory(r.data_dir)) throw ConfigError("data_dir does not exist: " + r.data_dir);
    if (!r.checkpoint.empty() && !std::filesystem::exists(r.checkpoint)) {
      throw ConfigError("checkpoint does not exist: " + r.checkpoint);
    }
  }
  return r;
}

inline RunConfig load_run_config(const std::string& path, bool check_paths = true) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, check_paths);
}

}  // namespace soynet
