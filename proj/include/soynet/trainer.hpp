#pragma once

// augment -> forward -> match -> loss -> backward -> Adam, with validation-based selection.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "soynet/adam.hpp"
#include "soynet/checkpoint.hpp"
#include "soynet/config.hpp"
#include "soynet/data.hpp"
#include "soynet/evaluator.hpp"
#include "soynet/loss.hpp"
#include "soynet/matcher.hpp"
#include "soynet/model.hpp"

namespace soynet {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loc = 0.0;
  double cls = 0.0;
  double total = 0.0;
  double val_mae = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based, 0 while empty
  double best_val_mae = std::numeric_limits<double>::infinity();

  /// Appends and updates the best epoch (strict improvement, so ties keep the earliest).
  bool record(const EpochRecord& r) {
    epochs.push_back(r);
    if (r.val_mae < best_val_mae) {
      best_val_mae = r.val_mae;
      best_epoch = r.epoch;
      return true;
    }
    return false;
  }
};

inline Json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"loc", r.loc}, {"cls", r.cls}, {"total", r.total}, {"val_mae", r.val_mae}};
}

inline EpochRecord epoch_record_from_json(const Json& j) {
  return {j.at("epoch").get<std::size_t>(), j.at("loc").get<double>(), j.at("cls").get<double>(),
          j.at("total").get<double>(), j.at("val_mae").get<double>()};
}

/// One optimization step on an already-augmented batch; returns batch-mean losses.
/// Matching is per image; gradients are averaged over the batch in item order.
template <typename T>
LossReport train_step(PodNet<T>& model, const std::vector<AnnotatedImage>& batch, const TrainConfig& cfg,
                      AdamState<T>& adam, std::size_t step_index = 0) {
  if (batch.empty()) throw ConfigError("train_step needs a non-empty batch");
  model.zero_grad();
  LossReport mean;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const AnnotatedImage& item : batch) {
    ModelOutput<T> out = [&] {
      if constexpr (std::is_same_v<T, float>) return model.forward(item.image);
      else return model.forward(item.image.template cast<T>());
    }();
    const MatchResult m = match(item.points, out.proposals, cfg.match);
    LossGrads<T> lg;
    try {
      lg = loss_with_grads(item.points, out.head, out.proposals, m, cfg.loss, scale);
    } catch (const NumericError&) {
      throw NumericError("non-finite loss at step " + std::to_string(step_index) + " on item '" + item.id + "'");
    }
    model.backward(lg.d_offsets, lg.d_logits);
    mean.loc += lg.report.loc * scale;
    mean.cls += lg.report.cls * scale;
    mean.total += lg.report.total * scale;
  }
  for (const Param<T>* p : model.parameters()) {
    if (!p->grad.all_finite()) {
      std::string ids;
      for (const auto& it : batch) ids += (ids.empty() ? "" : ",") + it.id;
      throw NumericError("non-finite gradient in " + p->name + " at step " + std::to_string(step_index) +
                         " (items " + ids + ")");
    }
  }
  adam_step(model.parameters(), adam);
  return mean;
}

struct FitOptions {
  std::string output_dir;  // empty: nothing written
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Owns the model, optimizer state and history of one training run.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg) : cfg_(std::move(cfg)), model_(cfg_.model) {
    cfg_.validate();
    model_.init(mix_seed(cfg_.seed, 0x1417));
    adam_ = AdamState<float>(model_.parameters(), {cfg_.lr, 0.9, 0.999, 1e-8, cfg_.weight_decay});
    snapshot_best();
  }

  /// Continues a run from a checkpoint written by save(); `cfg` may extend epochs.
  static Trainer resume(const std::string& path, std::optional<TrainConfig> cfg = std::nullopt) {
    const CheckpointData<float> ck = load_checkpoint<float>(path);
    TrainConfig base = train_config_from_json(ck.meta.at("config"));
    if (cfg) {
      if (to_json(cfg->model) != to_json(base.model)) throw ConfigError("resume: model architecture differs from checkpoint");
      base = *cfg;
    }
    Trainer t(base);
    t.restore(ck);
    return t;
  }

  LossReport step(const std::vector<AnnotatedImage>& batch) {
    return train_step(model_, batch, cfg_, adam_, static_cast<std::size_t>(adam_.step));
  }

  /// Item `id` augmented for epoch `epoch` (or passed through when augmentation is off).
  AnnotatedImage prepare(const AnnotatedImage& item, std::size_t epoch) const {
    if (!cfg_.augment) return item;
    Rng rng(mix_seed(cfg_.seed, epoch, hash_string(item.id)));
    return augment(item, rng);
  }

  /// One pass over `train` in a seeded order, then validation MAE on `val`.
  EpochRecord run_epoch(const std::vector<AnnotatedImage>& train, const std::vector<AnnotatedImage>& val) {
    const std::size_t epoch = history_.epochs.size() + 1;
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return train[a].id < train[b].id; });
    Rng rng(mix_seed(cfg_.seed, epoch, 0xe90c));
    rng.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      std::vector<AnnotatedImage> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg_.batch_size); ++k)
        batch.push_back(prepare(train[order[k]], epoch));
      const LossReport r = step(batch);
      rec.loc += r.loc;
      rec.cls += r.cls;
      rec.total += r.total;
      ++steps;
    }
    rec.loc /= static_cast<double>(steps);
    rec.cls /= static_cast<double>(steps);
    rec.total /= static_cast<double>(steps);
    rec.val_mae = validation_mae(val);
    if (history_.record(rec)) snapshot_best();
    return rec;
  }

  double validation_mae(const std::vector<AnnotatedImage>& val) {
    double s = 0.0;
    for (const AnnotatedImage& item : val) {
      const double count = static_cast<double>(infer(model_, item.image, cfg_.val_threshold).count());
      s += std::abs(count - static_cast<double>(item.points.size()));
    }
    return val.empty() ? 0.0 : s / static_cast<double>(val.size());
  }

  /// Runs until cfg.epochs epochs are recorded (resumed runs continue numbering).
  void fit(const std::vector<AnnotatedImage>& train, const std::vector<AnnotatedImage>& val, const FitOptions& opt = {}) {
    if (train.empty()) throw ConfigError("fit: training split is empty");
    if (val.empty()) throw ConfigError("fit: validation split is empty");
    std::ofstream log;
    if (!opt.output_dir.empty()) {
      std::filesystem::create_directories(opt.output_dir);
      log.open(std::filesystem::path(opt.output_dir) / "train_log.jsonl",
               history_.epochs.empty() ? std::ios::trunc : std::ios::app);
      if (!log) throw IoError("cannot open training log in " + opt.output_dir);
    }
    while (history_.epochs.size() < cfg_.epochs) {
      const EpochRecord rec = run_epoch(train, val);
      if (log.is_open()) {
        log << to_json(rec).dump() << '\n';
        log.flush();
      }
      if (!opt.output_dir.empty()) {
        save((std::filesystem::path(opt.output_dir) / "last.ckpt").string());
        if (history_.best_epoch == rec.epoch) save_best((std::filesystem::path(opt.output_dir) / "best.ckpt").string());
      }
      if (opt.on_epoch) opt.on_epoch(rec);
    }
  }

  /// Full state: parameters, Adam moments, best snapshot and history.
  void save(const std::string& path) const {
    CheckpointData<float> ck;
    ck.meta = {{"config", train_config_json(cfg_)}, {"trainer", trainer_meta()}};
    const auto& params = model_.parameters();
    for (const auto* p : params) ck.tensors.emplace_back(p->name, p->value);
    for (std::size_t k = 0; k < params.size(); ++k) ck.tensors.emplace_back("adam.m/" + params[k]->name, adam_.m[k]);
    for (std::size_t k = 0; k < params.size(); ++k) ck.tensors.emplace_back("adam.v/" + params[k]->name, adam_.v[k]);
    for (std::size_t k = 0; k < params.size(); ++k) ck.tensors.emplace_back("best/" + params[k]->name, best_[k]);
    save_checkpoint(path, ck);
  }

  /// Model-only checkpoint of the validation-selected parameters.
  void save_best(const std::string& path) const {
    CheckpointData<float> ck;
    ck.meta = {{"config", train_config_json(cfg_)}, {"trainer", trainer_meta()}};
    const auto& params = model_.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) ck.tensors.emplace_back(params[k]->name, best_[k]);
    save_checkpoint(path, ck);
  }

  /// Starts from the parameters stored in a checkpoint (optimizer state and history untouched).
  void load_weights(const std::string& path);

  PodNet<float> best_model() const {
    PodNet<float> m = model_;
    const auto& params = m.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best_[k];
    return m;
  }

  PodNet<float>& model() { return model_; }
  const TrainHistory& history() const { return history_; }
  const AdamState<float>& optimizer() const { return adam_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  Json trainer_meta() const {
    Json hist = Json::array();
    for (const auto& r : history_.epochs) hist.push_back(to_json(r));
    return {{"history", hist}, {"best_epoch", history_.best_epoch}, {"adam_step", adam_.step}};
  }

  void restore(const CheckpointData<float>& ck) {
    const auto& params = model_.parameters();
    const auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor<float>& {
      const Tensor<float>* t = ck.find(name);
      if (!t) throw IoError("checkpoint is missing tensor '" + name + "'");
      if (t->shape() != shape) throw IoError("checkpoint tensor '" + name + "' has the wrong shape");
      return *t;
    };
    for (std::size_t k = 0; k < params.size(); ++k) {
      const Shape& s = params[k]->value.shape();
      params[k]->value = fetch(params[k]->name, s);
      adam_.m[k] = fetch("adam.m/" + params[k]->name, s);
      adam_.v[k] = fetch("adam.v/" + params[k]->name, s);
      best_[k] = fetch("best/" + params[k]->name, s);
    }
    const Json& tm = ck.meta.at("trainer");
    adam_.step = tm.at("adam_step").get<std::int64_t>();
    history_ = {};
    for (const auto& r : tm.at("history")) history_.record(epoch_record_from_json(r));
    if (history_.best_epoch != tm.at("best_epoch").get<std::size_t>()) throw IoError("checkpoint history is inconsistent");
  }

  void snapshot_best() {
    best_.clear();
    for (const auto* p : model_.parameters()) best_.push_back(p->value);
  }

  TrainConfig cfg_;
  PodNet<float> model_;
  AdamState<float> adam_;
  TrainHistory history_;
  std::vector<Tensor<float>> best_;
};

/// Loads a model (any checkpoint written by Trainer) for inference.
inline PodNet<float> load_model(const std::string& path) {
  const CheckpointData<float> ck = load_checkpoint<float>(path);
  TrainConfig cfg;
  try {
    cfg = train_config_from_json(ck.meta.at("config"));
  } catch (const Json::exception& e) {
    throw IoError("checkpoint '" + path + "' has no usable config: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("checkpoint '" + path + "' has an invalid config: " + e.what());
  }
  PodNet<float> model(cfg.model);
  for (auto* p : model.parameters()) {
    const Tensor<float>* t = ck.find(p->name);
    if (!t || t->shape() != p->value.shape()) throw IoError("checkpoint '" + path + "' lacks tensor " + p->name);
    p->value = *t;
  }
  return model;
}

inline void Trainer::load_weights(const std::string& path) {
  const PodNet<float> src = load_model(path);
  if (to_json(src.config()) != to_json(model_.config())) throw ConfigError("initial weights in '" + path + "' have a different architecture");
  const auto& from = src.parameters();
  const auto& to = model_.parameters();
  for (std::size_t k = 0; k < to.size(); ++k) to[k]->value = from[k]->value;
  snapshot_best();
}

struct FitResult {
  PodNet<float> best;
  TrainHistory history;
};

inline FitResult fit(const std::vector<AnnotatedImage>& train, const std::vector<AnnotatedImage>& val,
                     const TrainConfig& cfg, const FitOptions& opt = {}) {
  Trainer t(cfg);
  t.fit(train, val, opt);
  return {t.best_model(), t.history()};
}

}  // namespace soynet
