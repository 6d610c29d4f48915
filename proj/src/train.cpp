#include "ftsum/train.hpp"

#include "ftsum/error.hpp"
#include "ftsum/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

namespace ftsum::model {

void TrainConfig::validate() const {
  if (!(lr >= 0)) throw Error("lr must be non-negative");
  if (batch_size < 1) throw Error("batch_size must be at least 1");
  if (validate_every < 1) throw Error("validate_every must be at least 1");
  if (patience < 1) throw Error("patience must be at least 1");
  if (clip_lo > clip_hi) throw Error("clip range is empty");
  if (!(clip_norm > 0)) throw Error("clip_norm must be positive");
  if (max_epochs < 1) throw Error("max_epochs must be at least 1");
  if (max_steps < 0) throw Error("max_steps must be non-negative");
}

LrSchedule::LrSchedule(double lr, int patience)
    : lr_(lr), patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw Error("patience must be at least 1");
}

bool LrSchedule::observe(double dev_cost) {
  if (dev_cost < best_) {
    best_ = dev_cost;
    stale_ = 0;
    return false;
  }
  if (++stale_ < patience_) return false;
  lr_ /= 2;
  ++halvings_;
  stale_ = 0;
  return true;
}

std::string to_json_line(const TrainLogRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["dev_cost"] = r.dev_cost;
  j["lr"] = r.lr;
  j["gate_mean"] = r.gate_mean ? nlohmann::ordered_json(*r.gate_mean) : nlohmann::ordered_json();
  j["gate_std"] = r.gate_std ? nlohmann::ordered_json(*r.gate_std) : nlohmann::ordered_json();
  return j.dump();
}

TrainResult train(std::span<const ParallelPair> train_pairs, std::span<const ParallelPair> dev_pairs,
                  const Vocab& source_vocab, const Vocab& target_vocab, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, ModelParams initial,
                  const std::function<void(const TrainLogRecord&)>& on_validation) {
  cfg.validate();
  model_cfg.validate();
  if (train_pairs.empty()) throw Error("training set is empty");
  if (dev_pairs.empty()) throw Error("development set is empty");

  TrainResult res;
  res.params = std::move(initial);
  ModelParams grads = nn::zeros_like(res.params);
  auto param_views = nn::views_of(res.params);
  auto grad_views = nn::views_of(grads);
  const auto grad_cviews = nn::as_const(grad_views);
  nn::AdamState adam = nn::make_adam_state(nn::as_const(param_views));
  LrSchedule schedule(cfg.lr, cfg.patience);
  Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  const auto dev_batches = make_ordered_batches(dev_pairs, source_vocab, target_vocab, cfg.batch_size);
  auto validate = [&](long step) {
    TrainLogRecord rec;
    rec.step = step;
    GateRecorder gates;
    const bool gated = model_cfg.fusion == Fusion::Gated;
    rec.dev_cost = dataset_loss(dev_batches, res.params, model_cfg, gated ? &gates : nullptr).loss;
    schedule.observe(rec.dev_cost);
    rec.lr = schedule.lr();
    if (gated) {
      rec.gate_mean = gates.mean;
      rec.gate_std = gates.stddev();
    }
    res.log.push_back(rec);
    if (on_validation) on_validation(rec);
  };

  validate(0);
  long step = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto batches = make_batches(train_pairs, source_vocab, target_vocab, cfg.batch_size,
                                      cfg.seed + static_cast<std::uint64_t>(epoch) + 1);
    for (const auto& batch : batches) {
      for (auto& g : grad_views) g.flat().setZero();
      LossOptions opt;
      opt.train = true;
      opt.rng = &dropout_rng;
      opt.grads = &grads;
      LossResult loss;
      try {
        loss = batch_loss(batch, res.params, model_cfg, opt);
      } catch (const NumericError&) {
        throw NumericError("training diverged at step " + std::to_string(step + 1) + " (epoch " +
                           std::to_string(epoch + 1) + "): non-finite batch loss");
      }
      res.last_batch_loss = loss.loss;
      if (cfg.clip_mode == ClipMode::Value)
        nn::clip_gradients(grad_views, cfg.clip_lo, cfg.clip_hi);
      else
        nn::clip_gradients_by_norm(grad_views, cfg.clip_norm);
      nn::adam_step(param_views, grad_cviews, adam, schedule.lr());
      ++step;
      if (step % cfg.validate_every == 0) validate(step);
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        res.steps = step;
        return res;
      }
    }
  }
  res.steps = step;
  return res;
}

}  // namespace ftsum::model
