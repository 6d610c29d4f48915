#pragma once

#include "ftsum/corpus.hpp"
#include "ftsum/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ftsum::model {

enum class ClipMode { Value, Norm };

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 32;
  long validate_every = 2000;  // batches
  int patience = 10;           // non-improving validations before halving
  ClipMode clip_mode = ClipMode::Value;
  double clip_lo = -5.0;
  double clip_hi = 5.0;
  double clip_norm = 5.0;
  int max_epochs = 10;
  long max_steps = 0;  // 0 = no step limit
  std::uint64_t seed = 1;

  void validate() const;
};

/// Halves the learning rate once the dev cost has failed to beat the best
/// value so far for `patience` validations in a row. The counter restarts on
/// improvement and after each halving.
class LrSchedule {
 public:
  LrSchedule(double lr, int patience);

  /// Returns true when this observation triggered a halving.
  bool observe(double dev_cost);

  double lr() const { return lr_; }
  int halvings() const { return halvings_; }
  int stale() const { return stale_; }
  double best() const { return best_; }

 private:
  double lr_;
  int patience_;
  int stale_ = 0;
  int halvings_ = 0;
  double best_;
};

struct TrainLogRecord {
  long step = 0;
  double dev_cost = 0;
  double lr = 0;
  std::optional<double> gate_mean, gate_std;
};

/// {"step":..,"dev_cost":..,"lr":..,"gate_mean":..,"gate_std":..}; gate fields are null in concat mode.
std::string to_json_line(const TrainLogRecord& r);

struct TrainResult {
  ModelParams params;
  std::vector<TrainLogRecord> log;
  long steps = 0;
  double last_batch_loss = 0;
};

/// Adam on mini-batches with clipping, dev validation at step 0 and every
/// `validate_every` batches, and the plateau schedule above. Throws
/// NumericError when a training loss stops being finite.
TrainResult train(std::span<const ParallelPair> train_pairs, std::span<const ParallelPair> dev_pairs,
                  const Vocab& source_vocab, const Vocab& target_vocab, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, ModelParams initial,
                  const std::function<void(const TrainLogRecord&)>& on_validation = {});

}  // namespace ftsum::model
