#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gvmt/model/pipeline.h"
#include "gvmt/numerics/optim.h"

namespace gvmt::model {

struct LogRow {
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_loss;  // set on the last step of an epoch
};

void write_log_csv(std::ostream& os, std::span<const LogRow> rows);

using Batch = std::vector<const Sample*>;

// Shuffle, sort by token count (stable), then pack greedily so each batch
// stays within `batch_tokens` (a single long sample still gets its own
// batch). Batch order is shuffled again.
std::vector<Batch> make_batches(std::span<const Sample> samples, std::size_t batch_tokens, num::Rng& rng);

// Mean token loss in eval mode, weighted by target tokens across batches.
double evaluate_loss(const Model& model, std::span<const Sample> samples);

struct TrainOptions {
  // Stop after the first epoch whose mean train loss falls below this.
  std::optional<double> target_loss;
  // Copy back the parameters of the best validation epoch at the end.
  bool restore_best = true;
  std::function<void(const LogRow&)> on_log;
};

struct TrainResult {
  std::vector<LogRow> log;
  std::size_t steps = 0;
  std::size_t epochs = 0;
  double final_train_loss = 0.0;
  std::optional<double> best_val_loss;
  num::OptimizerState optimizer;
};

// RAdam (or Adam) under warmup + inverse square-root decay. Validation runs
// after every epoch when `valid` is non-empty, with patience-based stopping.
TrainResult train(Model& model, std::span<const Sample> train_set, std::span<const Sample> valid,
                  const TrainOptions& options = {}, num::OptimizerState initial = {});

}  // namespace gvmt::model
