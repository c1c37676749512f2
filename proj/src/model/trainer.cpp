#include "gvmt/model/trainer.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "gvmt/errors.h"

namespace gvmt::model {

void write_log_csv(std::ostream& os, std::span<const LogRow> rows) {
  os << "step,lr,train_loss,val_loss\n";
  os.precision(10);
  for (const auto& r : rows) {
    os << r.step << ',' << r.lr << ',' << r.train_loss << ',';
    if (r.val_loss) os << *r.val_loss;
    os << '\n';
  }
}

namespace {

std::size_t tokens_of(const Sample& s) { return s.src.size() + s.tgt.size() + 1; }

}  // namespace

std::vector<Batch> make_batches(std::span<const Sample> samples, std::size_t batch_tokens, num::Rng& rng) {
  if (batch_tokens == 0) throw ConfigError("batch_tokens must be positive");
  std::vector<const Sample*> order = pointers(samples);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [](const Sample* a, const Sample* b) { return tokens_of(*a) < tokens_of(*b); });
  std::vector<Batch> batches;
  Batch current;
  std::size_t used = 0;
  for (const Sample* s : order) {
    const std::size_t t = tokens_of(*s);
    if (!current.empty() && used + t > batch_tokens) {
      batches.push_back(std::move(current));
      current.clear();
      used = 0;
    }
    current.push_back(s);
    used += t;
  }
  if (!current.empty()) batches.push_back(std::move(current));
  rng.shuffle(batches);
  return batches;
}

double evaluate_loss(const Model& model, std::span<const Sample> samples) {
  if (samples.empty()) throw DataError("evaluate_loss: no samples");
  num::NoGradGuard guard;
  num::Rng unused(0);
  const auto batches = make_batches(samples, model.config().batch_tokens, unused);
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& b : batches) {
    std::size_t n = 0;
    for (const auto* s : b) n += s->tgt.size() + 1;
    total += model.loss(b, model.mode(false, nullptr)).item() * static_cast<double>(n);
    tokens += n;
  }
  return total / static_cast<double>(tokens);
}

TrainResult train(Model& model, std::span<const Sample> train_set, std::span<const Sample> valid,
                  const TrainOptions& options, num::OptimizerState initial) {
  const RunConfig& cfg = model.config();
  if (train_set.empty()) throw DataError("train: empty training set");
  const num::ScheduleConfig schedule{cfg.peak_lr, cfg.warmup};
  num::validate(schedule);

  TrainResult result;
  result.optimizer = std::move(initial);
  result.optimizer.rectified = cfg.rectified;
  num::Rng batch_rng(num::mix64(cfg.seed ^ 0x6261746368ULL));
  num::Rng dropout_rng(num::mix64(cfg.seed ^ 0x64726f70ULL));
  const num::ParameterList params = model.parameters();

  std::vector<std::vector<double>> best;
  std::size_t bad_epochs = 0;
  bool stop = false;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs && !stop; ++epoch) {
    const auto batches = make_batches(train_set, cfg.batch_tokens, batch_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;
    for (const auto& batch : batches) {
      if (result.steps >= cfg.max_steps) {
        stop = true;
        break;
      }
      num::zero_grads(params);
      const num::Tensor loss = model.loss(batch, model.mode(true, &dropout_rng));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at step " + std::to_string(result.steps + 1));
      }
      num::backward(loss);
      const double lr = num::lr_at_step(schedule, result.optimizer.step + 1);
      num::optimizer_step(params, result.optimizer, lr);
      ++result.steps;
      epoch_loss += value;
      ++epoch_batches;
      result.final_train_loss = value;
      result.log.push_back({result.steps, lr, value, std::nullopt});
    }
    if (epoch_batches == 0) break;
    ++result.epochs;
    if (!valid.empty()) {
      const double val = evaluate_loss(model, valid);
      result.log.back().val_loss = val;
      if (!result.best_val_loss || val < *result.best_val_loss) {
        result.best_val_loss = val;
        bad_epochs = 0;
        if (options.restore_best) {
          best.clear();
          for (const auto& p : params) best.push_back(p.tensor.to_vector());
        }
      } else if (++bad_epochs >= cfg.patience) {
        stop = true;
      }
    }
    if (options.on_log) {
      for (std::size_t i = result.log.size() - epoch_batches; i < result.log.size(); ++i) options.on_log(result.log[i]);
    }
    if (options.target_loss && epoch_loss / static_cast<double>(epoch_batches) < *options.target_loss) stop = true;
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto dst = num::Tensor(params[i].tensor).mutable_data();
      std::copy(best[i].begin(), best[i].end(), dst.begin());
    }
  }
  num::zero_grads(params);
  return result;
}

}  // namespace gvmt::model
