#pragma once

#include <span>
#include <vector>

#include "gvmt/model/pipeline.h"

namespace gvmt::model {

struct StepResult {
  std::vector<double> probs;   // softmax over the target vocabulary
  std::vector<double> hidden;  // h_t
};

// Distribution of the next token after `prefix` (which starts with BOS) given
// memory F [L × d_h] of one sample. Eval mode, no gradients.
StepResult decode_step(const Model& model, const num::Tensor& fused, std::span<const std::size_t> prefix);

// Greedy argmax decoding (ties to the lowest id) until EOS or max_len
// tokens. Results exclude BOS and include the EOS when one was produced.
std::vector<std::size_t> greedy_decode(const Model& model, const num::Tensor& fused, std::size_t max_len);

// Batched greedy decoding of many samples; same results as decoding each
// sample alone.
std::vector<std::vector<std::size_t>> greedy_decode(const Model& model, std::span<const Sample> samples,
                                                    std::size_t max_len, std::size_t batch_size = 32);

// Token strings without specials.
std::vector<std::string> detokenize(const Model& model, const std::vector<std::size_t>& ids);

}  // namespace gvmt::model
