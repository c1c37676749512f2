#include "gvmt/model/decode.h"

#include <algorithm>

#include "gvmt/errors.h"
#include "gvmt/numerics/ops.h"

namespace gvmt::model {

using num::Tensor;

StepResult decode_step(const Model& model, const Tensor& fused, std::span<const std::size_t> prefix) {
  if (prefix.empty()) throw ShapeError("decode_step: empty prefix");
  if (prefix.size() > model.config().max_tgt_len) throw ShapeError("decode_step: prefix longer than max_tgt_len");
  num::NoGradGuard guard;
  Packed in;
  in.add(prefix);
  const std::size_t offsets[] = {0, fused.rows()};
  const Tensor h = decode_hidden(model.transformer(), in, fused, offsets, model.mode(false, nullptr));
  const Tensor last = num::slice_rows(h, prefix.size() - 1, 1);
  const Tensor probs = num::softmax_rows(output_logits(model.transformer(), last));
  return {probs.to_vector(), last.to_vector()};
}

std::vector<std::size_t> greedy_decode(const Model& model, const Tensor& fused, std::size_t max_len) {
  std::vector<std::size_t> prefix{data::Vocabulary::kBos};
  while (prefix.size() - 1 < max_len) {
    const auto step = decode_step(model, fused, prefix);
    const auto best = static_cast<std::size_t>(std::max_element(step.probs.begin(), step.probs.end()) - step.probs.begin());
    prefix.push_back(best);
    if (best == data::Vocabulary::kEos) break;
  }
  return {prefix.begin() + 1, prefix.end()};
}

std::vector<std::vector<std::size_t>> greedy_decode(const Model& model, std::span<const Sample> samples,
                                                    std::size_t max_len, std::size_t batch_size) {
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
  // The decoder input is BOS plus the generated tokens, so it can hold at
  // most max_tgt_len rows.
  max_len = std::min(max_len, model.config().max_tgt_len);
  num::NoGradGuard guard;
  const RunMode mode = model.mode(false, nullptr);
  std::vector<std::vector<std::size_t>> results(samples.size());
  const std::size_t vocab = model.target_vocab().size();
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - start);
    const auto batch = pointers(samples.subspan(start, n));
    const auto enc = model.encode_batch(batch, mode);
    std::vector<std::vector<std::size_t>> prefixes(n, std::vector<std::size_t>{data::Vocabulary::kBos});
    std::vector<bool> done(n, false);
    for (std::size_t t = 0; t < max_len; ++t) {
      Packed in;
      for (const auto& p : prefixes) in.add(p);
      const Tensor h = decode_hidden(model.transformer(), in, enc.fused, enc.src.offsets, mode);
      std::vector<std::size_t> last_rows;
      for (std::size_t b = 0; b < n; ++b) last_rows.push_back(in.begin(b) + in.length(b) - 1);
      const Tensor logits = output_logits(model.transformer(), num::gather_rows(h, last_rows));
      bool all_done = true;
      for (std::size_t b = 0; b < n; ++b) {
        if (done[b]) continue;
        const double* row = logits.data().data() + b * vocab;
        const auto best = static_cast<std::size_t>(std::max_element(row, row + vocab) - row);
        prefixes[b].push_back(best);
        if (best == data::Vocabulary::kEos) done[b] = true;
        all_done &= done[b];
      }
      if (all_done) break;
    }
    for (std::size_t b = 0; b < n; ++b) results[start + b].assign(prefixes[b].begin() + 1, prefixes[b].end());
  }
  return results;
}

std::vector<std::string> detokenize(const Model& model, const std::vector<std::size_t>& ids) {
  return model.target_vocab().decode(ids);
}

}  // namespace gvmt::model
