#include "gvmt/model/config.h"

#include <cmath>
#include <string>

#include "gvmt/errors.h"

namespace gvmt::model {

RunConfig RunConfig::paper() {
  RunConfig c;
  c.layers = 4;
  c.d_h = 128;
  c.ffn = 256;
  c.heads = 8;
  c.dropout = 0.35;
  c.peak_lr = 0.001;
  c.warmup = 4000;
  c.batch_tokens = 4096;
  c.max_steps = 100000;
  return c;
}

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(p >= 1, "p must be at least 1");
  need(gamma >= 0 && std::isfinite(gamma), "gamma must be finite and >= 0");
  need(k >= 1, "k must be at least 1");
  need(lambda >= 0 && std::isfinite(lambda), "lambda must be finite and >= 0");
  need(layers >= 1, "layers must be at least 1");
  need(d_h >= 1 && heads >= 1 && d_h % heads == 0, "d_h must be a positive multiple of heads");
  need(ffn >= 1, "ffn must be at least 1");
  need(dropout >= 0 && dropout < 1, "dropout must be in [0,1)");
  need(max_src_len >= 1 && max_tgt_len >= 1, "max lengths must be at least 1");
  need(label_smoothing >= 0 && label_smoothing < 1, "label_smoothing must be in [0,1)");
  need(peak_lr >= 0 && std::isfinite(peak_lr), "peak_lr must be finite and >= 0");
  need(warmup >= 1, "warmup must be at least 1");
  need(batch_tokens >= 1, "batch_tokens must be at least 1");
  need(max_epochs >= 1, "max_epochs must be at least 1");
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["p"] = p;
  j["w"] = w;
  j["gamma"] = gamma;
  j["k"] = k;
  j["lambda"] = lambda;
  j["soft_weighting"] = soft_weighting;
  j["layers"] = layers;
  j["d_h"] = d_h;
  j["ffn"] = ffn;
  j["heads"] = heads;
  j["dropout"] = dropout;
  j["max_src_len"] = max_src_len;
  j["max_tgt_len"] = max_tgt_len;
  j["label_smoothing"] = label_smoothing;
  j["peak_lr"] = peak_lr;
  j["warmup"] = warmup;
  j["batch_tokens"] = batch_tokens;
  j["max_steps"] = max_steps;
  j["max_epochs"] = max_epochs;
  j["patience"] = patience;
  j["rectified"] = rectified;
  j["seed"] = seed;
  j["no_gr"] = no_gr;
  j["no_tvss"] = no_tvss;
  j["text_only"] = text_only;
  return j;
}

namespace {

template <class T>
void take(const nlohmann::json& j, const char* key, T& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<long long>() < 0)) throw ConfigError("");
    } else {
      if (!it->is_number()) throw ConfigError("");
    }
    field = it->get<T>();
  } catch (const std::exception&) {
    throw ConfigError(std::string("config key \"") + key + "\" has the wrong type: " + it->dump());
  }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  const auto known = c.to_json();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw ConfigError("unknown config key \"" + it.key() + "\"");
  }
  take(j, "p", c.p);
  take(j, "w", c.w);
  take(j, "gamma", c.gamma);
  take(j, "k", c.k);
  take(j, "lambda", c.lambda);
  take(j, "soft_weighting", c.soft_weighting);
  take(j, "layers", c.layers);
  take(j, "d_h", c.d_h);
  take(j, "ffn", c.ffn);
  take(j, "heads", c.heads);
  take(j, "dropout", c.dropout);
  take(j, "max_src_len", c.max_src_len);
  take(j, "max_tgt_len", c.max_tgt_len);
  take(j, "label_smoothing", c.label_smoothing);
  take(j, "peak_lr", c.peak_lr);
  take(j, "warmup", c.warmup);
  take(j, "batch_tokens", c.batch_tokens);
  take(j, "max_steps", c.max_steps);
  take(j, "max_epochs", c.max_epochs);
  take(j, "patience", c.patience);
  take(j, "rectified", c.rectified);
  take(j, "seed", c.seed);
  take(j, "no_gr", c.no_gr);
  take(j, "no_tvss", c.no_tvss);
  take(j, "text_only", c.text_only);
  return c;
}

}  // namespace gvmt::model
