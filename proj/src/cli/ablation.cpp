#include "gvmt/cli/ablation.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "gvmt/errors.h"
#include "gvmt/eval/disambiguation.h"
#include "gvmt/model/decode.h"
#include "gvmt/model/trainer.h"

namespace gvmt::cli {

std::vector<Setting> ablation_settings(const model::RunConfig& base, bool no_gr, bool no_tvss, bool no_both) {
  std::vector<Setting> out{{"full", base}};
  out[0].config.no_gr = out[0].config.no_tvss = false;
  auto add = [&](const char* name, bool gr, bool tvss) {
    Setting s{name, out[0].config};
    s.config.no_gr = gr;
    s.config.no_tvss = tvss;
    out.push_back(s);
  };
  if (no_gr) add("no_gr", true, false);
  if (no_tvss) add("no_tvss", false, true);
  if (no_both) add("no_both", true, true);
  return out;
}

std::pair<std::string, std::vector<std::size_t>> parse_sweep_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("sweep axis must look like p=5,10,20, got \"" + spec + "\"");
  std::string name = spec.substr(0, eq);
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  if (name != "p" && name != "w" && name != "k") throw ConfigError("unknown sweep axis \"" + name + "\" (use p, w or k)");
  std::vector<std::size_t> values;
  std::size_t pos = eq + 1;
  while (pos <= spec.size()) {
    const auto comma = std::min(spec.find(',', pos), spec.size());
    const std::string item = spec.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      values.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("bad sweep value \"" + item + "\" in \"" + spec + "\"");
    }
    pos = comma + 1;
  }
  return {name, values};
}

std::vector<Setting> sweep_settings(const model::RunConfig& base,
                                    const std::vector<std::pair<std::string, std::vector<std::size_t>>>& axes) {
  std::vector<Setting> out{{"", base}};
  for (const auto& [axis, values] : axes) {
    if (values.empty()) throw ConfigError("sweep axis " + axis + " has no values");
    std::vector<Setting> next;
    for (const auto& s : out) {
      for (auto v : values) {
        Setting t = s;
        auto& field = axis == "p" ? t.config.p : axis == "w" ? t.config.w : t.config.k;
        field = v;
        t.name += (t.name.empty() ? "" : ";") + axis + "=" + std::to_string(v);
        next.push_back(t);
      }
    }
    out = std::move(next);
  }
  for (const auto& s : out) s.config.validate();
  return out;
}

double SettingResult::mean_bleu() const {
  double sum = 0.0;
  for (const auto& s : seeds) sum += s.bleu;
  return seeds.empty() ? 0.0 : sum / static_cast<double>(seeds.size());
}

std::optional<double> SettingResult::mean_accuracy() const {
  double sum = 0.0;
  for (const auto& s : seeds) {
    if (!s.accuracy) return std::nullopt;
    sum += *s.accuracy;
  }
  if (seeds.empty()) return std::nullopt;
  return sum / static_cast<double>(seeds.size());
}

namespace {

data::Vocabulary vocab_of(const data::Corpus& corpus, bool source) {
  std::vector<std::vector<std::string>> sentences;
  for (const auto& v : corpus) {
    for (const auto& r : v.records) sentences.push_back(source ? r.source : r.target);
  }
  return data::Vocabulary::build(sentences);
}

}  // namespace

SeedResult run_one(const data::Dataset& ds, model::RunConfig cfg, const std::string& split) {
  cfg.validate();
  if (ds.train.empty()) throw DataError("dataset has no training videos");
  const auto& first = ds.features.at(ds.train.front().video_id);
  auto src = vocab_of(ds.train, true);
  auto tgt = vocab_of(ds.train, false);
  const auto train = model::prepare_samples(ds.train, ds.features, ds.embeddings, cfg, src, tgt);
  const auto valid = model::prepare_samples(ds.valid, ds.features, ds.embeddings, cfg, src, tgt);
  const auto& eval_corpus = ds.split(split);
  const auto eval_samples = model::prepare_samples(eval_corpus, ds.features, ds.embeddings, cfg, src, tgt);
  if (eval_samples.empty()) throw DataError("split " + split + " is empty");

  model::Model m(cfg, std::move(src), std::move(tgt), first.regions, first.dim);
  const auto trained = model::train(m, train, valid);
  const auto decodes = model::greedy_decode(m, eval_samples, cfg.max_tgt_len);

  SeedResult r;
  r.seed = cfg.seed;
  r.steps = trained.steps;
  std::vector<eval::Tokens> cand, ref;
  std::vector<eval::DecodedSample> decoded;
  std::size_t i = 0;
  for (const auto& v : eval_corpus) {
    for (const auto& rec : v.records) {
      cand.push_back(m.target_vocab().decode(decodes[i++]));
      ref.push_back(rec.target);
      decoded.push_back({rec.video_id, rec.seg_idx, cand.back()});
    }
  }
  r.bleu = eval::bleu4(cand, ref).bleu;
  const auto labels = eval::labels_for(ds.labels, eval_corpus);
  if (!labels.empty()) r.accuracy = eval::disambiguation_accuracy(decoded, labels).accuracy;
  return r;
}

std::vector<SettingResult> run_settings(const data::Dataset& ds, std::span<const Setting> settings,
                                        std::span<const std::uint64_t> seeds, const std::string& split,
                                        std::size_t threads) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  std::vector<SettingResult> out;
  for (const auto& s : settings) out.push_back({s, std::vector<SeedResult>(seeds.size())});
  const std::size_t jobs = settings.size() * seeds.size();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        model::RunConfig cfg = settings[j / seeds.size()].config;
        cfg.seed = seeds[j % seeds.size()];
        out[j / seeds.size()].seeds[j % seeds.size()] = run_one(ds, cfg, split);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, jobs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void write_results_csv(std::ostream& os, std::span<const SettingResult> results) {
  os << "setting,p,w,k,no_gr,no_tvss,seeds,bleu,accuracy\n";
  os.precision(6);
  for (const auto& r : results) {
    const auto& c = r.setting.config;
    os << r.setting.name << ',' << c.p << ',' << c.w << ',' << c.k << ',' << c.no_gr << ',' << c.no_tvss << ','
       << r.seeds.size() << ',' << std::fixed << r.mean_bleu() << ',';
    if (auto a = r.mean_accuracy()) os << *a;
    os << std::defaultfloat << '\n';
  }
}

}  // namespace gvmt::cli
