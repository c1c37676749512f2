#include "gvmt/cli/commands.h"

#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "gvmt/cli/ablation.h"
#include "gvmt/cli/run_config.h"
#include "gvmt/dataio/binio.h"
#include "gvmt/dataio/synthetic.h"
#include "gvmt/eval/bleu.h"
#include "gvmt/model/decode.h"
#include "gvmt/model/persist.h"
#include "gvmt/model/trainer.h"
#include "gvmt/retrieval/retrieval.h"

namespace gvmt::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  return 2;
}

std::vector<eval::DecodedSample> load_translations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<eval::DecodedSample> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(n) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      const auto seg = j.at("seg_idx").get<long long>();
      if (seg < 0) throw DataError(where + "negative seg_idx");
      out.push_back({j.at("video_id").get<std::string>(), static_cast<std::size_t>(seg),
                     data::tokenize(j.at("tgt").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + e.what());
    }
  }
  return out;
}

void write_translations(std::span<const eval::DecodedSample> rows, const fs::path& path) {
  std::string text;
  for (const auto& r : rows) {
    ordered_json j;
    j["video_id"] = r.video_id;
    j["seg_idx"] = r.seg_idx;
    j["tgt"] = data::join_tokens(r.tokens);
    text += j.dump() + "\n";
  }
  data::write_file_atomic(path, text);
}

namespace {

void write_meta(const fs::path& artifact, ordered_json meta) {
  data::write_file_atomic(fs::path(artifact.string() + ".meta.json"), meta.dump(2) + "\n");
}

data::Vocabulary vocab_of(const data::Corpus& corpus, bool source) {
  std::vector<std::vector<std::string>> sentences;
  for (const auto& v : corpus) {
    for (const auto& r : v.records) sentences.push_back(source ? r.source : r.target);
  }
  return data::Vocabulary::build(sentences);
}

std::pair<std::size_t, std::size_t> visual_geometry(const data::Dataset& ds) {
  if (ds.features.empty()) throw DataError("dataset has no features");
  const auto& f = ds.features.begin()->second;
  return {f.regions, f.dim};
}

data::Dataset load_checked(const fs::path& dir) {
  auto ds = data::load_dataset(dir);
  data::validate_dataset(ds);
  return ds;
}

// ---- gen ------------------------------------------------------------------

struct GenArgs {
  std::string out;
  data::SyntheticConfig cfg;
};

void cmd_gen(const GenArgs& a, std::ostream& out) {
  const auto ds = data::gen_synthetic(a.cfg);
  data::write_synthetic(ds, a.cfg, a.out);
  ordered_json j;
  j["out"] = a.out;
  j["videos"] = ds.audit.n_videos;
  j["segments"] = ds.audit.n_segments;
  j["ambiguous"] = ds.audit.n_ambiguous;
  j["context_only"] = ds.audit.n_context_only;
  j["carriers"] = ds.audit.n_carriers;
  j["retrieval_failures"] = ds.audit.n_failures;
  j["min_marker_distance"] = ds.audit.min_marker_distance;
  out << j.dump(2) << '\n';
}

// ---- validate -------------------------------------------------------------

void cmd_validate(const std::string& dir, std::ostream& out) {
  const auto ds = load_checked(dir);
  const auto [regions, dim] = visual_geometry(ds);
  ordered_json j;
  j["train_segments"] = data::corpus_size(ds.train);
  j["valid_segments"] = data::corpus_size(ds.valid);
  j["test_segments"] = data::corpus_size(ds.test);
  j["videos"] = ds.train.size() + ds.valid.size() + ds.test.size();
  j["regions"] = regions;
  j["feature_dim"] = dim;
  j["embedding_dim"] = ds.embeddings.begin()->second.dim;
  j["labels"] = ds.labels.size();
  out << j.dump(2) << '\n';
}

// ---- embed ----------------------------------------------------------------

struct EmbedArgs {
  std::string data, out;
  std::size_t dim = 64;
  std::uint64_t seed = 1;
};

void cmd_embed(const EmbedArgs& a, std::ostream& out) {
  const fs::path dir(a.data);
  const fs::path target = a.out.empty() ? dir / "embeddings" : fs::path(a.out);
  std::error_code ec;
  fs::create_directories(target, ec);
  if (ec) throw DataError("cannot create " + target.string() + ": " + ec.message());
  std::size_t videos = 0, segments = 0;
  for (const char* split : {"train", "valid", "test"}) {
    const fs::path file = dir / (std::string(split) + ".jsonl");
    if (!fs::exists(file)) continue;
    for (const auto& v : data::load_corpus(file)) {
      data::write_embeddings(data::embed_video(v, a.dim, a.seed), target);
      ++videos;
      segments += v.records.size();
    }
  }
  if (videos == 0) throw DataError("no corpus files in " + dir.string());
  out << ordered_json{{"videos", videos}, {"segments", segments}, {"dim", a.dim}, {"out", target.string()}}.dump(2)
      << '\n';
}

// ---- retrieve -------------------------------------------------------------

struct RetrieveArgs {
  std::string data, video;
  std::size_t seg = 0;
  ConfigFlags flags;
};

void cmd_retrieve(const RetrieveArgs& a, std::ostream& out) {
  const auto cfg = resolve_config(a.flags, false);
  const auto store = data::load_embedding_dir(fs::path(a.data) / "embeddings");
  auto it = store.find(a.video);
  if (it == store.end()) throw DataError("unknown video " + a.video);
  const auto index = retrieval::build_index(it->second);
  const auto scored = retrieval::retrieve_scored(index, a.seg, cfg.p);
  ordered_json j;
  j["video_id"] = a.video;
  j["query"] = a.seg;
  j["p"] = cfg.p;
  j["w"] = cfg.w;
  j["gamma"] = cfg.gamma;
  j["indices"] = ordered_json::array();
  j["similarities"] = ordered_json::array();
  for (const auto& s : scored) {
    j["indices"].push_back(s.seg_idx);
    j["similarities"].push_back(s.similarity);
  }
  out << j.dump(2) << '\n';
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string data, out, log;
  ConfigFlags flags;
};

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve_config(a.flags);
  const auto ds = load_checked(a.data);
  const auto [regions, dim] = visual_geometry(ds);
  auto src = vocab_of(ds.train, true);
  auto tgt = vocab_of(ds.train, false);
  const auto train = model::prepare_samples(ds.train, ds.features, ds.embeddings, cfg, src, tgt);
  const auto valid = model::prepare_samples(ds.valid, ds.features, ds.embeddings, cfg, src, tgt);
  model::Model m(cfg, std::move(src), std::move(tgt), regions, dim);
  model::TrainOptions opt;
  opt.on_log = [&err](const model::LogRow& r) {
    if (r.val_loss) err << "step " << r.step << " train_loss " << r.train_loss << " val_loss " << *r.val_loss << '\n';
  };
  const auto result = model::train(m, train, valid, opt);
  model::save_model(m, a.out, &result.optimizer);
  if (!a.log.empty()) {
    std::ostringstream csv;
    model::write_log_csv(csv, result.log);
    data::write_file_atomic(a.log, csv.str());
  }
  ordered_json j;
  j["checkpoint"] = a.out;
  j["steps"] = result.steps;
  j["epochs"] = result.epochs;
  j["final_train_loss"] = result.final_train_loss;
  if (result.best_val_loss) j["best_val_loss"] = *result.best_val_loss;
  j["config"] = cfg.to_json();
  out << j.dump(2) << '\n';
}

// ---- translate ------------------------------------------------------------

struct TranslateArgs {
  std::string model, data, split = "test", out;
  std::optional<std::size_t> max_len;
};

void cmd_translate(const TranslateArgs& a, std::ostream& out) {
  auto loaded = model::load_model(a.model);
  const auto& m = loaded.model;
  const auto ds = load_checked(a.data);
  const auto [regions, dim] = visual_geometry(ds);
  if (regions != m.regions() || dim != m.visual_dim()) {
    throw ConfigError("checkpoint expects " + std::to_string(m.regions()) + "x" + std::to_string(m.visual_dim()) +
                      " region features, dataset has " + std::to_string(regions) + "x" + std::to_string(dim));
  }
  const auto& corpus = ds.split(a.split);
  const auto samples =
      model::prepare_samples(corpus, ds.features, ds.embeddings, m.config(), m.source_vocab(), m.target_vocab());
  if (samples.empty()) throw DataError("split " + a.split + " is empty");
  const std::size_t max_len = a.max_len.value_or(m.config().max_tgt_len);
  if (max_len < 1) throw ConfigError("--max-len must be at least 1");
  const auto decodes = model::greedy_decode(m, samples, max_len);
  std::vector<eval::DecodedSample> rows;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rows.push_back({samples[i].video_id, samples[i].seg_idx, m.target_vocab().decode(decodes[i])});
  }
  write_translations(rows, a.out);
  ordered_json meta;
  meta["checkpoint"] = a.model;
  meta["data"] = a.data;
  meta["split"] = a.split;
  meta["max_len"] = max_len;
  meta["config"] = m.config().to_json();
  write_meta(a.out, meta);
  out << ordered_json{{"translations", rows.size()}, {"out", a.out}}.dump(2) << '\n';
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string hyp, ref, labels;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto hyp = load_translations(a.hyp);
  const auto ref = load_translations(a.ref);
  std::map<std::pair<std::string, std::size_t>, const eval::DecodedSample*> by_id;
  for (const auto& h : hyp) {
    if (!by_id.emplace(std::pair(h.video_id, h.seg_idx), &h).second) {
      throw DataError("duplicate hypothesis for " + h.video_id + "/" + std::to_string(h.seg_idx));
    }
  }
  if (hyp.size() != ref.size()) {
    throw DataError(std::to_string(hyp.size()) + " hypotheses but " + std::to_string(ref.size()) + " references");
  }
  std::vector<eval::Tokens> cand, refs;
  data::Corpus covered;
  for (const auto& r : ref) {
    auto it = by_id.find({r.video_id, r.seg_idx});
    if (it == by_id.end()) throw DataError("no hypothesis for " + r.video_id + "/" + std::to_string(r.seg_idx));
    cand.push_back(it->second->tokens);
    refs.push_back(r.tokens);
  }
  ordered_json j;
  j["bleu"] = eval::bleu4(cand, refs).to_json();
  if (!a.labels.empty()) {
    std::map<std::pair<std::string, std::size_t>, bool> ids;
    for (const auto& r : ref) ids[{r.video_id, r.seg_idx}] = true;
    std::vector<data::DisambiguationLabel> labels;
    for (const auto& l : data::load_labels(a.labels)) {
      if (ids.count({l.video_id, l.seg_idx})) labels.push_back(l);
    }
    const auto d = eval::disambiguation_accuracy(hyp, labels);
    j["disambiguation"] = {{"correct", d.correct}, {"total", d.total}, {"accuracy", d.accuracy}};
  }
  out << j.dump(2) << '\n';
}

// ---- ablate ---------------------------------------------------------------

struct AblateArgs {
  std::string data, split = "test", out;
  std::vector<std::string> sweep;
  std::size_t seeds = 1;
  ConfigFlags flags;
};

void cmd_ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  const bool switches = a.flags.no_gr || a.flags.no_tvss || a.flags.no_both;
  if (switches && !a.sweep.empty()) throw ConfigError("--sweep cannot be combined with --no-gr/--no-tvss/--no-both");
  if (!switches && a.sweep.empty()) throw ConfigError("ablate needs --no-gr, --no-tvss, --no-both or --sweep");
  if (a.seeds < 1) throw ConfigError("--seeds must be at least 1");
  const auto base = resolve_config(a.flags, false);
  const auto ds = load_checked(a.data);
  std::vector<Setting> settings;
  if (switches) {
    settings = ablation_settings(base, a.flags.no_gr, a.flags.no_tvss, a.flags.no_both);
  } else {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> axes;
    for (const auto& s : a.sweep) axes.push_back(parse_sweep_axis(s));
    settings = sweep_settings(base, axes);
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < a.seeds; ++i) seeds.push_back(base.seed + i);
  err << "running " << settings.size() << " settings x " << seeds.size() << " seeds\n";
  const auto results = run_settings(ds, settings, seeds, a.split, thread_budget());
  std::ostringstream csv;
  write_results_csv(csv, results);
  if (a.out.empty()) {
    out << csv.str();
  } else {
    data::write_file_atomic(a.out, csv.str());
    ordered_json meta;
    meta["data"] = a.data;
    meta["split"] = a.split;
    meta["seeds"] = seeds;
    meta["config"] = base.to_json();
    write_meta(a.out, meta);
    out << csv.str();
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video-guided subtitle translation with global video context"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--seed", gen.cfg.seed, "Generator seed");
  g->add_option("--n-videos", gen.cfg.n_videos, "Number of videos");
  g->add_option("--segs-per-video", gen.cfg.segs_per_video, "Segments per video");
  g->add_option("--ambiguity-rate", gen.cfg.ambiguity_rate, "Fraction of ambiguous sentences");
  g->add_option("--regions", gen.cfg.regions, "Regions per segment");
  g->add_option("--feature-dim", gen.cfg.feature_dim, "Region feature dimension");
  g->add_option("--embedding-dim", gen.cfg.embedding_dim, "Subtitle embedding dimension");

  std::string validate_dir;
  auto* v = app.add_subcommand("validate", "Check a dataset directory");
  v->add_option("--data", validate_dir, "Dataset directory")->required();

  EmbedArgs embed;
  auto* e = app.add_subcommand("embed", "Write toy subtitle embeddings for a dataset");
  e->add_option("--data", embed.data, "Dataset directory")->required();
  e->add_option("--out", embed.out, "Output directory (default <data>/embeddings)");
  e->add_option("--dim", embed.dim, "Embedding dimension");
  e->add_option("--seed", embed.seed, "Hash seed");

  RetrieveArgs retrieve;
  auto* r = app.add_subcommand("retrieve", "Top-P retrieval for one segment");
  r->add_option("--data", retrieve.data, "Dataset directory")->required();
  r->add_option("--video", retrieve.video, "Video id")->required();
  r->add_option("--seg", retrieve.seg, "Query segment index")->required();
  add_config_flags(*r, retrieve.flags, false);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--out", train.out, "Checkpoint path")->required();
  t->add_option("--log", train.log, "Training log CSV");
  add_config_flags(*t, train.flags, true);

  TranslateArgs translate;
  auto* tr = app.add_subcommand("translate", "Greedy-decode a split");
  tr->add_option("--model", translate.model, "Checkpoint path")->required();
  tr->add_option("--data", translate.data, "Dataset directory")->required();
  tr->add_option("--split", translate.split, "train, valid or test");
  tr->add_option("--out", translate.out, "Output JSONL")->required();
  tr->add_option("--max-len", translate.max_len, "Maximum generated tokens");

  EvalArgs ev;
  auto* el = app.add_subcommand("eval", "BLEU and disambiguation accuracy");
  el->add_option("--hyp", ev.hyp, "Hypothesis JSONL")->required();
  el->add_option("--ref", ev.ref, "Reference JSONL")->required();
  el->add_option("--labels", ev.labels, "Disambiguation labels JSONL");

  AblateArgs ablate;
  auto* ab = app.add_subcommand("ablate", "Ablation or hyperparameter sweep");
  ab->add_option("--data", ablate.data, "Dataset directory")->required();
  ab->add_option("--split", ablate.split, "Evaluation split");
  ab->add_option("--out", ablate.out, "Results CSV");
  ab->add_option("--sweep", ablate.sweep, "Axis grid such as p=5,10,20 (repeatable)");
  ab->add_option("--seeds", ablate.seeds, "Number of consecutive seeds");
  add_config_flags(*ab, ablate.flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*g) cmd_gen(gen, out);
    else if (*v) cmd_validate(validate_dir, out);
    else if (*e) cmd_embed(embed, out);
    else if (*r) cmd_retrieve(retrieve, out);
    else if (*t) cmd_train(train, out, err);
    else if (*tr) cmd_translate(translate, out);
    else if (*el) cmd_eval(ev, out);
    else if (*ab) cmd_ablate(ablate, out, err);
    return 0;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return exit_code_for(ex);
  }
}

}  // namespace gvmt::cli
