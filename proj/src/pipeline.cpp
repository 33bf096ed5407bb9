#include "moralkb/pipeline.hpp"

#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"
#include "moralkb/knowledge.hpp"
#include "moralkb/linking.hpp"

namespace moralkb {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Link: return "link";
    case Stage::FetchKb: return "fetch-kb";
    case Stage::SelectFeatures: return "select-features";
    case Stage::Encode: return "encode";
    case Stage::Train: return "train";
    case Stage::Evaluate: return "evaluate";
    case Stage::Predict: return "predict";
    case Stage::Agreement: return "agreement";
    case Stage::Stats: return "stats";
  }
  return "?";
}

fs::path Artifacts::features(MoralClass c) const {
  return dir / "features" / (std::string(key_name(c)) + ".tsv");
}

fs::path Artifacts::model(MoralClass c) const {
  return dir / "models" / (std::string(key_name(c)) + ".model");
}

fs::path Artifacts::stamp(Stage s) const {
  return dir / ".stamps" / (std::string(stage_name(s)) + ".hash");
}

namespace {

Artifacts artifacts(const PipelineConfig& cfg) { return {cfg.paths.output_dir}; }

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw UsageError(std::string(what) + " is not configured");
  if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

std::string read_artifact(const fs::path& p, std::string_view producer) {
  if (!fs::is_regular_file(p))
    throw DataError(p.string() + " is missing; run '" + std::string(producer) + "' first");
  return read_file(p);
}

void emit_diagnostics(const StageOptions& opts, Stage s, const Diagnostics& diag) {
  if (!opts.log) return;
  for (const auto& m : diag.messages())
    *opts.log << stage_name(s) << ": warning: " << m << "\n";
  opts.log->flush();
}

// Fingerprint of a stage run: its settings and the bytes of its inputs.
std::string fingerprint(Stage s, const PipelineConfig& cfg, std::initializer_list<std::string_view> prefixes,
                        const std::vector<fs::path>& inputs) {
  std::string material = "stage " + std::string(stage_name(s)) + "\n";
  for (const auto& [k, v] : cfg.values()) {
    for (auto p : prefixes) {
      if (k.rfind(p, 0) == 0) {
        material += k + "=" + v + "\n";
        break;
      }
    }
  }
  for (const auto& in : inputs) {
    material += "input " + in.filename().string() + " " +
                (fs::is_regular_file(in) ? sha256_hex(read_file(in)) : std::string("-")) + "\n";
  }
  return sha256_hex(material);
}

bool up_to_date(const Artifacts& a, Stage s, const std::string& fp, const std::vector<fs::path>& outputs,
                const StageOptions& opts) {
  if (opts.force) return false;
  const auto stamp = a.stamp(s);
  if (!fs::is_regular_file(stamp)) return false;
  for (const auto& o : outputs) {
    if (!fs::exists(o)) return false;
  }
  return read_file(stamp) == fp + "\n";
}

void write_stamp(const Artifacts& a, Stage s, const std::string& fp) {
  write_file_atomic(a.stamp(s), fp + "\n");
}

StageResult skipped(Stage s) {
  return {std::string(stage_name(s)) + ": up to date (use --force to rerun)", true};
}

std::unique_ptr<Linker> make_linker(const PipelineConfig& cfg, const StageOptions& opts) {
  if (cfg.linker.mode == "fixture") return std::make_unique<FixtureLinker>(FixtureLinker::load(cfg.linker.fixtures));
  RemoteLinkerConfig rc;
  rc.endpoint = cfg.linker.endpoint;
  rc.api_key = cfg.linker.api_key;
  rc.cache_dir = cfg.linker.cache_dir;
  rc.retry.attempts = cfg.linker.retries;
  rc.max_concurrency = cfg.linker.max_concurrency;
  rc.offline = opts.offline;
  rc.refresh = opts.force;
  return std::make_unique<RemoteLinker>(rc);
}

std::unique_ptr<KnowledgeBase> make_kb(const PipelineConfig& cfg, const StageOptions& opts) {
  if (cfg.kb.mode == "snapshot")
    return std::make_unique<SnapshotKnowledgeBase>(SnapshotKnowledgeBase::load(cfg.kb.snapshot));
  RemoteKnowledgeBaseConfig rc;
  rc.endpoint = cfg.kb.endpoint;
  rc.retry.attempts = cfg.kb.retries;
  rc.max_concurrency = cfg.kb.max_concurrency;
  rc.offline = opts.offline;
  std::unique_ptr<KnowledgeBase> kb = std::make_unique<RemoteKnowledgeBase>(rc);
  if (!cfg.kb.cache_dir.empty())
    kb = std::make_unique<CachedKnowledgeBase>(std::move(kb), cfg.kb.cache_dir, opts.force);
  return kb;
}

Corpus load_stage_corpus(const Artifacts& a) {
  return parse_corpus(read_artifact(a.corpus(), "ingest"), "corpus", a.corpus().string());
}

std::map<std::string, std::vector<std::string>> load_stage_knowledge(const Artifacts& a) {
  return knowledge_tokens(parse_knowledge(read_artifact(a.knowledge(), "fetch-kb"), a.knowledge().string()));
}

std::map<std::string, LabelSet> gold_map(const Corpus& corpus) {
  std::map<std::string, LabelSet> out;
  for (const auto& t : corpus.tweets) {
    if (!t.gold) throw DataError("tweet " + t.tweet.id + " has no gold labels");
    out[t.tweet.id] = *t.gold;
  }
  return out;
}

bool has_both_classes(const Corpus& corpus, MoralClass c) {
  bool pos = false, neg = false;
  for (const auto& t : corpus.tweets) (t.gold && t.gold->get(c) ? pos : neg) = true;
  return pos && neg;
}

struct Encoded {
  std::vector<double> mfd;
  std::map<MoralClass, std::vector<double>> bk;
};

std::map<std::string, Encoded> parse_encoded(std::string_view text, std::string_view source) {
  std::map<std::string, Encoded> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    try {
      auto j = json::parse(line);
      Encoded e;
      e.mfd = j.at("mfd").get<std::vector<double>>();
      for (auto it = j.at("bk").begin(); it != j.at("bk").end(); ++it) {
        auto c = parse_class(it.key());
        if (!c) throw DataError("unknown class '" + it.key() + "'");
        e.bk[*c] = it.value().get<std::vector<double>>();
      }
      out[j.at("id").get<std::string>()] = std::move(e);
    } catch (const std::exception& e) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

FoundationFeatureSet load_features(const Artifacts& a, MoralClass c) {
  const auto p = a.features(c);
  return parse_feature_set(read_artifact(p, "select-features"), c, p.string());
}

}  // namespace

void validate_inputs(const PipelineConfig& cfg, Stage stage) {
  cfg.validate();
  auto check_if_set = [](const fs::path& p, std::string_view what) {
    if (!p.empty() && !fs::exists(p)) throw UsageError(std::string(what) + " not found: " + p.string());
  };
  check_if_set(cfg.paths.corpus, "paths.corpus");
  check_if_set(cfg.paths.embeddings, "paths.embeddings");
  check_if_set(cfg.paths.mfd, "paths.mfd");
  if (cfg.linker.mode == "fixture") check_if_set(cfg.linker.fixtures, "linker.fixtures");
  if (cfg.kb.mode == "snapshot") check_if_set(cfg.kb.snapshot, "kb.snapshot");

  const bool links = stage == Stage::Link || stage == Stage::Predict;
  const bool fetches = stage == Stage::FetchKb || stage == Stage::Predict;
  const bool embeds = stage == Stage::SelectFeatures || stage == Stage::Encode ||
                      stage == Stage::Train || stage == Stage::Evaluate || stage == Stage::Predict;
  if (stage == Stage::Ingest) require_file(cfg.paths.corpus, "paths.corpus");
  if (links) {
    if (cfg.linker.mode == "fixture") require_file(cfg.linker.fixtures, "linker.fixtures");
    else if (cfg.linker.endpoint.empty()) throw UsageError("linker.endpoint is not configured");
  }
  if (fetches) {
    if (cfg.kb.mode == "snapshot") require_file(cfg.kb.snapshot, "kb.snapshot");
    else if (cfg.kb.endpoint.empty()) throw UsageError("kb.endpoint is not configured");
  }
  if (embeds && stage != Stage::SelectFeatures) require_file(cfg.paths.embeddings, "paths.embeddings");
  if (stage == Stage::Encode || stage == Stage::Evaluate || stage == Stage::Predict) {
    bool needs_mfd = stage == Stage::Encode || stage == Stage::Predict;
    for (auto fs : cfg.eval.feature_sets) needs_mfd |= stage == Stage::Evaluate && flags_of(fs).mfd;
    if (needs_mfd) require_file(cfg.paths.mfd, "paths.mfd");
  }
}

StageResult run_ingest(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto a = artifacts(cfg);
  const auto fp = fingerprint(Stage::Ingest, cfg, {}, {cfg.paths.corpus});
  if (up_to_date(a, Stage::Ingest, fp, {a.corpus()}, opts)) return skipped(Stage::Ingest);

  Corpus corpus = with_majority_gold(load_corpus(cfg.paths.corpus));
  std::size_t gold = 0;
  for (const auto& t : corpus.tweets) gold += t.gold ? 1 : 0;
  write_file_atomic(a.corpus(), serialize_corpus(corpus));
  write_stamp(a, Stage::Ingest, fp);
  return {"ingest: " + std::to_string(corpus.tweets.size()) + " tweets, " + std::to_string(gold) +
              " with gold labels -> " + a.corpus().string(),
          false};
}

StageResult run_link(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto a = artifacts(cfg);
  std::vector<fs::path> inputs{a.corpus()};
  if (cfg.linker.mode == "fixture") inputs.push_back(cfg.linker.fixtures);
  const auto fp = fingerprint(Stage::Link, cfg, {"linker."}, inputs);
  if (up_to_date(a, Stage::Link, fp, {a.annotations()}, opts)) return skipped(Stage::Link);

  const Corpus corpus = load_stage_corpus(a);
  const auto linker = make_linker(cfg, opts);
  HeuristicPosTagger tagger;
  Diagnostics diag;
  const auto refined =
      refine(corpus, *linker, tagger, cfg.linker.filters, &diag, {cfg.linker.max_concurrency});
  emit_diagnostics(opts, Stage::Link, diag);
  std::size_t total = 0, propagated = 0;
  for (const auto& [id, anns] : refined) {
    total += anns.size();
    for (const auto& ann : anns) propagated += ann.propagated ? 1 : 0;
  }
  write_file_atomic(a.annotations(), serialize_annotations(refined));
  write_stamp(a, Stage::Link, fp);
  return {"link: " + std::to_string(total) + " annotations (" + std::to_string(propagated) +
              " propagated) over " + std::to_string(corpus.tweets.size()) + " tweets -> " +
              a.annotations().string(),
          false};
}

StageResult run_fetch_kb(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto a = artifacts(cfg);
  std::vector<fs::path> inputs{a.annotations()};
  if (cfg.kb.mode == "snapshot") inputs.push_back(cfg.kb.snapshot);
  const auto fp = fingerprint(Stage::FetchKb, cfg, {"kb."}, inputs);
  if (up_to_date(a, Stage::FetchKb, fp, {a.knowledge()}, opts)) return skipped(Stage::FetchKb);

  const auto refined =
      parse_annotations(read_artifact(a.annotations(), "link"), a.annotations().string());
  const auto kb = make_kb(cfg, opts);
  Diagnostics diag;
  const auto docs = enrich_corpus(refined, *kb, cfg.kb.properties, &diag, {cfg.kb.max_concurrency});
  emit_diagnostics(opts, Stage::FetchKb, diag);
  std::size_t n = 0;
  for (const auto& [id, d] : docs) n += d.size();
  write_file_atomic(a.knowledge(), serialize_knowledge(docs));
  write_stamp(a, Stage::FetchKb, fp);
  return {"fetch-kb: " + std::to_string(n) + " knowledge documents for " +
              std::to_string(docs.size()) + " tweets -> " + a.knowledge().string(),
          false};
}

StageResult run_select_features(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto a = artifacts(cfg);
  const auto fp = fingerprint(Stage::SelectFeatures, cfg, {"features.", "eval.targets"},
                              {a.corpus(), a.knowledge()});
  std::vector<fs::path> outputs;
  for (auto c : cfg.eval.targets) outputs.push_back(a.features(c));
  if (up_to_date(a, Stage::SelectFeatures, fp, outputs, opts)) return skipped(Stage::SelectFeatures);

  const Corpus corpus = load_stage_corpus(a);
  const auto knowledge = load_stage_knowledge(a);
  const auto gold = gold_map(corpus);
  std::map<std::string, std::vector<std::string>> docs;
  for (const auto& t : corpus.tweets) {
    auto it = knowledge.find(t.tweet.id);
    docs[t.tweet.id] = it == knowledge.end() ? std::vector<std::string>{} : it->second;
  }
  Diagnostics diag;
  std::size_t written = 0;
  for (auto c : cfg.eval.targets) {
    FoundationFeatureSet fs{c, {}};
    try {
      fs = select_features(docs, gold, c, cfg.cpmid);
    } catch (const DataError& e) {
      diag.add(std::string(display_name(c)) + ": " + e.what() + "; writing an empty feature set");
    }
    write_file_atomic(a.features(c), serialize_feature_set(fs));
    ++written;
  }
  emit_diagnostics(opts, Stage::SelectFeatures, diag);
  write_stamp(a, Stage::SelectFeatures, fp);
  return {"select-features: " + std::to_string(written) + " feature sets (k=" +
              std::to_string(cfg.cpmid.k) + ") -> " + (a.dir / "features").string(),
          false};
}

StageResult run_encode(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto a = artifacts(cfg);
  std::vector<fs::path> inputs{a.corpus(), a.knowledge(), cfg.paths.embeddings, cfg.paths.mfd};
  for (auto c : cfg.eval.targets) inputs.push_back(a.features(c));
  const auto fp = fingerprint(Stage::Encode, cfg, {"features.", "eval.targets"}, inputs);
  if (up_to_date(a, Stage::Encode, fp, {a.encoded()}, opts)) return skipped(Stage::Encode);

  const Corpus corpus = load_stage_corpus(a);
  const auto knowledge = load_stage_knowledge(a);
  const auto emb = load_embeddings(cfg.paths.embeddings);
  const auto mfd = load_mfd(cfg.paths.mfd);
  std::map<MoralClass, FoundationFeatureSet> features;
  for (auto c : cfg.eval.targets) features[c] = load_features(a, c);

  static const std::vector<std::string> kNone;
  std::string out;
  for (const auto& t : corpus.tweets) {
    auto it = knowledge.find(t.tweet.id);
    const auto& bk_tokens = it == knowledge.end() ? kNone : it->second;
    ordered_json j;
    j["id"] = t.tweet.id;
    j["mfd"] = mfd_vector(t.tweet.tokens, mfd);
    j["bk"] = ordered_json::object();
    for (const auto& [c, fs] : features)
      j["bk"][std::string(key_name(c))] = soft_encode(bk_tokens, fs, emb, cfg.soft);
    out += j.dump() + "\n";
  }
  write_file_atomic(a.encoded(), out);
  write_stamp(a, Stage::Encode, fp);
  return {"encode: " + std::to_string(corpus.tweets.size()) + " tweets x " +
              std::to_string(features.size()) + " classes -> " + a.encoded().string(),
          false};
}

StageResult run_train(const PipelineConfig& cfg, const StageOptions& opts) {
  if (cfg.classifier != ClassifierKind::Lstm)
    throw UsageError("the train stage writes LSTM models; set train.classifier = lstm");
  const auto a = artifacts(cfg);
  const auto fp = fingerprint(Stage::Train, cfg, {"train.", "eval.seed", "eval.targets"},
                              {a.corpus(), a.encoded(), cfg.paths.embeddings});
  std::vector<fs::path> outputs;
  for (auto c : cfg.eval.targets) outputs.push_back(a.model(c));
  if (up_to_date(a, Stage::Train, fp, outputs, opts)) return skipped(Stage::Train);

  const Corpus corpus = load_stage_corpus(a);
  const auto encoded = parse_encoded(read_artifact(a.encoded(), "encode"), a.encoded().string());
  const auto emb = load_embeddings(cfg.paths.embeddings);
  const FeatureFlags flags = flags_of(cfg.model_features);

  std::vector<std::shared_ptr<const Eigen::MatrixXd>> seqs;
  for (const auto& t : corpus.tweets) seqs.push_back(embed_sequence(t.tweet.tokens, emb));

  Diagnostics diag;
  std::size_t trained = 0;
  for (auto c : cfg.eval.targets) {
    if (!has_both_classes(corpus, c)) {
      diag.add(std::string(display_name(c)) + ": only one class in the corpus; no model written");
      continue;
    }
    std::vector<Example> rows;
    std::vector<bool> labels;
    for (std::size_t i = 0; i < corpus.tweets.size(); ++i) {
      const auto& t = corpus.tweets[i];
      auto it = encoded.find(t.tweet.id);
      if (it == encoded.end()) throw DataError("tweet " + t.tweet.id + " is missing from encoded.jsonl");
      Example ex;
      ex.sequence = seqs[i];
      if (flags.bk) {
        auto bk = it->second.bk.find(c);
        if (bk == it->second.bk.end())
          throw DataError("encoded.jsonl has no BK vector for " + std::string(display_name(c)));
        ex.bk = to_vector(bk->second.empty() ? std::vector<double>{0.0} : bk->second);
      }
      if (flags.mfd) ex.mfd = to_vector(it->second.mfd);
      ex.label = t.gold->get(c);
      labels.push_back(ex.label);
      rows.push_back(std::move(ex));
    }
    std::vector<Example> balanced;
    for (auto i : upsample_indices(labels, derive_seed(cfg.eval.seed, {index_of(c), 0x75})))
      balanced.push_back(rows[i]);
    TrainConfig tc = cfg.train;
    tc.flags = flags;
    tc.seed = derive_seed(cfg.eval.seed, {index_of(c)});
    const auto model = train(balanced, c, tc);
    write_file_atomic(a.model(c), serialize_model(model, tc));
    ++trained;
  }
  emit_diagnostics(opts, Stage::Train, diag);
  write_stamp(a, Stage::Train, fp);
  return {"train: " + std::to_string(trained) + " " + std::string(name_of(cfg.model_features)) +
              " models -> " + (a.dir / "models").string(),
          false};
}

StageResult run_evaluate(const PipelineConfig& cfg, const StageOptions& opts) {
  const auto a = artifacts(cfg);
  const auto fp = fingerprint(Stage::Evaluate, cfg, {"features.", "train.", "eval."},
                              {a.corpus(), a.knowledge(), cfg.paths.embeddings, cfg.paths.mfd});
  if (up_to_date(a, Stage::Evaluate, fp, {a.report_table(), a.report_kv()}, opts))
    return {read_file(a.report_table()), true};

  const Corpus corpus = load_stage_corpus(a);
  const auto knowledge = load_stage_knowledge(a);
  const auto emb = load_embeddings(cfg.paths.embeddings);
  std::optional<MFDictionary> mfd;
  if (!cfg.paths.mfd.empty()) mfd = load_mfd(cfg.paths.mfd);

  ExperimentConfig ec;
  ec.folds = cfg.eval.folds;
  ec.seed = cfg.eval.seed;
  ec.feature_sets = cfg.eval.feature_sets;
  ec.targets = cfg.eval.targets;
  ec.classifier = cfg.classifier;
  ec.cpmid = cfg.cpmid;
  ec.soft = cfg.soft;
  ec.train = cfg.train;
  ec.threads = cfg.eval.threads;
  ExperimentData data{&corpus, &emb, mfd ? &*mfd : nullptr, &knowledge};
  Diagnostics diag;
  const auto report = run_experiment(data, ec, &diag);
  emit_diagnostics(opts, Stage::Evaluate, diag);
  const auto table = report.table();
  write_file_atomic(a.report_table(), table);
  write_file_atomic(a.report_kv(), report.key_values());
  write_stamp(a, Stage::Evaluate, fp);
  return {table, false};
}

std::vector<Prediction> run_predict(const PipelineConfig& cfg, const StageOptions& opts,
                                    const std::vector<std::string>& texts) {
  const auto a = artifacts(cfg);
  std::map<MoralClass, ClassifierModel> models;
  for (auto c : kMoralClasses) {
    const auto p = a.model(c);
    if (!fs::is_regular_file(p)) {
      if (c == MoralClass::NonMoral) continue;
      throw DataError("missing model for " + std::string(display_name(c)) + " (" + p.string() +
                      "); run 'train' with all five foundations as targets");
    }
    models[c] = parse_model(read_file(p), p.string()).first;
  }
  std::map<MoralClass, FoundationFeatureSet> features;
  bool any_mfd = false;
  for (const auto& [c, m] : models) {
    if (m.flags.bk) features[c] = load_features(a, c);
    any_mfd |= m.flags.mfd;
  }
  const auto emb = load_embeddings(cfg.paths.embeddings);
  std::optional<MFDictionary> mfd;
  if (any_mfd) mfd = load_mfd(cfg.paths.mfd);

  Corpus batch;
  batch.topic = "predict";
  for (std::size_t i = 0; i < texts.size(); ++i) {
    AnnotatedTweet at;
    at.tweet = Tweet::from_raw("input" + std::to_string(i + 1), texts[i]);
    batch.tweets.push_back(std::move(at));
  }
  Diagnostics diag;
  std::map<std::string, std::vector<std::string>> knowledge;
  bool any_bk = false;
  for (const auto& [c, m] : models) any_bk |= m.flags.bk;
  if (any_bk && !batch.tweets.empty()) {
    const auto linker = make_linker(cfg, opts);
    HeuristicPosTagger tagger;
    const auto refined =
        refine(batch, *linker, tagger, cfg.linker.filters, &diag, {cfg.linker.max_concurrency});
    const auto kb = make_kb(cfg, opts);
    knowledge = knowledge_tokens(
        enrich_corpus(refined, *kb, cfg.kb.properties, &diag, {cfg.kb.max_concurrency}));
  }
  emit_diagnostics(opts, Stage::Predict, diag);

  static const std::vector<std::string> kNone;
  std::vector<Prediction> out;
  for (const auto& t : batch.tweets) {
    auto it = knowledge.find(t.tweet.id);
    const auto& bk_tokens = it == knowledge.end() ? kNone : it->second;
    const auto seq = embed_sequence(t.tweet.tokens, emb);
    std::map<MoralClass, Example> inputs;
    for (const auto& [c, m] : models) {
      Example ex;
      ex.sequence = seq;
      if (m.flags.bk) {
        auto v = soft_encode(bk_tokens, features.at(c), emb, cfg.soft);
        if (v.empty()) v.push_back(0.0);
        ex.bk = to_vector(v);
      }
      if (m.flags.mfd) ex.mfd = to_vector(mfd_vector(t.tweet.tokens, *mfd));
      inputs[c] = std::move(ex);
    }
    out.push_back(predict(models, inputs));
  }
  return out;
}

std::string format_prediction(const Prediction& p) {
  ordered_json j;
  j["labels"] = ordered_json::object();
  for (auto c : kMoralClasses) j["labels"][std::string(key_name(c))] = p.labels.get(c);
  j["flagged"] = ordered_json::array();
  for (auto c : kMoralClasses) {
    if (p.labels.get(c)) j["flagged"].push_back(std::string(display_name(c)));
  }
  if (p.trained_non_moral) j["trained_non_moral"] = *p.trained_non_moral;
  j["probabilities"] = ordered_json::object();
  for (const auto& [c, prob] : p.probabilities) j["probabilities"][std::string(key_name(c))] = prob;
  return j.dump();
}

namespace {

Corpus corpus_for_reports(const PipelineConfig& cfg) {
  const auto a = artifacts(cfg);
  if (fs::is_regular_file(a.corpus())) return load_stage_corpus(a);
  if (cfg.paths.corpus.empty()) throw UsageError("paths.corpus is not configured");
  return with_majority_gold(load_corpus(cfg.paths.corpus));
}

}  // namespace

std::string run_agreement(const PipelineConfig& cfg, std::size_t coder_a, std::size_t coder_b) {
  const Corpus corpus = corpus_for_reports(cfg);
  if (corpus.tweets.empty()) throw DataError("corpus is empty");
  std::ostringstream out;
  for (auto c : kMoralClasses) {
    std::vector<bool> a, b;
    for (const auto& t : corpus.tweets) {
      if (t.coder_labels.size() <= std::max(coder_a, coder_b))
        throw DataError("tweet " + t.tweet.id + " has " + std::to_string(t.coder_labels.size()) +
                        " coders; cannot compare columns " + std::to_string(coder_a) + " and " +
                        std::to_string(coder_b));
      a.push_back(t.coder_labels[coder_a].get(c));
      b.push_back(t.coder_labels[coder_b].get(c));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-22s PABAK %.3f", std::string(display_name(c)).c_str(), pabak(a, b));
    out << buf << "\n";
  }
  return out.str();
}

std::string run_stats(const PipelineConfig& cfg) {
  const Corpus corpus = corpus_for_reports(cfg);
  std::ostringstream out;
  std::size_t tokens = 0;
  for (const auto& t : corpus.tweets) tokens += t.tweet.tokens.size();
  out << "tweets: " << corpus.tweets.size() << "\n";
  if (!corpus.tweets.empty()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(tokens) / static_cast<double>(corpus.tweets.size()));
    out << "mean tokens per tweet: " << buf << "\n";
  }
  for (auto c : kMoralClasses) {
    const auto s = class_stats(corpus, c);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-22s pos %5zu  neg %5zu  pos/neg %.3f",
                  std::string(display_name(c)).c_str(), s.pos, s.neg, s.ratio);
    out << buf << "\n";
  }
  const auto a = artifacts(cfg);
  if (fs::is_regular_file(a.annotations())) {
    const auto anns = parse_annotations(read_file(a.annotations()), a.annotations().string());
    std::size_t n = 0;
    for (const auto& [id, v] : anns) n += v.size();
    out << "annotations: " << n << "\n";
  }
  if (fs::is_regular_file(a.knowledge())) {
    const auto docs = parse_knowledge(read_file(a.knowledge()), a.knowledge().string());
    std::size_t n = 0;
    for (const auto& [id, v] : docs) n += v.size();
    out << "knowledge documents: " << n << "\n";
  }
  return out.str();
}

}  // namespace moralkb
