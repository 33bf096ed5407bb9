// Acceptance gate: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "moralkb/corpus.hpp"
#include "moralkb/eval.hpp"
#include "moralkb/features.hpp"
#include "moralkb/io.hpp"
#include "moralkb/knowledge.hpp"
#include "moralkb/linking.hpp"
#include "moralkb/model.hpp"
#include "moralkb/synthetic.hpp"
#include "moralkb/text.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace moralkb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

Eigen::VectorXd random_vector(std::size_t n, Rng& rng, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

void criterion(int id, const std::string& name, double limit_seconds,
               const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > limit_seconds) {
    out.pass = false;
    out.detail += " [runtime " + std::to_string(secs) + " s exceeds " +
                  std::to_string(limit_seconds) + " s]";
  }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.2f s", secs);
  std::cout << (out.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << " (" << timing
            << "): " << out.detail << std::endl;
  if (!out.pass) ++failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome cpmid_oracle() {
  std::mt19937_64 gen(20240601);
  std::size_t checks = 0, limit_checks = 0, ranking_checks = 0;
  double worst = 0.0, worst_limit = 0.0;
  for (int corpus = 0; corpus < 200; ++corpus) {
    const std::size_t vocab = 1 + gen() % 16;
    const std::size_t ndocs = 1 + gen() % 32;
    std::vector<std::string> words;
    for (std::size_t w = 0; w < vocab; ++w) words.push_back("w" + std::to_string(w));
    std::vector<std::vector<std::string>> tokens(ndocs);
    for (auto& doc : tokens) {
      const std::size_t len = gen() % 9;
      for (std::size_t i = 0; i < len; ++i) {
        std::string t = words[gen() % vocab];
        if (gen() % 4 == 0) t[0] = 'W';  // matching is case-insensitive
        doc.push_back(t);
      }
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double delta = 0.05 + 0.94 * unit(gen);
    for (int f = 0; f < kNumFoundations; ++f) {
      const double rate = unit(gen);
      std::vector<LabelledDoc> docs;
      for (auto& t : tokens) docs.push_back({t, unit(gen) < rate});
      CpmidConfig cfg;
      cfg.delta = delta;
      for (const auto& w : words) {
        if (oracle::count_sets(w, docs).dw == 0) continue;
        const double expect = oracle::cpmid(w, docs, delta);
        const double got = cpmid(w, docs, cfg);
        ++checks;
        if (std::isinf(expect) || std::isinf(got)) {
          if (!(std::isinf(expect) && std::isinf(got) && expect < 0 && got < 0))
            return {false, "infinite mismatch for " + w};
        } else {
          worst = std::max(worst, std::abs(expect - got));
        }
        CpmidConfig plain = cfg;
        plain.delta = 1.0;
        const double pmi = oracle::plain_pmi(w, docs);
        const double lim = cpmid(w, docs, plain);
        ++limit_checks;
        if (std::isinf(pmi) != std::isinf(lim)) return {false, "delta=1 limit mismatch for " + w};
        if (!std::isinf(pmi)) worst_limit = std::max(worst_limit, std::abs(pmi - lim));
      }
      // Ranked output must carry oracle scores.
      bool any_positive = false;
      for (const auto& d : docs) any_positive |= d.positive;
      if (any_positive) {
        cfg.k = 5;
        const auto fs = select_features(docs, to_class(static_cast<Foundation>(f)), cfg);
        for (const auto& [w, s] : fs.features) {
          worst = std::max(worst, std::abs(oracle::cpmid(w, docs, delta) - s));
          ++ranking_checks;
        }
      }
    }
  }
  const bool ok = worst <= 1e-9 && worst_limit <= 1e-9;
  return {ok, std::to_string(checks) + " scores + " + std::to_string(ranking_checks) +
                  " ranked scores, max |diff| " + fmt(worst) + "; " + std::to_string(limit_checks) +
                  " delta=1 checks, max |diff| " + fmt(worst_limit)};
}

// ---------------------------------------------------------------------------

void randomize(ClassifierModel& m, Rng& rng, double scale) {
  for (auto& t : tensors(m))
    for (double& v : t.values()) v = rng.uniform(-scale, scale);
}

Outcome gradient_checks() {
  Rng rng(77);
  double worst_lstm = 0.0, worst_lr = 0.0;
  std::size_t params = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ModelDims d;
    d.input_dim = 1 + rng.below(5);
    d.hidden_dim = 1 + rng.below(4);
    d.head_dim = 1 + rng.below(3);
    d.bk_dim = 1 + rng.below(4);
    d.mfd_dim = 1 + rng.below(3);
    FeatureFlags flags{rng.below(2) == 1, rng.below(2) == 1};
    auto model = ClassifierModel::zeros(MoralClass::CareHarm, flags, d);
    randomize(model, rng, 0.6);
    TrainConfig cfg;
    cfg.flags = flags;
    cfg.l2_lambda = rng.uniform(0.0, 0.05);
    const double rate = trial % 2 == 0 ? 0.0 : 0.3;
    cfg.dropout_embed = cfg.dropout_lstm = cfg.dropout_fc = rate;

    std::vector<Example> batch;
    const std::size_t n = 1 + rng.below(3);
    for (std::size_t b = 0; b < n; ++b) {
      Example ex;
      Eigen::MatrixXd seq(d.input_dim, 1 + rng.below(4));
      for (Eigen::Index i = 0; i < seq.size(); ++i) seq.data()[i] = rng.uniform(-1.0, 1.0);
      ex.sequence = std::make_shared<const Eigen::MatrixXd>(seq);
      if (flags.bk) ex.bk = random_vector(d.bk_dim, rng, 0.0, 2.0);
      if (flags.mfd) ex.mfd = random_vector(d.mfd_dim, rng, 0.0, 1.0);
      ex.label = rng.below(2) == 1;
      batch.push_back(ex);
    }
    std::vector<DropoutMasks> masks;
    for (const auto& ex : batch) masks.push_back(sample_masks(model, ex, cfg, rng));

    auto g = gradients(model, batch, cfg, masks);
    auto analytic = tensors(g.gradient);
    for (const auto& t : analytic) params += t.values().size();
    worst_lstm = std::max(worst_lstm, oracle::worst_gradient_error(tensors(model), analytic, [&] {
                            return loss(model, batch, cfg, masks);
                          }));
  }
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t dim = 1 + rng.below(5), bk = 1 + rng.below(4), mfd = 1 + rng.below(3);
    LogRegModel m;
    m.flags = {rng.below(2) == 1, rng.below(2) == 1};
    std::vector<Example> batch;
    const std::size_t n = 1 + rng.below(4);
    for (std::size_t b = 0; b < n; ++b) {
      Example ex;
      Eigen::MatrixXd seq(dim, 1 + rng.below(4));
      for (Eigen::Index i = 0; i < seq.size(); ++i) seq.data()[i] = rng.uniform(-1.0, 1.0);
      ex.sequence = std::make_shared<const Eigen::MatrixXd>(seq);
      ex.bk = random_vector(bk, rng, 0.0, 2.0);
      ex.mfd = random_vector(mfd, rng, 0.0, 1.0);
      ex.label = rng.below(2) == 1;
      batch.push_back(ex);
    }
    const auto width = logreg_input(batch[0], m.flags).size();
    m.weights = random_vector(static_cast<std::size_t>(width), rng, -1.0, 1.0);
    m.bias = rng.uniform(-1.0, 1.0);
    const double lambda = rng.uniform(0.0, 0.05);
    auto g = logreg_gradients(m, batch, lambda);
    std::vector<TensorRef> p{{"weights", m.weights.size(), 1, m.weights.data()}, {"bias", 1, 1, &m.bias}};
    std::vector<TensorRef> a{{"weights", g.weights.size(), 1, g.weights.data()}, {"bias", 1, 1, &g.bias}};
    params += static_cast<std::size_t>(width) + 1;
    worst_lr = std::max(worst_lr, oracle::worst_gradient_error(p, a, [&] {
                          return logreg_loss(m, batch, lambda);
                        }));
  }
  return {worst_lstm <= 1e-4 && worst_lr <= 1e-4,
          "20 LSTM + 10 logistic configs, " + std::to_string(params) +
              " parameters; worst relative error LSTM " + fmt(worst_lstm) + ", logistic " +
              fmt(worst_lr)};
}

// ---------------------------------------------------------------------------

Outcome booker_refinement(const fs::path& data) {
  const auto corpus = load_corpus(data / "booker" / "corpus.jsonl");
  const auto linker = FixtureLinker::load(data / "booker" / "fixtures.jsonl");
  const auto kb = SnapshotKnowledgeBase::load(data / "booker" / "snapshot.jsonl");
  HeuristicPosTagger tagger;
  const auto refined = refine(corpus, linker, tagger, LinkerConfig{});

  auto describe = [&] {
    std::string s;
    for (const auto& [id, anns] : refined) {
      s += id + ":";
      for (const auto& a : anns) s += " " + a.mention.surface + "->" + a.entity_title;
      s += ";";
    }
    return s;
  };
  const bool shape = refined.size() == 2 && refined.at("tweet1").size() == 1 &&
                     refined.at("tweet2").size() == 1 &&
                     refined.at("tweet1")[0].mention.surface == "Booker" &&
                     refined.at("tweet1")[0].entity_title == "Cory Booker" &&
                     refined.at("tweet2")[0].mention.surface == "Cory Booker" &&
                     refined.at("tweet2")[0].entity_title == "Cory Booker";
  if (!shape) return {false, "refined output " + describe()};

  const auto doc = merge_document(*kb.fetch("Cory Booker"), PropertyWhitelist{});
  for (const char* phrase :
       {"American politician", "Mayor of Newark, New Jersey", "Democratic Party (United States)"}) {
    if (doc.text.find(phrase) == std::string::npos)
      return {false, std::string("merged document lacks '") + phrase + "'"};
  }
  return {true, describe() + " merged document has all three phrases"};
}

// ---------------------------------------------------------------------------

std::map<std::string, std::vector<std::string>> knowledge_for(const SyntheticDataset& ds) {
  FixtureLinker linker(ds.fixtures);
  HeuristicPosTagger tagger;
  const auto refined = refine(ds.corpus, linker, tagger, LinkerConfig{});
  SnapshotKnowledgeBase kb(ds.entities);
  return knowledge_tokens(enrich_corpus(refined, kb, PropertyWhitelist{}));
}

Outcome knowledge_benefit() {
  double gap_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticOptions opts;
    opts.tweets = 200;
    opts.seed = seed;
    opts.entities_per_foundation = 10;
    opts.foundations = {Foundation::FairnessCheating};
    const auto ds = make_synthetic(opts);
    const auto knowledge = knowledge_for(ds);
    ExperimentConfig cfg;
    cfg.folds = 5;
    cfg.seed = seed;
    cfg.feature_sets = {FeatureSet::E, FeatureSet::E_BK};
    cfg.targets = {MoralClass::FairnessCheating};
    const auto report = run_experiment({&ds.corpus, &ds.embeddings, &ds.mfd, &knowledge}, cfg);
    const double e = report.cell("fairness_cheating", FeatureSet::E).mean;
    const double ebk = report.cell("fairness_cheating", FeatureSet::E_BK).mean;
    gap_sum += ebk - e;
    per_seed += " seed" + std::to_string(seed) + " E=" + fmt(e) + " E+BK=" + fmt(ebk) + ";";
  }
  const double gap = gap_sum / 5.0;
  return {gap >= 0.15, "mean F1(E+BK) - F1(E) = " + fmt(gap) + " (need >= 0.15):" + per_seed};
}

// ---------------------------------------------------------------------------

Outcome upsampling() {
  std::vector<bool> labels(667, true);
  labels.resize(667 + 3524, false);
  const auto idx = upsample_indices(labels, 11);
  std::size_t pos = 0, neg = 0;
  std::vector<std::size_t> neg_seen(labels.size(), 0);
  for (auto i : idx) {
    if (labels[i]) ++pos;
    else ++neg, ++neg_seen[i];
  }
  bool negatives_once = true;
  for (std::size_t i = 667; i < labels.size(); ++i) negatives_once &= neg_seen[i] == 1;
  if (pos != 3524 || neg != 3524 || !negatives_once)
    return {false, "667/3524 gave " + std::to_string(pos) + "/" + std::to_string(neg)};

  std::mt19937 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = 1 + gen() % 50, n = 1 + gen() % 200;
    std::vector<bool> l(p, true);
    l.resize(p + n, false);
    std::shuffle(l.begin(), l.end(), gen);
    std::size_t cp = 0, cn = 0;
    for (auto i : upsample_indices(l, gen())) (l[i] ? cp : cn)++;
    if (cp != cn) return {false, "unbalanced output for " + std::to_string(p) + "/" + std::to_string(n)};
  }
  return {true, "667/3524 -> 3524/3524, negatives untouched; 200 random inputs balanced exactly"};
}

Outcome pabak_checks() {
  auto agree = [](std::size_t n, std::size_t same) {
    std::vector<bool> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = i % 3 == 0;
      b[i] = i < same ? a[i] : !a[i];
    }
    return pabak(a, b);
  };
  const double p09 = agree(10, 9), p10 = agree(10, 10), p05 = agree(10, 5);
  if (std::abs(p09 - 0.8) > 1e-12 || std::abs(p10 - 1.0) > 1e-12 || std::abs(p05) > 1e-12)
    return {false, "hand cases gave " + fmt(p09) + ", " + fmt(p10) + ", " + fmt(p05)};
  std::mt19937 gen(9);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + gen() % 40;
    std::vector<bool> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) a[k] = gen() & 1, b[k] = gen() & 1;
    if (pabak(a, b) != pabak(b, a) || pabak(a, a) != 1.0) return {false, "symmetry or self-agreement failed"};
  }
  return {true, "0.9 -> 0.8, 1.0 -> 1.0, 0.5 -> 0.0; symmetric and self = 1 on 100 random pairs"};
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& cli, const fs::path& conf, const std::string& stage,
            const std::string& env = "") {
  const std::string cmd = env + " \"" + cli + "\" --config \"" + conf.string() + "\" " + stage +
                          " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome determinism(const std::string& cli) {
  const fs::path dir = fs::temp_directory_path() / ("moralkb-accept-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  SyntheticOptions opts;
  opts.tweets = 120;
  opts.seed = 4;
  opts.foundations = {Foundation::FairnessCheating, Foundation::CareHarm};
  opts.entities_per_foundation = 4;
  auto ds = make_synthetic(opts);
  write_file_atomic(dir / "corpus.jsonl", serialize_corpus(ds.corpus));
  write_file_atomic(dir / "embeddings.txt", serialize_embeddings(ds.embeddings));
  write_file_atomic(dir / "mfd.tsv", serialize_mfd(ds.mfd));
  write_file_atomic(dir / "fixtures.jsonl", serialize_fixtures(ds.fixtures));
  write_file_atomic(dir / "snapshot.jsonl", serialize_snapshot(ds.entities));
  write_file_atomic(dir / "run.conf",
                    "paths.corpus = corpus.jsonl\npaths.embeddings = embeddings.txt\n"
                    "paths.mfd = mfd.tsv\npaths.output_dir = a\nlinker.fixtures = fixtures.jsonl\n"
                    "kb.snapshot = snapshot.jsonl\neval.folds = 5\n"
                    "eval.targets = care_harm, fairness_cheating\n"
                    "train.hidden_dim = 16\ntrain.head_dim = 8\ntrain.epochs = 8\n");
  const auto conf = dir / "run.conf";
  for (const char* out : {"a", "b"}) {
    const std::string env = std::string("MORALKB_PATHS_OUTPUT_DIR=\"") + (dir / out).string() + "\"";
    for (const char* stage : {"ingest", "link", "fetch-kb", "evaluate"}) {
      if (int rc = run_cli(cli, conf, stage, env); rc != 0)
        return {false, std::string("moralkb ") + stage + " exited with " + std::to_string(rc)};
    }
  }
  const auto a = read_file(dir / "a" / "report.kv");
  const auto b = read_file(dir / "b" / "report.kv");
  if (a != b) return {false, "report.kv differs between runs"};

  // Training with the same seed twice.
  std::vector<Example> rows;
  for (const auto& t : ds.corpus.tweets) {
    Example ex;
    ex.sequence = embed_sequence(t.tweet.tokens, ds.embeddings);
    ex.label = t.gold->get(MoralClass::CareHarm);
    rows.push_back(ex);
  }
  TrainConfig tc;
  tc.hidden_dim = 8;
  tc.head_dim = 4;
  tc.epochs = 3;
  tc.seed = 99;
  auto m1 = train(rows, MoralClass::CareHarm, tc);
  auto m2 = train(rows, MoralClass::CareHarm, tc);
  auto t1 = tensors(m1), t2 = tensors(m2);
  for (std::size_t i = 0; i < t1.size(); ++i) {
    if (std::memcmp(t1[i].data, t2[i].data, t1[i].values().size_bytes()) != 0)
      return {false, "tensor " + t1[i].name + " differs between identical training runs"};
  }
  fs::remove_all(dir);
  return {true, "two CLI evaluate runs gave byte-identical report.kv (" + std::to_string(a.size()) +
                    " bytes); repeated training bitwise identical"};
}

// ---------------------------------------------------------------------------

Outcome separable() {
  const auto ds = make_separable(40, 8, 3);
  std::vector<Example> rows;
  std::vector<bool> gold;
  for (const auto& t : ds.corpus.tweets) {
    Example ex;
    ex.sequence = embed_sequence(t.tweet.tokens, ds.embeddings);
    ex.label = t.gold->get(MoralClass::CareHarm);
    gold.push_back(ex.label);
    rows.push_back(ex);
  }
  TrainConfig cfg;  // defaults: 20 epochs, E only
  const auto lstm = train(rows, MoralClass::CareHarm, cfg);
  const auto lr = train_logreg_baseline(rows, MoralClass::CareHarm, cfg);
  std::vector<bool> p_lstm, p_lr;
  for (const auto& ex : rows) {
    p_lstm.push_back(predict_proba(lstm, ex) >= 0.5);
    p_lr.push_back(logreg_proba(lr, ex) >= 0.5);
  }
  const double f_lstm = oracle::f1(p_lstm, gold), f_lr = oracle::f1(p_lr, gold);
  return {f_lstm == 1.0 && f_lr == 1.0,
          "training F1 after 20 epochs: LSTM " + fmt(f_lstm) + ", logistic " + fmt(f_lr)};
}

// ---------------------------------------------------------------------------

std::string random_text(std::mt19937& gen) {
  static const std::vector<std::string> pieces = {
      "hello", "World", "@user", "@a_b", "http://t.co/x1", "https://ex.com/a?b=1", "www.site.org",
      "#Sandy", "God's", "don't", "!!!", "...", "  ", "\t", "\n", "café", "naïve", "日本",
      "😀", "—", "«quoted»", "e-mail", "x@y", "AT_USER", "12:30", "C++", "mailto:me", "ftp://f",
      "\xff\xfe", "a", "ß", "İ", "'", "\"", "(", ")", "%", "$5"};
  std::string s;
  const std::size_t n = gen() % 12;
  for (std::size_t i = 0; i < n; ++i) {
    s += pieces[gen() % pieces.size()];
    if (gen() % 2) s += ' ';
  }
  return s;
}

Outcome idempotence() {
  std::mt19937 gen(31337);
  std::size_t tested = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto raw = random_text(gen);
    const auto once = normalize_text(raw);
    if (normalize_text(once) != once) return {false, "normalize not idempotent on '" + raw + "'"};
    ++tested;
  }

  // Filters: random annotations over random tweets.
  const std::vector<std::string> types = {"Song", "Person", "Band", "Film", "Place", "Work"};
  HeuristicPosTagger tagger;
  LinkerConfig cfg;
  std::size_t filtered = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string text;
    const std::size_t len = 1 + gen() % 8;
    for (std::size_t k = 0; k < len; ++k) {
      static const std::vector<std::string> words = {"Booker", "him", "everything", "spoke",
                                                     "Newark", "the", "quickly", "storm", "red", "42"};
      text += words[gen() % words.size()] + " ";
    }
    const auto tweet = Tweet::from_raw("r" + std::to_string(i), text);
    const auto spans = tokenize_with_spans(tweet.clean_text);
    Annotations anns;
    for (const auto& s : spans) {
      if (gen() % 2) continue;
      EntityAnnotation a;
      a.mention = {s.text, s.start, s.end};
      a.entity_title = "E" + s.text;
      a.rho = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
      a.entity_types = {types[gen() % types.size()]};
      anns.push_back(a);
    }
    const auto tagged = tagger.tag(tweet.tokens);
    const auto c1 = filter_by_confidence(anns, cfg);
    const auto c2 = filter_by_confidence(c1.kept, cfg);
    if (c2.kept != c1.kept || !c2.rejected.empty()) return {false, "confidence filter not idempotent"};
    const auto t1 = filter_by_type(anns, cfg);
    if (filter_by_type(t1, cfg) != t1) return {false, "type filter not idempotent"};
    const auto p1 = filter_by_pos(anns, tweet, tagged, cfg);
    if (filter_by_pos(p1, tweet, tagged, cfg) != p1) return {false, "POS filter not idempotent"};
    ++filtered;
  }
  return {true, std::to_string(tested) + " normalization inputs and " + std::to_string(filtered) +
                    " annotation sets x 3 filters"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path data = argc > 1 ? fs::path(argv[1]) : fs::path(MORALKB_TEST_DATA_DIR);
  const std::string cli = argc > 2 ? argv[2] : MORALKB_CLI_PATH;

  criterion(1, "cPMId streaming vs brute-force oracle", 30, cpmid_oracle);
  criterion(2, "gradients vs central finite differences", 120, gradient_checks);
  criterion(3, "refinement worked example", 1, [&] { return booker_refinement(data); });
  criterion(4, "knowledge benefit on generated corpus", 300, knowledge_benefit);
  criterion(5, "up-sampling balance", 5, upsampling);
  criterion(6, "PABAK", 5, pabak_checks);
  criterion(7, "determinism of evaluate and train", 120, [&] { return determinism(cli); });
  criterion(8, "separable corpus sanity", 60, separable);
  criterion(9, "normalization and filter idempotence", 10, idempotence);

  std::cout << (9 - failures) << "/9 criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
