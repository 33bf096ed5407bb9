#include "moralkb/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"
#include "moralkb/parallel.hpp"

namespace moralkb {

std::shared_ptr<const Eigen::MatrixXd> embed_sequence(std::span<const std::string> tokens,
                                                      const EmbeddingTable& emb) {
  std::vector<std::span<const float>> found;
  for (const auto& t : tokens) {
    if (auto v = emb.lookup(t)) found.push_back(*v);
  }
  const auto dim = static_cast<Eigen::Index>(emb.dim());
  if (found.empty()) return std::make_shared<const Eigen::MatrixXd>(Eigen::MatrixXd::Zero(dim, 1));
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(found.size()));
  for (std::size_t c = 0; c < found.size(); ++c) {
    for (Eigen::Index r = 0; r < dim; ++r)
      m(r, static_cast<Eigen::Index>(c)) = static_cast<double>(found[c][static_cast<std::size_t>(r)]);
  }
  return std::make_shared<const Eigen::MatrixXd>(std::move(m));
}

Eigen::VectorXd to_vector(std::span<const double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

// ---------------------------------------------------------------------------

std::size_t FoldPlan::fold_of(const std::string& id) const {
  auto it = assignments.find(id);
  if (it == assignments.end()) throw DataError("tweet " + id + " is not in the fold plan");
  return it->second;
}

FoldPlan make_folds(const Corpus& corpus, MoralClass target, std::size_t k, std::uint64_t seed,
                    Diagnostics* diag) {
  if (k < 2) throw DataError("fold count must be at least 2");
  std::vector<std::string> pos, neg;
  for (const auto& t : corpus.tweets) {
    if (!t.gold) throw DataError("tweet " + t.tweet.id + " has no gold labels");
    (t.gold->get(target) ? pos : neg).push_back(t.tweet.id);
  }
  const std::string name(display_name(target));
  if (pos.empty() || neg.empty())
    throw DataError("cannot stratify " + name + ": only one class present");
  if (pos.size() < k)
    note(diag, name + ": " + std::to_string(pos.size()) + " positives for " + std::to_string(k) +
                   " folds; some folds have none");

  Rng rng(seed);
  rng.shuffle(std::span(pos));
  rng.shuffle(std::span(neg));
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < pos.size(); ++i) plan.assignments[pos[i]] = i % k;
  for (std::size_t j = 0; j < neg.size(); ++j) plan.assignments[neg[j]] = (pos.size() + j) % k;
  return plan;
}

std::vector<std::size_t> upsample_indices(const std::vector<bool>& positive, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < positive.size(); ++i) (positive[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw DataError("cannot up-sample single-class data");
  const bool pos_minor = pos.size() <= neg.size();
  auto& minor = pos_minor ? pos : neg;
  const auto& major = pos_minor ? neg : pos;

  Rng rng(seed);
  const std::size_t copies = major.size() / minor.size();
  const std::size_t extra = major.size() % minor.size();
  std::vector<std::size_t> out(major);
  out.reserve(2 * major.size());
  for (std::size_t c = 0; c < copies; ++c) out.insert(out.end(), minor.begin(), minor.end());
  std::vector<std::size_t> pool(minor);
  rng.shuffle(std::span(pool));
  out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(extra));
  rng.shuffle(std::span(out));
  return out;
}

double f_score(const std::vector<bool>& predictions, const std::vector<bool>& golds) {
  if (predictions.size() != golds.size())
    throw DataError("f_score: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(golds.size()) + " gold labels");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (predictions[i] && golds[i]) ++tp;
    else if (predictions[i]) ++fp;
    else if (golds[i]) ++fn;
  }
  if (tp + fp == 0 || tp + fn == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------

const ReportCell& ExperimentReport::cell(std::string_view row, FeatureSet fs) const {
  auto it = cells.find({std::string(row), fs});
  if (it == cells.end())
    throw DataError("report has no cell " + std::string(row) + "/" + std::string(name_of(fs)));
  return it->second;
}

namespace {

std::string row_label(const std::string& row) {
  if (row == kDerivedNonMoralRow) return "Non-moral (derived)";
  auto c = parse_class(row);
  if (!c) return row;
  if (*c == MoralClass::NonMoral) return "Non-moral (trained)";
  return std::string(display_name(*c));
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string ExperimentReport::table() const {
  std::size_t first = std::string_view("Foundation").size();
  for (const auto& r : rows) first = std::max(first, row_label(r).size());
  first += 2;
  std::ostringstream out;
  out << pad("Foundation", first);
  for (auto fs : feature_sets) out << pad(std::string(name_of(fs)), 10);
  out << "\n";
  for (const auto& r : rows) {
    out << pad(row_label(r), first);
    for (auto fs : feature_sets) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f", 100.0 * cell(r, fs).mean);
      out << pad(buf, 10);
    }
    out << "\n";
  }
  std::string s = out.str();
  // Drop the trailing padding on each line.
  std::string trimmed;
  std::istringstream lines(s);
  std::string line;
  while (std::getline(lines, line)) {
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line + "\n";
  }
  return trimmed;
}

std::string ExperimentReport::key_values() const {
  std::ostringstream out;
  for (const auto& r : rows) {
    for (auto fs : feature_sets) {
      const auto& c = cell(r, fs);
      const std::string prefix = "cell." + r + "." + std::string(name_of(fs));
      out << prefix << ".mean = " << format_double(c.mean) << "\n";
      for (std::size_t i = 0; i < c.folds.size(); ++i)
        out << prefix << ".fold." << i << " = " << format_double(c.folds[i]) << "\n";
    }
  }
  for (const auto& [k, v] : config) out << "config." << k << " = " << v << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<std::string, std::string>> config_snapshot(const ExperimentConfig& cfg) {
  auto join_sets = [&] {
    std::string s;
    for (auto fs : cfg.feature_sets) s += (s.empty() ? "" : ",") + std::string(name_of(fs));
    return s;
  };
  auto join_targets = [&] {
    std::string s;
    for (auto c : cfg.targets) s += (s.empty() ? "" : ",") + std::string(key_name(c));
    return s;
  };
  const auto& t = cfg.train;
  return {
      {"eval.folds", std::to_string(cfg.folds)},
      {"eval.seed", std::to_string(cfg.seed)},
      {"eval.feature_sets", join_sets()},
      {"eval.targets", join_targets()},
      {"features.delta", format_double(cfg.cpmid.delta)},
      {"features.k", std::to_string(cfg.cpmid.k)},
      {"features.min_df", std::to_string(cfg.cpmid.min_df)},
      {"features.theta", format_double(cfg.soft.theta)},
      {"train.classifier", cfg.classifier == ClassifierKind::Lstm ? "lstm" : "logreg"},
      {"train.hidden_dim", std::to_string(t.hidden_dim)},
      {"train.head_dim", std::to_string(t.head_dim)},
      {"train.learning_rate", format_double(t.learning_rate)},
      {"train.epochs", std::to_string(t.epochs)},
      {"train.dropout_embed", format_double(t.dropout_embed)},
      {"train.dropout_lstm", format_double(t.dropout_lstm)},
      {"train.dropout_fc", format_double(t.dropout_fc)},
      {"train.l2_lambda", format_double(t.l2_lambda)},
  };
}

struct Task {
  std::size_t target_pos;  // index into cfg.targets
  std::size_t fold;
};

}  // namespace

ExperimentReport run_experiment(const ExperimentData& data, const ExperimentConfig& cfg,
                                Diagnostics* diag) {
  if (!data.corpus || !data.embeddings) throw DataError("experiment needs a corpus and embeddings");
  if (cfg.feature_sets.empty() || cfg.targets.empty())
    throw UsageError("experiment needs at least one feature set and one target");
  cfg.train.validate();
  cfg.cpmid.validate();
  cfg.soft.validate();
  bool any_bk = false, any_mfd = false;
  for (auto fs : cfg.feature_sets) {
    any_bk |= flags_of(fs).bk;
    any_mfd |= flags_of(fs).mfd;
  }
  if (any_bk && !data.knowledge) throw DataError("BK feature sets need knowledge documents");
  if (any_mfd && !data.mfd) throw DataError("MFD feature sets need a dictionary");

  const auto& tweets = data.corpus->tweets;
  const std::size_t n = tweets.size();
  std::vector<LabelSet> gold(n);
  std::vector<std::shared_ptr<const Eigen::MatrixXd>> seqs(n);
  std::vector<Eigen::VectorXd> mfd(n);
  static const std::vector<std::string> kNoTokens;
  std::vector<const std::vector<std::string>*> bk_tokens(n, &kNoTokens);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = tweets[i];
    if (!t.gold) throw DataError("tweet " + t.tweet.id + " has no gold labels");
    gold[i] = *t.gold;
    seqs[i] = embed_sequence(t.tweet.tokens, *data.embeddings);
    if (any_mfd) mfd[i] = to_vector(mfd_vector(t.tweet.tokens, *data.mfd));
    if (data.knowledge) {
      if (auto it = data.knowledge->find(t.tweet.id); it != data.knowledge->end())
        bk_tokens[i] = &it->second;
    }
  }

  const std::size_t k = cfg.folds;
  std::vector<std::vector<std::size_t>> fold_of(cfg.targets.size(), std::vector<std::size_t>(n));
  for (std::size_t ti = 0; ti < cfg.targets.size(); ++ti) {
    const auto target = cfg.targets[ti];
    const auto plan = make_folds(*data.corpus, target, k,
                                 derive_seed(cfg.seed, {index_of(target)}), diag);
    for (std::size_t i = 0; i < n; ++i) fold_of[ti][i] = plan.fold_of(tweets[i].tweet.id);
  }

  // scores[target][fs][fold]; oof[target][fs][tweet] holds held-out predictions.
  const std::size_t nfs = cfg.feature_sets.size();
  std::vector<std::vector<std::vector<double>>> scores(
      cfg.targets.size(), std::vector<std::vector<double>>(nfs, std::vector<double>(k, 0.0)));
  std::vector<std::vector<std::vector<char>>> oof(
      cfg.targets.size(), std::vector<std::vector<char>>(nfs, std::vector<char>(n, 0)));

  std::vector<Task> tasks;
  for (std::size_t ti = 0; ti < cfg.targets.size(); ++ti)
    for (std::size_t f = 0; f < k; ++f) tasks.push_back({ti, f});

  parallel_for(tasks.size(), cfg.threads, [&](std::size_t task_index) {
    const auto [ti, fold] = tasks[task_index];
    const MoralClass target = cfg.targets[ti];
    const std::string context =
        std::string(display_name(target)) + ", fold " + std::to_string(fold) + ": ";
    try {
      std::vector<std::size_t> train_idx, test_idx;
      for (std::size_t i = 0; i < n; ++i) (fold_of[ti][i] == fold ? test_idx : train_idx).push_back(i);

      std::vector<Eigen::VectorXd> bk(n);
      if (any_bk) {
        std::vector<LabelledDoc> docs;
        docs.reserve(train_idx.size());
        for (std::size_t i : train_idx) docs.push_back({*bk_tokens[i], gold[i].get(target)});
        const auto features = select_features(docs, target, cfg.cpmid);
        if (features.features.empty())
          note(diag, context + "no background-knowledge feature passed selection");
        for (std::size_t i = 0; i < n; ++i) {
          auto v = soft_encode(*bk_tokens[i], features, *data.embeddings, cfg.soft);
          // A model needs a non-empty BK input even when nothing was selected.
          if (v.empty()) v.push_back(0.0);
          bk[i] = to_vector(v);
        }
      }

      std::vector<bool> train_labels;
      for (std::size_t i : train_idx) train_labels.push_back(gold[i].get(target));
      const auto order = upsample_indices(train_labels, derive_seed(cfg.seed, {index_of(target), fold, 0x75}));

      for (std::size_t si = 0; si < nfs; ++si) {
        const FeatureFlags flags = flags_of(cfg.feature_sets[si]);
        auto example = [&](std::size_t i) {
          Example ex;
          ex.sequence = seqs[i];
          if (flags.bk) ex.bk = bk[i];
          if (flags.mfd) ex.mfd = mfd[i];
          ex.label = gold[i].get(target);
          return ex;
        };
        std::vector<Example> train_set;
        train_set.reserve(order.size());
        for (std::size_t o : order) train_set.push_back(example(train_idx[o]));

        TrainConfig tc = cfg.train;
        tc.flags = flags;
        tc.seed = derive_seed(cfg.seed, {index_of(target), fold, 1});
        std::vector<bool> preds, golds;
        if (cfg.classifier == ClassifierKind::Lstm) {
          const auto model = train(train_set, target, tc);
          for (std::size_t i : test_idx) preds.push_back(predict_proba(model, example(i)) >= 0.5);
        } else {
          const auto model = train_logreg_baseline(train_set, target, tc);
          for (std::size_t i : test_idx) preds.push_back(logreg_proba(model, example(i)) >= 0.5);
        }
        for (std::size_t j = 0; j < test_idx.size(); ++j) {
          golds.push_back(gold[test_idx[j]].get(target));
          oof[ti][si][test_idx[j]] = preds[j] ? 1 : 0;
        }
        scores[ti][si][fold] = f_score(preds, golds);
      }
    } catch (const DataError& e) {
      throw DataError(context + e.what());
    } catch (const TransportError&) {
      throw;
    } catch (const Error& e) {
      throw Error(context + e.what());
    }
  });

  ExperimentReport report;
  report.feature_sets = cfg.feature_sets;
  report.config = config_snapshot(cfg);
  auto add_cell = [&](const std::string& row, FeatureSet fs, std::vector<double> folds) {
    ReportCell c;
    c.mean = std::accumulate(folds.begin(), folds.end(), 0.0) / static_cast<double>(folds.size());
    c.folds = std::move(folds);
    report.cells[{row, fs}] = std::move(c);
  };
  for (std::size_t ti = 0; ti < cfg.targets.size(); ++ti) {
    const std::string row(key_name(cfg.targets[ti]));
    report.rows.push_back(row);
    for (std::size_t si = 0; si < nfs; ++si) add_cell(row, cfg.feature_sets[si], scores[ti][si]);
  }

  // Derived Non-moral: a tweet is non-moral when every foundation classifier
  // rejected it in its held-out fold.
  std::vector<std::size_t> foundation_pos;
  for (auto f : kFoundations) {
    auto it = std::find(cfg.targets.begin(), cfg.targets.end(), to_class(f));
    if (it != cfg.targets.end()) foundation_pos.push_back(static_cast<std::size_t>(it - cfg.targets.begin()));
  }
  if (foundation_pos.size() == kFoundations.size()) {
    FoldPlan plan;
    try {
      plan = make_folds(*data.corpus, MoralClass::NonMoral, k,
                        derive_seed(cfg.seed, {index_of(MoralClass::NonMoral)}), nullptr);
    } catch (const DataError& e) {
      note(diag, std::string("derived Non-moral row skipped: ") + e.what());
      return report;
    }
    report.rows.emplace_back(kDerivedNonMoralRow);
    for (std::size_t si = 0; si < nfs; ++si) {
      std::vector<std::vector<bool>> preds(k), golds(k);
      for (std::size_t i = 0; i < n; ++i) {
        bool any = false;
        for (std::size_t ti : foundation_pos) any |= oof[ti][si][i] != 0;
        const std::size_t f = plan.fold_of(tweets[i].tweet.id);
        preds[f].push_back(!any);
        golds[f].push_back(gold[i].non_moral);
      }
      std::vector<double> folds(k);
      for (std::size_t f = 0; f < k; ++f) folds[f] = f_score(preds[f], golds[f]);
      add_cell(std::string(kDerivedNonMoralRow), cfg.feature_sets[si], std::move(folds));
    }
  } else {
    note(diag, "derived Non-moral row needs all five foundations as targets");
  }
  return report;
}

}  // namespace moralkb
