#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "moralkb/errors.hpp"
#include "moralkb/eval.hpp"
#include "moralkb/model.hpp"
#include "moralkb/synthetic.hpp"
#include "support/oracles.hpp"

using namespace moralkb;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

void randomize(ClassifierModel& m, Rng& rng, double scale = 0.5) {
  for (auto& t : tensors(m))
    for (double& v : t.values()) v = rng.uniform(-scale, scale);
}

Example example(const Eigen::MatrixXd& seq, bool label, Eigen::VectorXd bk = {}, Eigen::VectorXd mfd = {}) {
  Example ex;
  ex.sequence = std::make_shared<const Eigen::MatrixXd>(seq);
  ex.bk = std::move(bk);
  ex.mfd = std::move(mfd);
  ex.label = label;
  return ex;
}

const ModelDims kDims{4, 3, 2, 3, 2};

TrainConfig no_dropout(FeatureFlags flags = {}) {
  TrainConfig cfg;
  cfg.flags = flags;
  cfg.dropout_embed = cfg.dropout_lstm = cfg.dropout_fc = 0.0;
  return cfg;
}

std::vector<Example> separable_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
  const auto ds = make_separable(n, dim, seed);
  std::vector<Example> rows;
  for (const auto& t : ds.corpus.tweets)
    rows.push_back(example(*embed_sequence(t.tweet.tokens, ds.embeddings), t.gold->get(MoralClass::CareHarm)));
  return rows;
}

}  // namespace

TEST(Lstm, ZeroParametersGiveZeroState) {
  const auto m = ClassifierModel::zeros(MoralClass::CareHarm, {}, kDims);
  Rng rng(1);
  const auto h = lstm_forward(random_matrix(4, 5, rng), m.lstm);
  EXPECT_EQ(h, Eigen::VectorXd::Zero(3));
}

TEST(Lstm, StateCarriesHistory) {
  auto m = ClassifierModel::zeros(MoralClass::CareHarm, {}, kDims);
  Rng rng(2);
  randomize(m, rng);
  const auto seq2 = random_matrix(4, 2, rng);
  const Eigen::MatrixXd seq1 = seq2.rightCols(1);
  EXPECT_GT((lstm_forward(seq2, m.lstm) - lstm_forward(seq1, m.lstm)).norm(), 1e-6);
}

TEST(Lstm, MatchesScalarOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    ModelDims d{1 + rng.below(6), 1 + rng.below(5), 2, 0, 0};
    auto m = ClassifierModel::zeros(MoralClass::CareHarm, {}, d);
    randomize(m, rng, 1.0);
    const auto seq = random_matrix(static_cast<Eigen::Index>(d.input_dim), 1 + rng.below(6), rng);
    std::vector<std::vector<double>> cols;
    for (Eigen::Index c = 0; c < seq.cols(); ++c) cols.emplace_back(seq.col(c).data(), seq.col(c).data() + seq.rows());
    const auto expect = oracle::lstm_last_hidden(cols, m.lstm);
    const auto got = lstm_forward(seq, m.lstm);
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
  }
}

TEST(Lstm, EmptySequenceIsError) {
  const auto m = ClassifierModel::zeros(MoralClass::CareHarm, {}, kDims);
  EXPECT_THROW(lstm_forward(Eigen::MatrixXd(4, 0), m.lstm), DataError);
}

TEST(Forward, SoftmaxSumsToOneAndInferenceIsDeterministic) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = ClassifierModel::zeros(MoralClass::CareHarm, {true, true}, kDims);
    randomize(m, rng, 1.0);
    const auto ex = example(random_matrix(4, 3, rng), true, random_matrix(3, 1, rng), random_matrix(2, 1, rng));
    const auto p = class_probabilities(m, ex);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
    const double a = predict_proba(m, ex), b = predict_proba(m, ex);
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
}

TEST(Forward, DisabledAuxiliaryInputsMatchEOnlyModel) {
  Rng rng(5);
  auto full = ClassifierModel::zeros(MoralClass::CareHarm, {true, true}, kDims);
  randomize(full, rng);
  auto e_only = ClassifierModel::zeros(MoralClass::CareHarm, {}, kDims);
  e_only.lstm = full.lstm;
  e_only.tweet_head = full.tweet_head;
  e_only.softmax.weight = full.softmax.weight.leftCols(kDims.head_dim);
  e_only.softmax.bias = full.softmax.bias;

  // Same shared parameters with the auxiliary heads switched off.
  auto disabled = full;
  disabled.flags = {};
  disabled.bk_head.reset();
  disabled.mfd_head.reset();
  disabled.softmax.weight = e_only.softmax.weight;

  const auto ex = example(random_matrix(4, 3, rng), false);
  EXPECT_NEAR(predict_proba(disabled, ex), predict_proba(e_only, ex), 1e-12);
}

TEST(Forward, MissingFeatureVectorNamesFlag) {
  const auto m = ClassifierModel::zeros(MoralClass::CareHarm, {true, false}, kDims);
  Rng rng(6);
  try {
    predict_proba(m, example(random_matrix(4, 2, rng), true));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("BK"), std::string::npos);
  }
}

TEST(Loss, Cases) {
  auto m = ClassifierModel::zeros(MoralClass::CareHarm, {}, kDims);
  Rng rng(7);
  std::vector<Example> batch{example(random_matrix(4, 2, rng), true), example(random_matrix(4, 1, rng), false)};
  TrainConfig cfg = no_dropout();
  cfg.l2_lambda = 0.0;
  // All-zero parameters predict 0.5 for everything.
  EXPECT_NEAR(loss(m, batch, cfg), std::log(2.0), 1e-12);

  // Push the positive logit far up: perfect prediction for the positive item.
  m.softmax.bias << -30.0, 30.0;
  std::vector<Example> positives{batch[0]};
  EXPECT_LT(loss(m, positives, cfg), 1e-12);

  randomize(m, rng);
  const double base = loss(m, batch, cfg);
  cfg.l2_lambda = 0.01;
  EXPECT_GT(loss(m, batch, cfg), base);
  EXPECT_NEAR(loss(m, batch, cfg) - base, 0.01 * m.softmax.weight.squaredNorm(), 1e-12);
}

TEST(Gradients, MatchFiniteDifferencesOnTinyConfig) {
  Rng rng(8);
  for (FeatureFlags flags : {FeatureFlags{}, FeatureFlags{true, false}, FeatureFlags{true, true}}) {
    auto m = ClassifierModel::zeros(MoralClass::CareHarm, flags, kDims);
    randomize(m, rng);
    TrainConfig cfg = no_dropout(flags);
    cfg.l2_lambda = 0.01;
    std::vector<Example> batch{
        example(random_matrix(4, 3, rng), true, random_matrix(3, 1, rng), random_matrix(2, 1, rng)),
        example(random_matrix(4, 3, rng), false, random_matrix(3, 1, rng), random_matrix(2, 1, rng))};
    auto g = gradients(m, batch, cfg);
    EXPECT_NEAR(g.loss, loss(m, batch, cfg), 1e-12);
    const double worst = oracle::worst_gradient_error(tensors(m), tensors(g.gradient), [&] { return loss(m, batch, cfg); });
    EXPECT_LE(worst, 1e-4);
  }
}

TEST(Gradients, WithDropoutMasksHeldFixed) {
  Rng rng(9);
  auto m = ClassifierModel::zeros(MoralClass::CareHarm, {true, true}, kDims);
  randomize(m, rng);
  TrainConfig cfg;
  cfg.flags = {true, true};
  cfg.dropout_embed = cfg.dropout_lstm = cfg.dropout_fc = 0.4;
  std::vector<Example> batch{example(random_matrix(4, 3, rng), true, random_matrix(3, 1, rng), random_matrix(2, 1, rng))};
  std::vector<DropoutMasks> masks{sample_masks(m, batch[0], cfg, rng)};
  auto g = gradients(m, batch, cfg, masks);
  EXPECT_LE(oracle::worst_gradient_error(tensors(m), tensors(g.gradient), [&] { return loss(m, batch, cfg, masks); }), 1e-4);
}

TEST(Gradients, L2TermAddsTwoLambdaW) {
  Rng rng(10);
  auto m = ClassifierModel::zeros(MoralClass::CareHarm, {}, kDims);
  randomize(m, rng);
  std::vector<Example> batch{example(random_matrix(4, 2, rng), true)};
  TrainConfig cfg = no_dropout();
  cfg.l2_lambda = 0.0;
  const auto g0 = gradients(m, batch, cfg).gradient.softmax.weight;
  cfg.l2_lambda = 1e-2;
  const auto g1 = gradients(m, batch, cfg).gradient.softmax.weight;
  EXPECT_LE((g1 - g0 - 2e-2 * m.softmax.weight).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gradients, VanishAsPredictionsBecomeCertain) {
  Rng rng(11);
  auto m = ClassifierModel::zeros(MoralClass::CareHarm, {}, kDims);
  randomize(m, rng);
  std::vector<Example> batch{example(random_matrix(4, 2, rng), true)};
  TrainConfig cfg = no_dropout();
  cfg.l2_lambda = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (double b : {2.0, 6.0, 12.0, 20.0}) {
    m.softmax.bias << -b, b;
    auto g = gradients(m, batch, cfg);
    double norm = 0.0;
    for (auto& t : tensors(g.gradient))
      for (double v : t.values()) norm += v * v;
    EXPECT_LT(norm, previous);
    previous = norm;
  }
  EXPECT_LT(previous, 1e-12);
}

TEST(Train, DegenerateLabels) {
  Rng rng(12);
  std::vector<Example> rows{example(random_matrix(4, 2, rng), true), example(random_matrix(4, 2, rng), true)};
  try {
    train(rows, MoralClass::CareHarm, TrainConfig{});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate labels"), std::string::npos);
  }
  EXPECT_THROW(train_logreg_baseline(rows, MoralClass::CareHarm, TrainConfig{}), DataError);
}

TEST(Train, SeparableReachesPerfectTrainingF1) {
  const auto rows = separable_rows(40, 8, 1);
  const auto m = train(rows, MoralClass::CareHarm, TrainConfig{});
  std::vector<bool> pred, gold;
  for (const auto& ex : rows) {
    pred.push_back(predict_proba(m, ex) >= 0.5);
    gold.push_back(ex.label);
  }
  EXPECT_EQ(f_score(pred, gold), 1.0);
}

TEST(Train, SameSeedSameModelBitwise) {
  const auto rows = separable_rows(20, 6, 2);
  TrainConfig cfg;
  cfg.hidden_dim = 6;
  cfg.head_dim = 3;
  cfg.epochs = 3;
  const auto a = train(rows, MoralClass::CareHarm, cfg);
  const auto b = train(rows, MoralClass::CareHarm, cfg);
  const double la = loss(a, rows, cfg), lb = loss(b, rows, cfg);
  EXPECT_EQ(std::memcmp(&la, &lb, sizeof la), 0);
  EXPECT_EQ(serialize_model(a, cfg), serialize_model(b, cfg));
  cfg.seed = 2;
  EXPECT_NE(serialize_model(train(rows, MoralClass::CareHarm, cfg), cfg), serialize_model(a, cfg));
}

TEST(Train, OneEpochLowersLoss) {
  const auto rows = separable_rows(30, 6, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  Rng rng(cfg.seed);
  const auto init = init_model(MoralClass::CareHarm, {}, {6, cfg.hidden_dim, cfg.head_dim, 0, 0}, rng);
  const auto trained = train(rows, MoralClass::CareHarm, cfg);
  EXPECT_LT(loss(trained, rows, cfg), loss(init, rows, cfg));
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.dropout_fc = 1.0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.l2_lambda = -1;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.hidden_dim = 0;
  EXPECT_THROW(cfg.validate(), UsageError);
}

TEST(ModelFile, RoundTripAndShapeErrors) {
  Rng rng(13);
  auto m = ClassifierModel::zeros(MoralClass::PurityDegradation, {true, true}, kDims);
  randomize(m, rng);
  TrainConfig cfg;
  cfg.flags = {true, true};
  cfg.hidden_dim = kDims.hidden_dim;
  cfg.head_dim = kDims.head_dim;
  cfg.epochs = 7;
  const auto text = serialize_model(m, cfg);
  auto [back, back_cfg] = parse_model(text);
  EXPECT_EQ(back.target, MoralClass::PurityDegradation);
  EXPECT_EQ(back_cfg.epochs, 7u);
  EXPECT_EQ(serialize_model(back, back_cfg), text);
  auto b = tensors(back);
  auto a = tensors(m);
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(std::memcmp(a[i].data, b[i].data, a[i].values().size_bytes()), 0) << a[i].name;

  std::string broken = text;
  broken.replace(broken.find("tensor softmax.weight 2"), 23, "tensor softmax.weight 3");
  EXPECT_THROW(parse_model(broken), DataError);
  EXPECT_THROW(parse_model("something else\n"), DataError);
}

TEST(Merge, Rules) {
  std::map<MoralClass, double> p;
  for (auto f : kFoundations) p[to_class(f)] = 0.1;
  EXPECT_TRUE(merge_predictions(p).labels.non_moral);

  p[MoralClass::CareHarm] = 0.7;
  p[MoralClass::FairnessCheating] = 0.6;
  auto r = merge_predictions(p).labels;
  EXPECT_TRUE(r.get(MoralClass::CareHarm));
  EXPECT_TRUE(r.get(MoralClass::FairnessCheating));
  EXPECT_FALSE(r.get(MoralClass::LoyaltyBetrayal));
  EXPECT_FALSE(r.non_moral);

  p[MoralClass::CareHarm] = 0.1;
  p[MoralClass::FairnessCheating] = 0.5;
  EXPECT_TRUE(merge_predictions(p).labels.get(MoralClass::FairnessCheating));

  p.erase(MoralClass::LoyaltyBetrayal);
  try {
    merge_predictions(p);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("Loyalty"), std::string::npos) << e.what();
  }
}

TEST(Merge, TrainedNonMoralIsReportedSeparately) {
  std::map<MoralClass, double> p;
  for (auto f : kFoundations) p[to_class(f)] = 0.9;
  p[MoralClass::NonMoral] = 0.8;
  const auto r = merge_predictions(p);
  EXPECT_FALSE(r.labels.non_moral);
  ASSERT_TRUE(r.trained_non_moral.has_value());
  EXPECT_TRUE(*r.trained_non_moral);
}

TEST(LogReg, GradientMatchesFiniteDifferences) {
  Rng rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    LogRegModel m;
    m.flags = {true, true};
    std::vector<Example> batch;
    for (int i = 0; i < 3; ++i)
      batch.push_back(example(random_matrix(4, 2, rng), i % 2 == 0, random_matrix(3, 1, rng), random_matrix(2, 1, rng)));
    m.weights = random_matrix(9, 1, rng);
    m.bias = rng.uniform(-1, 1);
    auto g = logreg_gradients(m, batch, 0.01);
    std::vector<TensorRef> p{{"w", 9, 1, m.weights.data()}, {"b", 1, 1, &m.bias}};
    std::vector<TensorRef> a{{"w", 9, 1, g.weights.data()}, {"b", 1, 1, &g.bias}};
    EXPECT_LE(oracle::worst_gradient_error(p, a, [&] { return logreg_loss(m, batch, 0.01); }), 1e-6);
  }
}

TEST(LogReg, SeparableAndDeterministic) {
  const auto rows = separable_rows(40, 8, 4);
  TrainConfig cfg;
  const auto a = train_logreg_baseline(rows, MoralClass::CareHarm, cfg);
  const auto b = train_logreg_baseline(rows, MoralClass::CareHarm, cfg);
  EXPECT_EQ(std::memcmp(a.weights.data(), b.weights.data(), sizeof(double) * a.weights.size()), 0);
  std::vector<bool> pred, gold;
  for (const auto& ex : rows) {
    pred.push_back(logreg_proba(a, ex) >= 0.5);
    gold.push_back(ex.label);
  }
  EXPECT_EQ(f_score(pred, gold), 1.0);
}

TEST(LogReg, InputIsMeanEmbeddingThenAuxiliary) {
  Eigen::MatrixXd seq(2, 2);
  seq << 1, 3, 2, 4;
  Eigen::VectorXd bk(1), mfd(1);
  bk << 5;
  mfd << 6;
  const auto ex = example(seq, true, bk, mfd);
  Eigen::VectorXd expect(4);
  expect << 2, 3, 5, 6;
  EXPECT_EQ(logreg_input(ex, {true, true}), expect);
  EXPECT_EQ(logreg_input(ex, {}).size(), 2);
}
