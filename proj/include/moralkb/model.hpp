#pragma once

// Per-class binary classifiers.
//
// The main model runs an LSTM over the embedded tweet and keeps the last
// hidden state. That state and each optional auxiliary vector (background
// knowledge, MFD proportions) pass through their own tanh dense layer; the
// concatenated outputs feed a two-way softmax. Dropout applies to the
// embeddings, the LSTM output and every dense output; L2 applies to the
// softmax weights only.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moralkb/corpus.hpp"
#include "moralkb/rng.hpp"

namespace moralkb {

/// Which auxiliary inputs a model uses. Word embeddings are always on.
struct FeatureFlags {
  bool bk = false;
  bool mfd = false;

  friend bool operator==(const FeatureFlags&, const FeatureFlags&) = default;
};

/// The three evaluated input combinations.
enum class FeatureSet { E, E_BK, E_BK_MFD };

inline constexpr std::array<FeatureSet, 3> kFeatureSets = {FeatureSet::E, FeatureSet::E_BK,
                                                           FeatureSet::E_BK_MFD};

FeatureFlags flags_of(FeatureSet fs);
std::string_view name_of(FeatureSet fs);  // "E", "E+BK", "E+BK+MFD"
std::optional<FeatureSet> parse_feature_set_name(std::string_view s);

enum class ClassifierKind { Lstm, LogReg };

struct TrainConfig {
  std::size_t hidden_dim = 64;
  std::size_t head_dim = 32;
  double learning_rate = 0.05;
  std::size_t epochs = 20;
  double dropout_embed = 0.2;
  double dropout_lstm = 0.2;
  double dropout_fc = 0.2;
  double l2_lambda = 1e-4;
  std::uint64_t seed = 1;
  FeatureFlags flags;

  /// Throws UsageError on out-of-range values.
  void validate() const;
};

/// One training or scoring row. The sequence is input_dim x length and is
/// shared between copies made by up-sampling.
struct Example {
  std::shared_ptr<const Eigen::MatrixXd> sequence;
  Eigen::VectorXd bk;
  Eigen::VectorXd mfd;
  bool label = false;
};

struct DenseParams {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct LSTMParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  // Each gate maps [x_t; h_{t-1}] (input_dim + hidden_dim) to hidden_dim.
  DenseParams input_gate;
  DenseParams forget_gate;
  DenseParams output_gate;
  DenseParams candidate;
};

struct ModelDims {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t head_dim = 0;
  std::size_t bk_dim = 0;
  std::size_t mfd_dim = 0;
};

struct ClassifierModel {
  MoralClass target = MoralClass::CareHarm;
  FeatureFlags flags;
  LSTMParams lstm;
  DenseParams tweet_head;
  std::optional<DenseParams> bk_head;
  std::optional<DenseParams> mfd_head;
  DenseParams softmax;  // 2 x (sum of head outputs)

  /// All-zero parameters with the shapes implied by `dims` and `flags`.
  static ClassifierModel zeros(MoralClass target, FeatureFlags flags, const ModelDims& dims);

  ModelDims dims() const;
};

/// Mutable view of one parameter tensor, column-major.
struct TensorRef {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  double* data = nullptr;

  std::span<double> values() const { return {data, static_cast<std::size_t>(rows * cols)}; }
};

/// Every parameter tensor in a fixed order.
std::vector<TensorRef> tensors(ClassifierModel& model);

/// Per-call dropout masks with inverted scaling (kept units are scaled by
/// 1 / (1 - rate)). Empty vectors mean "no dropout here".
struct DropoutMasks {
  std::vector<Eigen::VectorXd> embed;  // one per time step
  Eigen::VectorXd lstm;
  Eigen::VectorXd tweet_fc;
  Eigen::VectorXd bk_fc;
  Eigen::VectorXd mfd_fc;
};

DropoutMasks sample_masks(const ClassifierModel& model, const Example& ex, const TrainConfig& cfg,
                          Rng& rng);

/// Last hidden state of the LSTM run from a zero state over the columns of
/// `seq`. Throws DataError on an empty sequence.
Eigen::VectorXd lstm_forward(const Eigen::MatrixXd& seq, const LSTMParams& p);

/// Two-way softmax output [p(negative), p(positive)]. With masks == nullptr
/// this is inference and touches no random state.
std::array<double, 2> class_probabilities(const ClassifierModel& model, const Example& ex,
                                          const DropoutMasks* masks = nullptr);

/// Positive-class probability clamped to [1e-12, 1 - 1e-12]. In train mode
/// dropout masks are drawn from `rng`.
double forward(const ClassifierModel& model, const Example& ex, bool train_mode, Rng& rng,
               const TrainConfig& cfg);
double predict_proba(const ClassifierModel& model, const Example& ex);

/// Mean negative log-likelihood of the labels plus l2_lambda * |W_softmax|^2.
/// `masks`, when given, holds one entry per example.
double loss(const ClassifierModel& model, std::span<const Example> batch, const TrainConfig& cfg,
            std::span<const DropoutMasks> masks = {});

struct LossAndGradient {
  double loss = 0.0;
  ClassifierModel gradient;  // same shapes as the model
};

/// Exact gradient of loss() with the given masks held fixed.
LossAndGradient gradients(const ClassifierModel& model, std::span<const Example> batch,
                          const TrainConfig& cfg, std::span<const DropoutMasks> masks = {});

/// Parameters uniform in (-0.08, 0.08) drawn from `rng`.
ClassifierModel init_model(MoralClass target, FeatureFlags flags, const ModelDims& dims, Rng& rng);

/// Size-1 SGD over shuffled epochs. Throws DataError when the labels are all
/// equal or an enabled feature vector is missing.
ClassifierModel train(std::span<const Example> dataset, MoralClass target, const TrainConfig& cfg);

/// Versioned text dump with shape headers and the training config.
std::string serialize_model(const ClassifierModel& model, const TrainConfig& cfg);
/// Throws DataError on a bad header or any shape mismatch.
std::pair<ClassifierModel, TrainConfig> parse_model(std::string_view text,
                                                    std::string_view source = "model");

// ---------------------------------------------------------------------------
// Merging per-class decisions

struct Prediction {
  LabelSet labels;  // foundation flags plus the derived Non-moral flag
  std::optional<bool> trained_non_moral;
  std::map<MoralClass, double> probabilities;
};

/// Flags are prob >= 0.5. Throws DataError naming a missing foundation.
Prediction merge_predictions(const std::map<MoralClass, double>& probabilities);

Prediction predict(const std::map<MoralClass, ClassifierModel>& models,
                   const std::map<MoralClass, Example>& features);

// ---------------------------------------------------------------------------
// Logistic-regression baseline over [mean embedding; bk; mfd].

struct LogRegModel {
  MoralClass target = MoralClass::CareHarm;
  FeatureFlags flags;
  Eigen::VectorXd weights;
  double bias = 0.0;
};

Eigen::VectorXd logreg_input(const Example& ex, FeatureFlags flags);
double logreg_proba(const LogRegModel& model, const Example& ex);
double logreg_loss(const LogRegModel& model, std::span<const Example> batch, double l2_lambda);

struct LogRegGradient {
  double loss = 0.0;
  Eigen::VectorXd weights;
  double bias = 0.0;
};

LogRegGradient logreg_gradients(const LogRegModel& model, std::span<const Example> batch,
                                double l2_lambda);

LogRegModel train_logreg_baseline(std::span<const Example> dataset, MoralClass target,
                                  const TrainConfig& cfg);

}  // namespace moralkb
