#include "moralkb/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"

namespace moralkb {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kProbFloor = 1e-12;
constexpr double kInitRange = 0.08;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

VectorXd sigmoid(const VectorXd& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

std::array<double, 2> softmax2(const VectorXd& logits) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

DenseParams dense_zeros(std::size_t out, std::size_t in) {
  return {MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
          VectorXd::Zero(static_cast<Eigen::Index>(out))};
}

VectorXd dropout_mask(Eigen::Index n, double rate, Rng& rng) {
  VectorXd m(n);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < n; ++i) m[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  return m;
}

void apply_mask(VectorXd& v, const VectorXd& mask) {
  if (mask.size() > 0) v.array() *= mask.array();
}

void check_example(const ClassifierModel& model, const Example& ex) {
  if (!ex.sequence || ex.sequence->cols() == 0) throw DataError("empty sequence");
  if (ex.sequence->rows() != static_cast<Eigen::Index>(model.lstm.input_dim))
    throw DataError("sequence has dimension " + std::to_string(ex.sequence->rows()) +
                    ", model expects " + std::to_string(model.lstm.input_dim));
  if (model.flags.bk) {
    if (ex.bk.size() == 0) throw DataError("missing BK feature vector");
    if (ex.bk.size() != model.bk_head->weight.cols())
      throw DataError("BK vector has length " + std::to_string(ex.bk.size()) +
                      ", model expects " + std::to_string(model.bk_head->weight.cols()));
  }
  if (model.flags.mfd) {
    if (ex.mfd.size() == 0) throw DataError("missing MFD feature vector");
    if (ex.mfd.size() != model.mfd_head->weight.cols())
      throw DataError("MFD vector has length " + std::to_string(ex.mfd.size()) +
                      ", model expects " + std::to_string(model.mfd_head->weight.cols()));
  }
}

// Intermediate values kept for backpropagation.
struct Trace {
  std::vector<VectorXd> z, in, fg, out, cand, cell, tanh_cell;
  VectorXd h_drop;
  VectorXd tweet_act, bk_act, mfd_act;
  VectorXd concat;
  std::array<double, 2> probs{};
};

std::array<double, 2> run(const ClassifierModel& m, const Example& ex, const DropoutMasks* masks,
                          Trace* trace) {
  check_example(m, ex);
  const auto& seq = *ex.sequence;
  const Eigen::Index in_dim = static_cast<Eigen::Index>(m.lstm.input_dim);
  const Eigen::Index hid = static_cast<Eigen::Index>(m.lstm.hidden_dim);
  const Eigen::Index steps = seq.cols();

  VectorXd h = VectorXd::Zero(hid);
  VectorXd c = VectorXd::Zero(hid);
  VectorXd z(in_dim + hid);
  for (Eigen::Index t = 0; t < steps; ++t) {
    z.head(in_dim) = seq.col(t);
    if (masks && !masks->embed.empty()) z.head(in_dim).array() *= masks->embed[t].array();
    z.tail(hid) = h;
    VectorXd i = sigmoid(m.lstm.input_gate.weight * z + m.lstm.input_gate.bias);
    VectorXd f = sigmoid(m.lstm.forget_gate.weight * z + m.lstm.forget_gate.bias);
    VectorXd o = sigmoid(m.lstm.output_gate.weight * z + m.lstm.output_gate.bias);
    VectorXd g = (m.lstm.candidate.weight * z + m.lstm.candidate.bias).array().tanh();
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    VectorXd tc = c.array().tanh();
    h = o.cwiseProduct(tc);
    if (trace) {
      trace->z.push_back(z);
      trace->in.push_back(std::move(i));
      trace->fg.push_back(std::move(f));
      trace->out.push_back(std::move(o));
      trace->cand.push_back(std::move(g));
      trace->cell.push_back(c);
      trace->tanh_cell.push_back(std::move(tc));
    }
  }

  VectorXd h_drop = h;
  if (masks) apply_mask(h_drop, masks->lstm);

  auto head = [&](const DenseParams& p, const VectorXd& x, const VectorXd* mask, VectorXd* act) {
    VectorXd a = (p.weight * x + p.bias).array().tanh();
    if (act) *act = a;
    if (mask) apply_mask(a, *mask);
    return a;
  };

  const Eigen::Index width = m.softmax.weight.cols();
  VectorXd concat(width);
  Eigen::Index off = 0;
  {
    VectorXd a = head(m.tweet_head, h_drop, masks ? &masks->tweet_fc : nullptr,
                      trace ? &trace->tweet_act : nullptr);
    concat.segment(off, a.size()) = a;
    off += a.size();
  }
  if (m.flags.bk) {
    VectorXd a = head(*m.bk_head, ex.bk, masks ? &masks->bk_fc : nullptr,
                      trace ? &trace->bk_act : nullptr);
    concat.segment(off, a.size()) = a;
    off += a.size();
  }
  if (m.flags.mfd) {
    VectorXd a = head(*m.mfd_head, ex.mfd, masks ? &masks->mfd_fc : nullptr,
                      trace ? &trace->mfd_act : nullptr);
    concat.segment(off, a.size()) = a;
    off += a.size();
  }
  const auto probs = softmax2(m.softmax.weight * concat + m.softmax.bias);
  if (trace) {
    trace->h_drop = std::move(h_drop);
    trace->concat = std::move(concat);
    trace->probs = probs;
  }
  return probs;
}

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

const DropoutMasks* mask_at(std::span<const DropoutMasks> masks, std::size_t i) {
  if (masks.empty()) return nullptr;
  return &masks[i];
}

void check_masks(std::span<const Example> batch, std::span<const DropoutMasks> masks) {
  if (!masks.empty() && masks.size() != batch.size())
    throw DataError("dropout masks do not match the batch size");
}

// Accumulates d(loss)/d(params) for one example into `grad`, with the data
// term scaled by `scale`.
void backprop(const ClassifierModel& m, const Example& ex, const DropoutMasks* masks, double scale,
              ClassifierModel& grad, double& nll) {
  Trace tr;
  run(m, ex, masks, &tr);
  const int y = ex.label ? 1 : 0;
  const double p_y = tr.probs[y];
  const double clamped = clamp_prob(p_y);
  nll += -std::log(clamped);
  if (clamped != p_y) return;  // gradient of a clamped loss is zero

  VectorXd dlogits(2);
  dlogits[0] = scale * (tr.probs[0] - (y == 0 ? 1.0 : 0.0));
  dlogits[1] = scale * (tr.probs[1] - (y == 1 ? 1.0 : 0.0));
  grad.softmax.weight.noalias() += dlogits * tr.concat.transpose();
  grad.softmax.bias += dlogits;
  const VectorXd dconcat = m.softmax.weight.transpose() * dlogits;

  Eigen::Index off = 0;
  auto head_back = [&](const DenseParams& p, DenseParams& g, const VectorXd& x,
                       const VectorXd& act, const VectorXd* mask) -> VectorXd {
    VectorXd d = dconcat.segment(off, act.size());
    off += act.size();
    if (mask && mask->size() > 0) d.array() *= mask->array();
    VectorXd dpre = d.array() * (1.0 - act.array().square());
    g.weight.noalias() += dpre * x.transpose();
    g.bias += dpre;
    return p.weight.transpose() * dpre;
  };

  VectorXd dh = head_back(m.tweet_head, grad.tweet_head, tr.h_drop, tr.tweet_act,
                          masks ? &masks->tweet_fc : nullptr);
  if (masks && masks->lstm.size() > 0) dh.array() *= masks->lstm.array();
  if (m.flags.bk)
    head_back(*m.bk_head, *grad.bk_head, ex.bk, tr.bk_act, masks ? &masks->bk_fc : nullptr);
  if (m.flags.mfd)
    head_back(*m.mfd_head, *grad.mfd_head, ex.mfd, tr.mfd_act, masks ? &masks->mfd_fc : nullptr);

  const Eigen::Index hid = static_cast<Eigen::Index>(m.lstm.hidden_dim);
  const Eigen::Index in_dim = static_cast<Eigen::Index>(m.lstm.input_dim);
  VectorXd dc = VectorXd::Zero(hid);
  for (std::size_t t = tr.z.size(); t-- > 0;) {
    const VectorXd& i = tr.in[t];
    const VectorXd& f = tr.fg[t];
    const VectorXd& o = tr.out[t];
    const VectorXd& g = tr.cand[t];
    const VectorXd& tc = tr.tanh_cell[t];
    const VectorXd c_prev = t > 0 ? tr.cell[t - 1] : VectorXd::Zero(hid);

    VectorXd d_out = dh.cwiseProduct(tc);
    dc += dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
    VectorXd da_i = dc.cwiseProduct(g).array() * i.array() * (1.0 - i.array());
    VectorXd da_f = dc.cwiseProduct(c_prev).array() * f.array() * (1.0 - f.array());
    VectorXd da_o = d_out.array() * o.array() * (1.0 - o.array());
    VectorXd da_g = dc.cwiseProduct(i).array() * (1.0 - g.array().square());
    dc = dc.cwiseProduct(f);

    const VectorXd& z = tr.z[t];
    grad.lstm.input_gate.weight.noalias() += da_i * z.transpose();
    grad.lstm.forget_gate.weight.noalias() += da_f * z.transpose();
    grad.lstm.output_gate.weight.noalias() += da_o * z.transpose();
    grad.lstm.candidate.weight.noalias() += da_g * z.transpose();
    grad.lstm.input_gate.bias += da_i;
    grad.lstm.forget_gate.bias += da_f;
    grad.lstm.output_gate.bias += da_o;
    grad.lstm.candidate.bias += da_g;

    if (t > 0) {
      // Only the recurrent half of dz matters: embeddings are frozen.
      dh = m.lstm.input_gate.weight.rightCols(hid).transpose() * da_i +
           m.lstm.forget_gate.weight.rightCols(hid).transpose() * da_f +
           m.lstm.output_gate.weight.rightCols(hid).transpose() * da_o +
           m.lstm.candidate.weight.rightCols(hid).transpose() * da_g;
    }
  }
  (void)in_dim;
}

void check_labels(std::span<const Example> dataset) {
  if (dataset.empty()) throw DataError("empty training set");
  bool any_pos = false, any_neg = false;
  for (const auto& ex : dataset) (ex.label ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) throw DataError("degenerate labels");
}

ModelDims dims_from(const Example& ex, const TrainConfig& cfg) {
  if (!ex.sequence) throw DataError("empty sequence");
  ModelDims d;
  d.input_dim = static_cast<std::size_t>(ex.sequence->rows());
  d.hidden_dim = cfg.hidden_dim;
  d.head_dim = cfg.head_dim;
  d.bk_dim = static_cast<std::size_t>(ex.bk.size());
  d.mfd_dim = static_cast<std::size_t>(ex.mfd.size());
  if (cfg.flags.bk && d.bk_dim == 0) throw DataError("missing BK feature vector");
  if (cfg.flags.mfd && d.mfd_dim == 0) throw DataError("missing MFD feature vector");
  return d;
}

std::string flags_name(FeatureFlags f) {
  std::string s = "E";
  if (f.bk) s += "+BK";
  if (f.mfd) s += "+MFD";
  return s;
}

std::optional<FeatureFlags> parse_flags(std::string_view s) {
  if (s == "E") return FeatureFlags{};
  if (s == "E+BK") return FeatureFlags{true, false};
  if (s == "E+MFD") return FeatureFlags{false, true};
  if (s == "E+BK+MFD") return FeatureFlags{true, true};
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------

FeatureFlags flags_of(FeatureSet fs) {
  switch (fs) {
    case FeatureSet::E: return {};
    case FeatureSet::E_BK: return {true, false};
    case FeatureSet::E_BK_MFD: return {true, true};
  }
  return {};
}

std::string_view name_of(FeatureSet fs) {
  switch (fs) {
    case FeatureSet::E: return "E";
    case FeatureSet::E_BK: return "E+BK";
    case FeatureSet::E_BK_MFD: return "E+BK+MFD";
  }
  return "E";
}

std::optional<FeatureSet> parse_feature_set_name(std::string_view s) {
  for (auto fs : kFeatureSets) {
    if (name_of(fs) == s) return fs;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (hidden_dim == 0 || head_dim == 0) throw UsageError("hidden_dim and head_dim must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  for (double r : {dropout_embed, dropout_lstm, dropout_fc}) {
    if (!(r >= 0.0 && r < 1.0)) throw UsageError("dropout rates must lie in [0, 1)");
  }
  if (!(l2_lambda >= 0.0)) throw UsageError("l2_lambda must be non-negative");
}

ClassifierModel ClassifierModel::zeros(MoralClass target, FeatureFlags flags, const ModelDims& d) {
  if (d.input_dim == 0 || d.hidden_dim == 0 || d.head_dim == 0)
    throw DataError("model dimensions must be positive");
  ClassifierModel m;
  m.target = target;
  m.flags = flags;
  m.lstm.input_dim = d.input_dim;
  m.lstm.hidden_dim = d.hidden_dim;
  const std::size_t z = d.input_dim + d.hidden_dim;
  m.lstm.input_gate = dense_zeros(d.hidden_dim, z);
  m.lstm.forget_gate = dense_zeros(d.hidden_dim, z);
  m.lstm.output_gate = dense_zeros(d.hidden_dim, z);
  m.lstm.candidate = dense_zeros(d.hidden_dim, z);
  m.tweet_head = dense_zeros(d.head_dim, d.hidden_dim);
  std::size_t width = d.head_dim;
  if (flags.bk) {
    if (d.bk_dim == 0) throw DataError("BK head needs a positive input dimension");
    m.bk_head = dense_zeros(d.head_dim, d.bk_dim);
    width += d.head_dim;
  }
  if (flags.mfd) {
    if (d.mfd_dim == 0) throw DataError("MFD head needs a positive input dimension");
    m.mfd_head = dense_zeros(d.head_dim, d.mfd_dim);
    width += d.head_dim;
  }
  m.softmax = dense_zeros(2, width);
  return m;
}

ModelDims ClassifierModel::dims() const {
  ModelDims d;
  d.input_dim = lstm.input_dim;
  d.hidden_dim = lstm.hidden_dim;
  d.head_dim = static_cast<std::size_t>(tweet_head.weight.rows());
  d.bk_dim = bk_head ? static_cast<std::size_t>(bk_head->weight.cols()) : 0;
  d.mfd_dim = mfd_head ? static_cast<std::size_t>(mfd_head->weight.cols()) : 0;
  return d;
}

std::vector<TensorRef> tensors(ClassifierModel& m) {
  std::vector<TensorRef> out;
  auto add_dense = [&](const std::string& name, DenseParams& p) {
    out.push_back({name + ".weight", p.weight.rows(), p.weight.cols(), p.weight.data()});
    out.push_back({name + ".bias", p.bias.size(), 1, p.bias.data()});
  };
  add_dense("lstm.input_gate", m.lstm.input_gate);
  add_dense("lstm.forget_gate", m.lstm.forget_gate);
  add_dense("lstm.output_gate", m.lstm.output_gate);
  add_dense("lstm.candidate", m.lstm.candidate);
  add_dense("tweet_head", m.tweet_head);
  if (m.bk_head) add_dense("bk_head", *m.bk_head);
  if (m.mfd_head) add_dense("mfd_head", *m.mfd_head);
  add_dense("softmax", m.softmax);
  return out;
}

DropoutMasks sample_masks(const ClassifierModel& model, const Example& ex, const TrainConfig& cfg,
                          Rng& rng) {
  check_example(model, ex);
  DropoutMasks masks;
  const auto in_dim = static_cast<Eigen::Index>(model.lstm.input_dim);
  const auto head = model.tweet_head.weight.rows();
  if (cfg.dropout_embed > 0.0) {
    for (Eigen::Index t = 0; t < ex.sequence->cols(); ++t)
      masks.embed.push_back(dropout_mask(in_dim, cfg.dropout_embed, rng));
  }
  if (cfg.dropout_lstm > 0.0)
    masks.lstm = dropout_mask(static_cast<Eigen::Index>(model.lstm.hidden_dim), cfg.dropout_lstm, rng);
  if (cfg.dropout_fc > 0.0) {
    masks.tweet_fc = dropout_mask(head, cfg.dropout_fc, rng);
    if (model.flags.bk) masks.bk_fc = dropout_mask(head, cfg.dropout_fc, rng);
    if (model.flags.mfd) masks.mfd_fc = dropout_mask(head, cfg.dropout_fc, rng);
  }
  return masks;
}

Eigen::VectorXd lstm_forward(const Eigen::MatrixXd& seq, const LSTMParams& p) {
  if (seq.cols() == 0) throw DataError("empty sequence");
  if (seq.rows() != static_cast<Eigen::Index>(p.input_dim))
    throw DataError("sequence dimension does not match the LSTM input");
  ClassifierModel m;
  m.lstm = p;
  const auto hid = static_cast<Eigen::Index>(p.hidden_dim);
  const auto in_dim = static_cast<Eigen::Index>(p.input_dim);
  VectorXd h = VectorXd::Zero(hid), c = VectorXd::Zero(hid), z(in_dim + hid);
  for (Eigen::Index t = 0; t < seq.cols(); ++t) {
    z << seq.col(t), h;
    VectorXd i = sigmoid(p.input_gate.weight * z + p.input_gate.bias);
    VectorXd f = sigmoid(p.forget_gate.weight * z + p.forget_gate.bias);
    VectorXd o = sigmoid(p.output_gate.weight * z + p.output_gate.bias);
    VectorXd g = (p.candidate.weight * z + p.candidate.bias).array().tanh();
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    h = o.cwiseProduct(VectorXd(c.array().tanh()));
  }
  return h;
}

std::array<double, 2> class_probabilities(const ClassifierModel& model, const Example& ex,
                                          const DropoutMasks* masks) {
  return run(model, ex, masks, nullptr);
}

double forward(const ClassifierModel& model, const Example& ex, bool train_mode, Rng& rng,
               const TrainConfig& cfg) {
  if (!train_mode) return predict_proba(model, ex);
  const auto masks = sample_masks(model, ex, cfg, rng);
  return clamp_prob(run(model, ex, &masks, nullptr)[1]);
}

double predict_proba(const ClassifierModel& model, const Example& ex) {
  return clamp_prob(run(model, ex, nullptr, nullptr)[1]);
}

double loss(const ClassifierModel& model, std::span<const Example> batch, const TrainConfig& cfg,
            std::span<const DropoutMasks> masks) {
  if (batch.empty()) throw DataError("empty batch");
  check_masks(batch, masks);
  double nll = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto probs = run(model, batch[i], mask_at(masks, i), nullptr);
    nll += -std::log(clamp_prob(probs[batch[i].label ? 1 : 0]));
  }
  return nll / static_cast<double>(batch.size()) +
         cfg.l2_lambda * model.softmax.weight.squaredNorm();
}

LossAndGradient gradients(const ClassifierModel& model, std::span<const Example> batch,
                          const TrainConfig& cfg, std::span<const DropoutMasks> masks) {
  if (batch.empty()) throw DataError("empty batch");
  check_masks(batch, masks);
  LossAndGradient out{0.0, ClassifierModel::zeros(model.target, model.flags, model.dims())};
  const double scale = 1.0 / static_cast<double>(batch.size());
  double nll = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    backprop(model, batch[i], mask_at(masks, i), scale, out.gradient, nll);
  out.gradient.softmax.weight += 2.0 * cfg.l2_lambda * model.softmax.weight;
  out.loss = nll * scale + cfg.l2_lambda * model.softmax.weight.squaredNorm();
  return out;
}

ClassifierModel init_model(MoralClass target, FeatureFlags flags, const ModelDims& dims, Rng& rng) {
  auto m = ClassifierModel::zeros(target, flags, dims);
  for (auto& t : tensors(m)) {
    for (double& v : t.values()) v = rng.uniform(-kInitRange, kInitRange);
  }
  return m;
}

ClassifierModel train(std::span<const Example> dataset, MoralClass target, const TrainConfig& cfg) {
  cfg.validate();
  check_labels(dataset);
  Rng rng(cfg.seed);
  auto model = init_model(target, cfg.flags, dims_from(dataset.front(), cfg), rng);
  for (const auto& ex : dataset) check_example(model, ex);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t idx : order) {
      const Example& ex = dataset[idx];
      const DropoutMasks masks = sample_masks(model, ex, cfg, rng);
      auto g = gradients(model, std::span(&ex, 1), cfg, std::span(&masks, 1));
      auto params = tensors(model);
      auto grads = tensors(g.gradient);
      for (std::size_t t = 0; t < params.size(); ++t) {
        auto p = params[t].values();
        auto d = grads[t].values();
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.learning_rate * d[k];
      }
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Persistence

std::string serialize_model(const ClassifierModel& model, const TrainConfig& cfg) {
  std::ostringstream out;
  const auto d = model.dims();
  out << "moralkb-classifier 1\n";
  out << "target " << key_name(model.target) << "\n";
  out << "flags " << flags_name(model.flags) << "\n";
  out << "config hidden_dim " << cfg.hidden_dim << "\n";
  out << "config head_dim " << cfg.head_dim << "\n";
  out << "config learning_rate " << format_double(cfg.learning_rate) << "\n";
  out << "config epochs " << cfg.epochs << "\n";
  out << "config dropout_embed " << format_double(cfg.dropout_embed) << "\n";
  out << "config dropout_lstm " << format_double(cfg.dropout_lstm) << "\n";
  out << "config dropout_fc " << format_double(cfg.dropout_fc) << "\n";
  out << "config l2_lambda " << format_double(cfg.l2_lambda) << "\n";
  out << "config seed " << cfg.seed << "\n";
  out << "dims " << d.input_dim << " " << d.hidden_dim << " " << d.head_dim << " " << d.bk_dim
      << " " << d.mfd_dim << "\n";
  auto copy = model;
  for (const auto& t : tensors(copy)) {
    out << "tensor " << t.name << " " << t.rows << " " << t.cols << "\n";
    bool first = true;
    for (double v : t.values()) {
      if (!first) out << ' ';
      out << format_double(v);
      first = false;
    }
    out << "\n";
  }
  out << "end\n";
  return out.str();
}

std::pair<ClassifierModel, TrainConfig> parse_model(std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  std::string line;
  auto fail = [&](const std::string& msg) -> DataError {
    return DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
  };
  auto next_line = [&]() -> std::istringstream {
    if (!std::getline(in, line)) throw fail("unexpected end of file");
    ++line_no;
    return std::istringstream(line);
  };

  {
    auto ls = next_line();
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "moralkb-classifier") throw fail("not a classifier model file");
    if (version != 1) throw fail("unsupported model version " + std::to_string(version));
  }
  MoralClass target{};
  FeatureFlags flags;
  TrainConfig cfg;
  ModelDims dims;
  while (true) {
    auto ls = next_line();
    std::string kw;
    ls >> kw;
    if (kw == "target") {
      std::string name;
      ls >> name;
      auto c = parse_class(name);
      if (!c) throw fail("unknown target '" + name + "'");
      target = *c;
    } else if (kw == "flags") {
      std::string name;
      ls >> name;
      auto f = parse_flags(name);
      if (!f) throw fail("unknown feature flags '" + name + "'");
      flags = *f;
    } else if (kw == "config") {
      std::string key;
      ls >> key;
      if (key == "hidden_dim") ls >> cfg.hidden_dim;
      else if (key == "head_dim") ls >> cfg.head_dim;
      else if (key == "learning_rate") ls >> cfg.learning_rate;
      else if (key == "epochs") ls >> cfg.epochs;
      else if (key == "dropout_embed") ls >> cfg.dropout_embed;
      else if (key == "dropout_lstm") ls >> cfg.dropout_lstm;
      else if (key == "dropout_fc") ls >> cfg.dropout_fc;
      else if (key == "l2_lambda") ls >> cfg.l2_lambda;
      else if (key == "seed") ls >> cfg.seed;
      else throw fail("unknown config key '" + key + "'");
      if (!ls) throw fail("bad value for config key '" + key + "'");
    } else if (kw == "dims") {
      ls >> dims.input_dim >> dims.hidden_dim >> dims.head_dim >> dims.bk_dim >> dims.mfd_dim;
      if (!ls) throw fail("bad dims line");
      break;
    } else {
      throw fail("unexpected line '" + line + "'");
    }
  }
  cfg.flags = flags;
  if (dims.hidden_dim != cfg.hidden_dim || dims.head_dim != cfg.head_dim)
    throw fail("dims disagree with the recorded config");

  ClassifierModel model;
  try {
    model = ClassifierModel::zeros(target, flags, dims);
  } catch (const DataError& e) {
    throw fail(e.what());
  }
  for (auto& t : tensors(model)) {
    auto ls = next_line();
    std::string kw, name;
    Eigen::Index rows = -1, cols = -1;
    ls >> kw >> name >> rows >> cols;
    if (kw != "tensor" || name != t.name)
      throw fail("expected tensor '" + t.name + "', found '" + line + "'");
    if (rows != t.rows || cols != t.cols)
      throw fail("shape mismatch for " + t.name + ": file has " + std::to_string(rows) + "x" +
                 std::to_string(cols) + ", expected " + std::to_string(t.rows) + "x" +
                 std::to_string(t.cols));
    auto vs = next_line();
    for (double& v : t.values()) {
      std::string tok;
      if (!(vs >> tok)) throw fail("too few values for " + t.name);
      try {
        std::size_t used = 0;
        v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw fail("bad value '" + tok + "' in " + t.name);
      }
    }
    std::string extra;
    if (vs >> extra) throw fail("too many values for " + t.name);
  }
  auto ls = next_line();
  std::string kw;
  ls >> kw;
  if (kw != "end") throw fail("expected 'end'");
  return {std::move(model), cfg};
}

// ---------------------------------------------------------------------------
// Merging

Prediction merge_predictions(const std::map<MoralClass, double>& probabilities) {
  Prediction p;
  p.probabilities = probabilities;
  for (auto f : kFoundations) {
    auto it = probabilities.find(to_class(f));
    if (it == probabilities.end())
      throw DataError("no model output for " + std::string(display_name(to_class(f))));
    p.labels.foundations[index_of(f)] = it->second >= 0.5;
  }
  p.labels.non_moral = derive_non_moral(p.labels);
  if (auto it = probabilities.find(MoralClass::NonMoral); it != probabilities.end())
    p.trained_non_moral = it->second >= 0.5;
  return p;
}

Prediction predict(const std::map<MoralClass, ClassifierModel>& models,
                   const std::map<MoralClass, Example>& features) {
  for (auto f : kFoundations) {
    if (!models.count(to_class(f)))
      throw DataError("missing model for " + std::string(display_name(to_class(f))));
  }
  std::map<MoralClass, double> probs;
  for (const auto& [c, model] : models) {
    auto it = features.find(c);
    if (it == features.end())
      throw DataError("missing features for " + std::string(display_name(c)));
    probs[c] = predict_proba(model, it->second);
  }
  return merge_predictions(probs);
}

// ---------------------------------------------------------------------------
// Logistic baseline

Eigen::VectorXd logreg_input(const Example& ex, FeatureFlags flags) {
  if (!ex.sequence || ex.sequence->cols() == 0) throw DataError("empty sequence");
  if (flags.bk && ex.bk.size() == 0) throw DataError("missing BK feature vector");
  if (flags.mfd && ex.mfd.size() == 0) throw DataError("missing MFD feature vector");
  const Eigen::Index n = ex.sequence->rows() + (flags.bk ? ex.bk.size() : 0) +
                         (flags.mfd ? ex.mfd.size() : 0);
  VectorXd x(n);
  Eigen::Index off = ex.sequence->rows();
  x.head(off) = ex.sequence->rowwise().mean();
  if (flags.bk) {
    x.segment(off, ex.bk.size()) = ex.bk;
    off += ex.bk.size();
  }
  if (flags.mfd) x.segment(off, ex.mfd.size()) = ex.mfd;
  return x;
}

double logreg_proba(const LogRegModel& model, const Example& ex) {
  const VectorXd x = logreg_input(ex, model.flags);
  if (x.size() != model.weights.size()) throw DataError("input width does not match the model");
  return clamp_prob(sigmoid(model.weights.dot(x) + model.bias));
}

double logreg_loss(const LogRegModel& model, std::span<const Example> batch, double l2_lambda) {
  return logreg_gradients(model, batch, l2_lambda).loss;
}

LogRegGradient logreg_gradients(const LogRegModel& model, std::span<const Example> batch,
                                double l2_lambda) {
  if (batch.empty()) throw DataError("empty batch");
  LogRegGradient g{0.0, VectorXd::Zero(model.weights.size()), 0.0};
  const double scale = 1.0 / static_cast<double>(batch.size());
  double nll = 0.0;
  for (const auto& ex : batch) {
    const VectorXd x = logreg_input(ex, model.flags);
    if (x.size() != model.weights.size()) throw DataError("input width does not match the model");
    const double p = sigmoid(model.weights.dot(x) + model.bias);
    const double y = ex.label ? 1.0 : 0.0;
    const double p_y = ex.label ? p : 1.0 - p;
    const double clamped = clamp_prob(p_y);
    nll += -std::log(clamped);
    if (clamped != p_y) continue;
    g.weights += scale * (p - y) * x;
    g.bias += scale * (p - y);
  }
  g.weights += 2.0 * l2_lambda * model.weights;
  g.loss = nll * scale + l2_lambda * model.weights.squaredNorm();
  return g;
}

LogRegModel train_logreg_baseline(std::span<const Example> dataset, MoralClass target,
                                  const TrainConfig& cfg) {
  cfg.validate();
  check_labels(dataset);
  Rng rng(cfg.seed);
  LogRegModel model;
  model.target = target;
  model.flags = cfg.flags;
  const auto width = logreg_input(dataset.front(), cfg.flags).size();
  model.weights.resize(width);
  for (auto& w : model.weights) w = rng.uniform(-kInitRange, kInitRange);
  model.bias = rng.uniform(-kInitRange, kInitRange);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t idx : order) {
      auto g = logreg_gradients(model, std::span(&dataset[idx], 1), cfg.l2_lambda);
      model.weights -= cfg.learning_rate * g.weights;
      model.bias -= cfg.learning_rate * g.bias;
    }
  }
  return model;
}

}  // namespace moralkb
