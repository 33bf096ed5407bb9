#pragma once

// Independent reference computations used to check the library. They are
// deliberately naive: explicit set counting, scalar loops, and finite
// differences.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "moralkb/features.hpp"
#include "moralkb/model.hpp"

namespace oracle {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct SetCounts {
  double D = 0, dw = 0, df = 0, dwf = 0;
};

inline SetCounts count_sets(const std::string& word, const std::vector<moralkb::LabelledDoc>& docs) {
  SetCounts c;
  const std::string w = lower(word);
  std::set<std::size_t> with_word, positive;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::set<std::string> bag;
    for (const auto& t : docs[i].tokens) bag.insert(lower(t));
    if (bag.count(w)) with_word.insert(i);
    if (docs[i].positive) positive.insert(i);
  }
  std::vector<std::size_t> both;
  std::set_intersection(with_word.begin(), with_word.end(), positive.begin(), positive.end(),
                        std::back_inserter(both));
  c.D = static_cast<double>(docs.size());
  c.dw = static_cast<double>(with_word.size());
  c.df = static_cast<double>(positive.size());
  c.dwf = static_cast<double>(both.size());
  return c;
}

/// log2 of dwf / (dw df / D + sqrt(dw) sqrt(ln(1/delta) / 2)).
inline double cpmid(const std::string& word, const std::vector<moralkb::LabelledDoc>& docs,
                    double delta) {
  const auto c = count_sets(word, docs);
  if (c.dwf == 0) return -std::numeric_limits<double>::infinity();
  const double expected = c.dw * c.df / c.D;
  const double correction = std::sqrt(c.dw) * std::sqrt(std::log(1.0 / delta) / 2.0);
  return std::log(c.dwf / (expected + correction)) / std::log(2.0);
}

inline double plain_pmi(const std::string& word, const std::vector<moralkb::LabelledDoc>& docs) {
  const auto c = count_sets(word, docs);
  if (c.dwf == 0) return -std::numeric_limits<double>::infinity();
  return std::log2(c.dwf * c.D / (c.dw * c.df));
}

// Scalar LSTM step-by-step, reading weights element by element.
inline std::vector<double> lstm_last_hidden(const std::vector<std::vector<double>>& seq,
                                            const moralkb::LSTMParams& p) {
  const std::size_t H = p.hidden_dim, I = p.input_dim;
  std::vector<double> h(H, 0.0), c(H, 0.0);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (const auto& x : seq) {
    std::vector<double> z(x);
    z.insert(z.end(), h.begin(), h.end());
    std::vector<double> nh(H), nc(H);
    for (std::size_t r = 0; r < H; ++r) {
      double ai = p.input_gate.bias[r], af = p.forget_gate.bias[r];
      double ao = p.output_gate.bias[r], ag = p.candidate.bias[r];
      for (std::size_t k = 0; k < I + H; ++k) {
        ai += p.input_gate.weight(r, k) * z[k];
        af += p.forget_gate.weight(r, k) * z[k];
        ao += p.output_gate.weight(r, k) * z[k];
        ag += p.candidate.weight(r, k) * z[k];
      }
      nc[r] = sig(af) * c[r] + sig(ai) * std::tanh(ag);
      nh[r] = sig(ao) * std::tanh(nc[r]);
    }
    h = nh;
    c = nc;
  }
  return h;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Worst relative error between `analytic` and central differences of
/// `loss_fn` over every entry of `params`.
template <class LossFn>
double worst_gradient_error(std::vector<moralkb::TensorRef> params,
                            const std::vector<moralkb::TensorRef>& analytic, LossFn loss_fn,
                            double step = 1e-5) {
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto values = params[t].values();
    auto grads = analytic[t].values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double up = loss_fn();
      values[k] = saved - step;
      const double down = loss_fn();
      values[k] = saved;
      worst = std::max(worst, relative_error(grads[k], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

inline double f1(const std::vector<bool>& pred, const std::vector<bool>& gold) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    tp += pred[i] && gold[i];
    fp += pred[i] && !gold[i];
    fn += !pred[i] && gold[i];
  }
  if (tp == 0) return 0.0;
  return 2 * tp / (2 * tp + fp + fn);
}

}  // namespace oracle
