#pragma once

// Small differentiable kernel: the handful of forward ops the summarizer
// needs, each paired with a hand-written backward, plus optimizer utilities
// and a central-difference gradient oracle. Everything runs in double.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ftsum {
class Rng;
}

namespace ftsum::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Mask = std::vector<std::uint8_t>;

/// Named flat view of a parameter or gradient tensor.
template <class T>
struct BasicTensorView {
  std::string name;
  T* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  Eigen::Map<std::conditional_t<std::is_const_v<T>, const Vec, Vec>> flat() const { return {data, size()}; }
};
using TensorView = BasicTensorView<double>;
using ConstTensorView = BasicTensorView<const double>;

/// Collects views over the tensors a parameter struct exposes through
/// `visit(self, f)`. Zero-size tensors are skipped.
template <class Params>
std::vector<TensorView> views_of(Params& p) {
  std::vector<TensorView> out;
  Params::visit(p, [&](const std::string& name, auto& t) {
    if (t.size() > 0) out.push_back({name, t.data(), t.rows(), t.cols()});
  });
  return out;
}

template <class Params>
std::vector<ConstTensorView> views_of(const Params& p) {
  std::vector<ConstTensorView> out;
  Params::visit(p, [&](const std::string& name, const auto& t) {
    if (t.size() > 0) out.push_back({name, t.data(), t.rows(), t.cols()});
  });
  return out;
}

/// Same-shaped zero tensors.
template <class Params>
Params zeros_like(const Params& p) {
  Params out = p;
  Params::visit(out, [](const std::string&, auto& t) { t.setZero(); });
  return out;
}

inline std::vector<ConstTensorView> as_const(std::span<const TensorView> v) {
  std::vector<ConstTensorView> out;
  out.reserve(v.size());
  for (const auto& t : v) out.push_back({t.name, t.data, t.rows, t.cols});
  return out;
}

/// Uniform in ±sqrt(6 / (rows + cols)).
Mat glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// GRU ------------------------------------------------------------------------

struct GruParams {
  Mat Wz, Wr, Wh;  // hidden x input
  Mat Uz, Ur, Uh;  // hidden x hidden
  Vec bz, br, bh;

  static GruParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim);
  static GruParams glorot(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);
  Eigen::Index input_dim() const { return Wz.cols(); }
  Eigen::Index hidden_dim() const { return Wz.rows(); }

  template <class Self, class F>
  static void visit(Self& p, F&& f) {
    f("Wz", p.Wz), f("Wr", p.Wr), f("Wh", p.Wh);
    f("Uz", p.Uz), f("Ur", p.Ur), f("Uh", p.Uh);
    f("bz", p.bz), f("br", p.br), f("bh", p.bh);
  }
};

struct GruCache {
  Vec x, h_prev, z, r, n, h;
};

/// z = σ(Wz x + Uz h + bz), r = σ(Wr x + Ur h + br),
/// n = tanh(Wh x + Uh (r ⊙ h) + bh), h' = (1 - z) ⊙ h + z ⊙ n.
Vec gru_cell(const Vec& x, const Vec& h_prev, const GruParams& p, GruCache* cache = nullptr);

struct GruInputGrads {
  Vec dx, dh_prev;
};

/// Accumulates parameter gradients into `grads`.
GruInputGrads gru_cell_backward(const GruParams& p, const GruCache& cache, const Vec& dh, GruParams& grads);

// Additive attention -------------------------------------------------------

struct AttentionParams {
  Mat Wq;  // attn x query
  Mat Wk;  // attn x key
  Vec b, v;

  static AttentionParams zeros(Eigen::Index query_dim, Eigen::Index key_dim, Eigen::Index attn_dim);
  static AttentionParams glorot(Eigen::Index query_dim, Eigen::Index key_dim, Eigen::Index attn_dim, Rng& rng);

  template <class Self, class F>
  static void visit(Self& p, F&& f) {
    f("Wq", p.Wq), f("Wk", p.Wk), f("b", p.b), f("v", p.v);
  }
};

/// e = vᵀ tanh(Wq s + Wk h + b).
double attention_score(const Vec& s, const Vec& h, const AttentionParams& p);

struct AttentionScoreGrads {
  Vec ds, dh;
};
AttentionScoreGrads attention_score_backward(const Vec& s, const Vec& h, const AttentionParams& p, double de,
                                             AttentionParams& grads);

/// Scores of one query against all key columns, with `projected_keys` = Wk K
/// computed once per sequence. `hidden` receives the tanh activations
/// (attn x n) when non-null.
Vec attention_scores(const Vec& s, const Mat& projected_keys, const AttentionParams& p, Mat* hidden = nullptr);

/// Backward of attention_scores. Returns ds; adds Wq/b/v grads and writes
/// d(projected_keys) into `dprojected` (attn x n, accumulated).
Vec attention_scores_backward(const Vec& s, const Mat& hidden, const AttentionParams& p, const Vec& dscores,
                              AttentionParams& grads, Mat& dprojected);

// Softmax -------------------------------------------------------------------

/// Softmax over unmasked entries; masked entries are 0. An all-zero mask
/// yields the zero vector.
Vec masked_softmax(const Vec& scores, std::span<const std::uint8_t> mask);
Vec masked_softmax_backward(const Vec& probs, const Vec& dprobs);

Vec softmax(const Vec& logits);
Vec log_softmax(const Vec& logits);

// Dropout -------------------------------------------------------------------

/// Inverted dropout mask: each entry is 0 with probability p, else 1/(1-p).
Vec dropout_mask(Eigen::Index n, double p, Rng& rng);
Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng);

// Optimization ----------------------------------------------------------------

struct AdamState {
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Vec> m, v;
};

AdamState make_adam_state(std::span<const ConstTensorView> params);

/// One bias-corrected Adam update. Throws on shape mismatch or a non-finite gradient.
void adam_step(std::span<const TensorView> params, std::span<const ConstTensorView> grads, AdamState& state,
               double lr);

/// Componentwise clamp to [lo, hi].
void clip_gradients(std::span<const TensorView> grads, double lo = -5.0, double hi = 5.0);

/// Rescales all gradients jointly when their global L2 norm exceeds max_norm.
void clip_gradients_by_norm(std::span<const TensorView> grads, double max_norm);

// Gradient oracle -------------------------------------------------------------

struct FiniteDiffReport {
  double max_rel_error = 0;
  std::string worst_tensor;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0;
  double worst_numeric = 0;
  double max_abs_error = 0;  // max |analytic - numeric| over all components
  std::size_t checked = 0;
};

/// Central differences of `loss` (which must read the current values behind
/// `params`) against `analytic`; per component |a - n| / max(1e-8, |a| + |n|).
/// Parameters are restored before returning.
FiniteDiffReport finite_diff_check(const std::function<double()>& loss, std::span<const TensorView> params,
                                   std::span<const ConstTensorView> analytic, double eps = 1e-5);

}  // namespace ftsum::nn
