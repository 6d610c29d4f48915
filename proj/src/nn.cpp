#include "ftsum/nn.hpp"

#include "ftsum/error.hpp"
#include "ftsum/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ftsum::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

Vec sigmoid(const Vec& a) { return a.unaryExpr([](double x) { return nn::sigmoid(x); }); }

}  // namespace

Mat glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = (rows + cols) > 0 ? std::sqrt(6.0 / static_cast<double>(rows + cols)) : 0.0;
  Mat m(rows, cols);
  // Column-major fill order is part of the seeded contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

GruParams GruParams::zeros(Eigen::Index input_dim, Eigen::Index hidden_dim) {
  GruParams p;
  p.Wz = p.Wr = p.Wh = Mat::Zero(hidden_dim, input_dim);
  p.Uz = p.Ur = p.Uh = Mat::Zero(hidden_dim, hidden_dim);
  p.bz = p.br = p.bh = Vec::Zero(hidden_dim);
  return p;
}

GruParams GruParams::glorot(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng) {
  GruParams p = zeros(input_dim, hidden_dim);
  p.Wz = glorot_uniform(hidden_dim, input_dim, rng);
  p.Wr = glorot_uniform(hidden_dim, input_dim, rng);
  p.Wh = glorot_uniform(hidden_dim, input_dim, rng);
  p.Uz = glorot_uniform(hidden_dim, hidden_dim, rng);
  p.Ur = glorot_uniform(hidden_dim, hidden_dim, rng);
  p.Uh = glorot_uniform(hidden_dim, hidden_dim, rng);
  return p;
}

Vec gru_cell(const Vec& x, const Vec& h_prev, const GruParams& p, GruCache* cache) {
  require(x.size() == p.input_dim(), "gru_cell: input has " + std::to_string(x.size()) + " entries, expected " +
                                         std::to_string(p.input_dim()));
  require(h_prev.size() == p.hidden_dim(), "gru_cell: hidden state has wrong size");
  Vec z = sigmoid(p.Wz * x + p.Uz * h_prev + p.bz);
  Vec r = sigmoid(p.Wr * x + p.Ur * h_prev + p.br);
  Vec rh = r.cwiseProduct(h_prev);
  Vec n = (p.Wh * x + p.Uh * rh + p.bh).array().tanh().matrix();
  Vec h = (Vec::Ones(z.size()) - z).cwiseProduct(h_prev) + z.cwiseProduct(n);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
    cache->h = h;
  }
  return h;
}

GruInputGrads gru_cell_backward(const GruParams& p, const GruCache& c, const Vec& dh, GruParams& g) {
  const auto ones = Vec::Ones(c.z.size());
  Vec dz = dh.cwiseProduct(c.n - c.h_prev);
  Vec dn = dh.cwiseProduct(c.z);
  GruInputGrads out;
  out.dh_prev = dh.cwiseProduct(ones - c.z);

  Vec an = dn.cwiseProduct(ones - c.n.cwiseProduct(c.n));
  Vec rh = c.r.cwiseProduct(c.h_prev);
  g.Wh.noalias() += an * c.x.transpose();
  g.Uh.noalias() += an * rh.transpose();
  g.bh += an;
  out.dx.noalias() = p.Wh.transpose() * an;
  Vec drh = p.Uh.transpose() * an;
  Vec dr = drh.cwiseProduct(c.h_prev);
  out.dh_prev += drh.cwiseProduct(c.r);

  Vec az = dz.cwiseProduct(c.z.cwiseProduct(ones - c.z));
  g.Wz.noalias() += az * c.x.transpose();
  g.Uz.noalias() += az * c.h_prev.transpose();
  g.bz += az;
  out.dx.noalias() += p.Wz.transpose() * az;
  out.dh_prev.noalias() += p.Uz.transpose() * az;

  Vec ar = dr.cwiseProduct(c.r.cwiseProduct(ones - c.r));
  g.Wr.noalias() += ar * c.x.transpose();
  g.Ur.noalias() += ar * c.h_prev.transpose();
  g.br += ar;
  out.dx.noalias() += p.Wr.transpose() * ar;
  out.dh_prev.noalias() += p.Ur.transpose() * ar;
  return out;
}

AttentionParams AttentionParams::zeros(Eigen::Index query_dim, Eigen::Index key_dim, Eigen::Index attn_dim) {
  AttentionParams p;
  p.Wq = Mat::Zero(attn_dim, query_dim);
  p.Wk = Mat::Zero(attn_dim, key_dim);
  p.b = Vec::Zero(attn_dim);
  p.v = Vec::Zero(attn_dim);
  return p;
}

AttentionParams AttentionParams::glorot(Eigen::Index query_dim, Eigen::Index key_dim, Eigen::Index attn_dim,
                                        Rng& rng) {
  AttentionParams p = zeros(query_dim, key_dim, attn_dim);
  p.Wq = glorot_uniform(attn_dim, query_dim, rng);
  p.Wk = glorot_uniform(attn_dim, key_dim, rng);
  p.v = glorot_uniform(attn_dim, 1, rng);
  return p;
}

double attention_score(const Vec& s, const Vec& h, const AttentionParams& p) {
  require(s.size() == p.Wq.cols() && h.size() == p.Wk.cols(), "attention_score: dimension mismatch");
  Vec u = (p.Wq * s + p.Wk * h + p.b).array().tanh().matrix();
  return p.v.dot(u);
}

AttentionScoreGrads attention_score_backward(const Vec& s, const Vec& h, const AttentionParams& p, double de,
                                             AttentionParams& g) {
  Vec u = (p.Wq * s + p.Wk * h + p.b).array().tanh().matrix();
  g.v += de * u;
  Vec a = (de * p.v).cwiseProduct(Vec::Ones(u.size()) - u.cwiseProduct(u));
  g.Wq.noalias() += a * s.transpose();
  g.Wk.noalias() += a * h.transpose();
  g.b += a;
  return {p.Wq.transpose() * a, p.Wk.transpose() * a};
}

Vec attention_scores(const Vec& s, const Mat& projected_keys, const AttentionParams& p, Mat* hidden) {
  require(s.size() == p.Wq.cols() && projected_keys.rows() == p.Wq.rows(), "attention_scores: dimension mismatch");
  const Vec q = p.Wq * s + p.b;
  Mat u = (projected_keys.colwise() + q).array().tanh().matrix();
  Vec e = u.transpose() * p.v;
  if (hidden) *hidden = std::move(u);
  return e;
}

Vec attention_scores_backward(const Vec& s, const Mat& hidden, const AttentionParams& p, const Vec& dscores,
                              AttentionParams& g, Mat& dprojected) {
  g.v.noalias() += hidden * dscores;
  // a_i = de_i * v ⊙ (1 - u_i²)
  Mat a = (p.v * dscores.transpose()).cwiseProduct((1.0 - hidden.array().square()).matrix());
  dprojected += a;
  const Vec dq = a.rowwise().sum();
  g.b += dq;
  g.Wq.noalias() += dq * s.transpose();
  return p.Wq.transpose() * dq;
}

Vec masked_softmax(const Vec& scores, std::span<const std::uint8_t> mask) {
  require(static_cast<Eigen::Index>(mask.size()) == scores.size(), "masked_softmax: mask size mismatch");
  Vec out = Vec::Zero(scores.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) mx = std::max(mx, scores[i]);
  if (mx == -std::numeric_limits<double>::infinity()) return out;
  double sum = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) sum += out[i] = std::exp(scores[i] - mx);
  return out / sum;
}

Vec masked_softmax_backward(const Vec& probs, const Vec& dprobs) {
  return probs.cwiseProduct((dprobs.array() - probs.dot(dprobs)).matrix());
}

Vec softmax(const Vec& logits) {
  Vec e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Vec log_softmax(const Vec& logits) {
  const auto shifted = (logits.array() - logits.maxCoeff()).eval();
  return (shifted - std::log(shifted.exp().sum())).matrix();
}

Vec dropout_mask(Eigen::Index n, double p, Rng& rng) {
  Vec m(n);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < n; ++i) m[i] = rng.bernoulli(p) ? 0.0 : keep;
  return m;
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Mat m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.bernoulli(p) ? 0.0 : keep;
  return m;
}

AdamState make_adam_state(std::span<const ConstTensorView> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.push_back(Vec::Zero(p.size()));
    s.v.push_back(Vec::Zero(p.size()));
  }
  return s;
}

void adam_step(std::span<const TensorView> params, std::span<const ConstTensorView> grads, AdamState& state,
               double lr) {
  if (lr < 0 || !std::isfinite(lr)) throw Error("adam_step: learning rate must be finite and non-negative");
  require(params.size() == grads.size() && params.size() == state.m.size() && params.size() == state.v.size(),
          "adam_step: parameter/gradient/state count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(params[k].size() == grads[k].size() && params[k].size() == state.m[k].size(),
            "adam_step: shape mismatch for " + params[k].name);
    if (!grads[k].flat().allFinite()) throw NumericError("adam_step: non-finite gradient in " + grads[k].name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto g = grads[k].flat();
    auto& m = state.m[k];
    auto& v = state.v[k];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    if (lr == 0) continue;
    auto p = params[k].flat();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

void clip_gradients(std::span<const TensorView> grads, double lo, double hi) {
  if (lo > hi) throw Error("clip_gradients: empty range");
  for (const auto& g : grads) {
    auto f = g.flat();
    f = f.cwiseMax(lo).cwiseMin(hi);
  }
}

void clip_gradients_by_norm(std::span<const TensorView> grads, double max_norm) {
  double sq = 0;
  for (const auto& g : grads) sq += g.flat().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0) return;
  for (const auto& g : grads) g.flat() *= max_norm / norm;
}

FiniteDiffReport finite_diff_check(const std::function<double()>& loss, std::span<const TensorView> params,
                                   std::span<const ConstTensorView> analytic, double eps) {
  if (!(eps > 0)) throw Error("finite_diff_check: epsilon must be positive");
  require(params.size() == analytic.size(), "finite_diff_check: parameter/gradient count mismatch");
  FiniteDiffReport rep;
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(params[k].size() == analytic[k].size(), "finite_diff_check: shape mismatch for " + params[k].name);
    for (Eigen::Index i = 0; i < params[k].size(); ++i) {
      double& theta = params[k].data[i];
      const double saved = theta;
      theta = saved + eps;
      const double up = loss();
      theta = saved - eps;
      const double down = loss();
      theta = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("finite_diff_check: non-finite loss perturbing " + params[k].name);
      const double numeric = (up - down) / (2 * eps);
      const double a = analytic[k].data[i];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++rep.checked;
      rep.max_abs_error = std::max(rep.max_abs_error, std::abs(a - numeric));
      if (rel > rep.max_rel_error || rep.worst_index < 0) {
        rep.max_rel_error = std::max(rel, rep.max_rel_error);
        rep.worst_tensor = params[k].name;
        rep.worst_index = i;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace ftsum::nn
