#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ftsum/error.hpp"
#include "ftsum/nn.hpp"
#include "ftsum/rng.hpp"

#include <cmath>
#include <numeric>

using namespace ftsum;
using namespace ftsum::nn;

namespace {

Vec random_vec(Eigen::Index n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

template <class P>
void randomize(P& p, Rng& rng, double scale) {
  P::visit(p, [&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-scale, scale);
  });
}

// Differentiable inputs of a single op, checked alongside its parameters.
struct Inputs {
  Vec a, b;
  Mat keys;
  template <class Self, class F>
  static void visit(Self& p, F&& f) {
    f("a", p.a), f("b", p.b), f("keys", p.keys);
  }
};

}  // namespace

TEST_CASE("rng: uniform draws lie in [0, 1) and index is in range") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.index(7) < 7u);
  }
  Rng a(11), b(11);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("glorot_uniform stays inside the fan-based bound") {
  Rng rng(1);
  const Mat m = glorot_uniform(30, 50, rng);
  const double bound = std::sqrt(6.0 / 80.0);
  CHECK(m.cwiseAbs().maxCoeff() <= bound);
  CHECK(m.cwiseAbs().maxCoeff() > 0.5 * bound);
}

TEST_CASE("gru_cell: zero weights give the halfway blend of h_prev and zero") {
  // z = r = 0.5, n = 0  =>  h = 0.5 h_prev
  const auto p = GruParams::zeros(3, 4);
  Vec h(4);
  h << 1, -2, 0.5, 4;
  const Vec out = gru_cell(Vec::Ones(3), h, p);
  CHECK((out - 0.5 * h).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("gru_cell: |h_i| <= max(|h_prev_i|, 1)") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = GruParams::zeros(4, 5);
    randomize(p, rng, 3.0);
    const Vec x = random_vec(4, rng, 3.0);
    const Vec h = random_vec(5, rng, 3.0);
    const Vec out = gru_cell(x, h, p);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(out[i]) <= std::max(std::abs(h[i]), 1.0) + 1e-12);
  }
}

TEST_CASE("gru_cell matches a direct evaluation of the gate equations") {
  Rng rng(8);
  auto p = GruParams::zeros(3, 2);
  randomize(p, rng, 1.0);
  const Vec x = random_vec(3, rng), h = random_vec(2, rng);
  auto sig = [](const Vec& v) { return Vec((1.0 / (1.0 + (-v.array()).exp())).matrix()); };
  const Vec z = sig(p.Wz * x + p.Uz * h + p.bz);
  const Vec r = sig(p.Wr * x + p.Ur * h + p.br);
  const Vec n = (p.Wh * x + p.Uh * r.cwiseProduct(h) + p.bh).array().tanh().matrix();
  const Vec expect = (Vec::Ones(2) - z).cwiseProduct(h) + z.cwiseProduct(n);
  CHECK((gru_cell(x, h, p) - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("gru_cell_backward agrees with finite differences") {
  Rng rng(21);
  auto p = GruParams::zeros(4, 3);
  randomize(p, rng, 0.8);
  Inputs in{random_vec(4, rng), random_vec(3, rng), Mat()};
  const Vec w = random_vec(3, rng);

  GruCache cache;
  gru_cell(in.a, in.b, p, &cache);
  auto gp = zeros_like(p);
  const auto dins = gru_cell_backward(p, cache, w, gp);
  Inputs gin{dins.dx, dins.dh_prev, Mat()};

  auto loss = [&] { return w.dot(gru_cell(in.a, in.b, p)); };
  auto pv = views_of(p);
  const GruParams& cgp = gp;
  auto rep = finite_diff_check(loss, pv, views_of(cgp), 1e-5);
  CHECK(rep.max_rel_error <= 1e-6);
  auto iv = views_of(in);
  const Inputs& cgin = gin;
  auto rep2 = finite_diff_check(loss, iv, views_of(cgin), 1e-5);
  CHECK(rep2.max_rel_error <= 1e-6);
}

TEST_CASE("attention_score is v^T tanh(Wq s + Wk h + b)") {
  Rng rng(4);
  auto p = AttentionParams::zeros(3, 5, 4);
  randomize(p, rng, 1.0);
  const Vec s = random_vec(3, rng), h = random_vec(5, rng);
  const double expect = p.v.dot((p.Wq * s + p.Wk * h + p.b).array().tanh().matrix());
  CHECK(attention_score(s, h, p) == doctest::Approx(expect).epsilon(1e-14));
  const Mat keys = random_mat(5, 6, rng);
  const Vec scores = attention_scores(s, p.Wk * keys, p);
  for (Eigen::Index i = 0; i < 6; ++i)
    CHECK(scores[i] == doctest::Approx(attention_score(s, keys.col(i), p)).epsilon(1e-13));
}

TEST_CASE("attention backward (single and batched) agrees with finite differences") {
  Rng rng(31);
  auto p = AttentionParams::zeros(3, 4, 5);
  randomize(p, rng, 0.9);
  Inputs in{random_vec(3, rng), random_vec(4, rng), random_mat(4, 6, rng)};

  SUBCASE("single score") {
    auto g = zeros_like(p);
    const auto d = attention_score_backward(in.a, in.b, p, 1.0, g);
    Inputs gin{d.ds, d.dh, Mat::Zero(4, 6)};
    auto loss = [&] { return attention_score(in.a, in.b, p); };
    auto pv = views_of(p);
    const AttentionParams& cg = g;
    CHECK(finite_diff_check(loss, pv, views_of(cg)).max_rel_error <= 1e-6);
    auto iv = views_of(in);
    const Inputs& cgin = gin;
    CHECK(finite_diff_check(loss, iv, views_of(cgin)).max_rel_error <= 1e-6);
  }
  SUBCASE("batched scores through masked softmax") {
    const Vec w = random_vec(6, rng);
    const Mask mask = {1, 1, 0, 1, 1, 1};
    auto loss = [&] {
      const Vec e = attention_scores(in.a, p.Wk * in.keys, p);
      return w.dot(masked_softmax(e, mask));
    };
    Mat hidden;
    const Vec e = attention_scores(in.a, p.Wk * in.keys, p, &hidden);
    const Vec probs = masked_softmax(e, mask);
    const Vec de = masked_softmax_backward(probs, w);
    auto g = zeros_like(p);
    Mat dproj = Mat::Zero(5, 6);
    const Vec ds = attention_scores_backward(in.a, hidden, p, de, g, dproj);
    g.Wk += dproj * in.keys.transpose();
    Inputs gin{ds, Vec::Zero(4), p.Wk.transpose() * dproj};
    auto pv = views_of(p);
    const AttentionParams& cg = g;
    CHECK(finite_diff_check(loss, pv, views_of(cg)).max_rel_error <= 1e-6);
    auto iv = views_of(in);
    const Inputs& cgin = gin;
    CHECK(finite_diff_check(loss, iv, views_of(cgin)).max_rel_error <= 1e-6);
  }
}

TEST_CASE("masked_softmax") {
  Vec s(4);
  s << 1.0, 2.0, 3.0, 4.0;
  SUBCASE("sums to one over unmasked positions and is zero elsewhere") {
    const Mask m = {1, 0, 1, 1};
    const Vec p = masked_softmax(s, m);
    CHECK(p.sum() == doctest::Approx(1.0));
    CHECK(p[1] == 0.0);
    const double z = std::exp(1.0) + std::exp(3.0) + std::exp(4.0);
    CHECK(p[0] == doctest::Approx(std::exp(1.0) / z));
  }
  SUBCASE("all-masked input gives the zero vector") {
    const Mask m = {0, 0, 0, 0};
    CHECK(masked_softmax(s, m).isZero(0.0));
  }
  SUBCASE("invariant to a constant shift of the unmasked scores") {
    const Mask m = {1, 1, 0, 1};
    Vec shifted = s.array() + 100.0;
    shifted[2] = -7.0;
    CHECK((masked_softmax(s, m) - masked_softmax(shifted, m)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("size mismatch throws") {
    const Mask m = {1, 1};
    CHECK_THROWS_AS(masked_softmax(s, m), ShapeError);
  }
}

TEST_CASE("softmax and log_softmax are consistent and stable") {
  Vec l(3);
  l << 1000.0, 1001.0, 999.0;
  const Vec p = softmax(l);
  const Vec lp = log_softmax(l);
  CHECK(p.allFinite());
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK((lp.array().exp().matrix() - p).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("dropout masks use inverted scaling") {
  Rng rng(9);
  const Vec m = dropout_mask(200000, 0.5, rng);
  for (Eigen::Index i = 0; i < m.size(); ++i) CHECK((m[i] == 0.0 || m[i] == 2.0));
  CHECK(m.mean() == doctest::Approx(1.0).epsilon(0.01));
  Rng r2(9);
  CHECK(dropout_mask(10, 0.0, r2).isOnes(0.0));
}

TEST_CASE("clip_gradients clamps to [lo, hi], is idempotent and monotone") {
  Vec g(5);
  g << 7.0, -9.0, 3.0, 5.0, -5.0;
  std::vector<TensorView> views{{"g", g.data(), 5, 1}};
  clip_gradients(views);
  Vec expect(5);
  expect << 5.0, -5.0, 3.0, 5.0, -5.0;
  CHECK(g == expect);
  clip_gradients(views);
  CHECK(g == expect);

  Vec empty(0);
  std::vector<TensorView> ev{{"e", empty.data(), 0, 1}};
  clip_gradients(ev);
  CHECK(empty.size() == 0);

  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    Vec a = random_vec(1, rng, 20.0), b = a;
    b[0] += rng.uniform(0.0, 10.0);
    std::vector<TensorView> va{{"a", a.data(), 1, 1}}, vb{{"b", b.data(), 1, 1}};
    clip_gradients(va);
    clip_gradients(vb);
    CHECK(a[0] <= b[0]);
  }
}

TEST_CASE("clip_gradients_by_norm rescales only when above the threshold") {
  Vec a(2), b(1);
  a << 3.0, 0.0;
  b << 4.0;
  std::vector<TensorView> v{{"a", a.data(), 2, 1}, {"b", b.data(), 1, 1}};
  clip_gradients_by_norm(v, 10.0);
  CHECK(a[0] == 3.0);
  clip_gradients_by_norm(v, 2.5);
  CHECK(a[0] == doctest::Approx(1.5));
  CHECK(b[0] == doctest::Approx(2.0));
}

TEST_CASE("adam_step") {
  Vec p(3), g(3);
  p << 1.0, -2.0, 0.5;
  g << 0.3, -0.1, 0.0;
  std::vector<TensorView> pv{{"p", p.data(), 3, 1}};
  std::vector<ConstTensorView> gv{{"p", g.data(), 3, 1}};
  auto state = make_adam_state(nn::as_const(pv));

  SUBCASE("lr = 0 changes nothing") {
    const Vec before = p;
    adam_step(pv, gv, state, 0.0);
    CHECK(p == before);
  }
  SUBCASE("first step moves each coordinate by lr against the gradient sign") {
    // m_hat = g, v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps).
    adam_step(pv, gv, state, 0.01);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 0.1 / (0.1 + 1e-8)));
    CHECK(p[2] == 0.5);
    CHECK(state.step == 1);
  }
  SUBCASE("non-finite gradient and bad shapes are rejected") {
    g[1] = std::nan("");
    CHECK_THROWS_AS(adam_step(pv, gv, state, 0.01), NumericError);
    Vec small(2);
    std::vector<ConstTensorView> bad{{"p", small.data(), 2, 1}};
    CHECK_THROWS_AS(adam_step(pv, bad, state, 0.01), ShapeError);
    CHECK_THROWS(adam_step(pv, gv, state, -1.0));
  }
}

TEST_CASE("finite_diff_check oracles") {
  SUBCASE("quadratic: analytic 2θ agrees to O(eps^2)") {
    Vec theta(2);
    theta << 1.0, 2.0;
    Vec grad(2);
    grad << 2.0, 4.0;
    std::vector<TensorView> pv{{"t", theta.data(), 2, 1}};
    std::vector<ConstTensorView> gv{{"t", grad.data(), 2, 1}};
    const auto rep = finite_diff_check([&] { return theta.squaredNorm(); }, pv, gv, 1e-5);
    CHECK(rep.max_rel_error < 1e-9);
    CHECK(theta[0] == 1.0);  // restored
    CHECK(rep.checked == 2);
  }
  SUBCASE("constant loss: zero error") {
    Vec theta = Vec::Ones(3), grad = Vec::Zero(3);
    std::vector<TensorView> pv{{"t", theta.data(), 3, 1}};
    std::vector<ConstTensorView> gv{{"t", grad.data(), 3, 1}};
    CHECK(finite_diff_check([] { return 4.2; }, pv, gv).max_rel_error == 0.0);
  }
  SUBCASE("a wrong gradient is reported") {
    Vec theta = Vec::Ones(1), grad = Vec::Constant(1, 3.0);
    std::vector<TensorView> pv{{"t", theta.data(), 1, 1}};
    std::vector<ConstTensorView> gv{{"t", grad.data(), 1, 1}};
    const auto rep = finite_diff_check([&] { return theta.squaredNorm(); }, pv, gv);
    CHECK(rep.max_rel_error == doctest::Approx(0.2));
    CHECK(rep.worst_tensor == "t");
  }
  SUBCASE("non-finite loss throws") {
    Vec theta = Vec::Ones(1), grad = Vec::Zero(1);
    std::vector<TensorView> pv{{"t", theta.data(), 1, 1}};
    std::vector<ConstTensorView> gv{{"t", grad.data(), 1, 1}};
    CHECK_THROWS_AS(finite_diff_check([] { return std::log(-1.0); }, pv, gv), NumericError);
  }
}
