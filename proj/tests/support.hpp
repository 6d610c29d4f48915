#pragma once

#include "ftsum/corpus.hpp"
#include "ftsum/infer.hpp"
#include "ftsum/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace ftsum::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(FTSUM_TEST_DATA) / name;
}

/// Step model whose next-token distribution is a pure function of the prefix.
/// Token `eos` terminates; every token is emittable.
class TableModel {
 public:
  using State = Ids;  // prefix emitted so far
  using Table = std::function<Eigen::VectorXd(const Ids&)>;  // prefix -> probabilities

  TableModel(int vocab, int eos, Table table) : vocab_(vocab), eos_(eos), table_(std::move(table)) {}

  State start() const { return {}; }
  infer::StepResult<State> step(const State& prefix, int prev) const {
    infer::StepResult<State> r;
    r.state = prefix;
    if (prev != bos()) r.state.push_back(prev);
    r.log_probs = log_probs(r.state);
    return r;
  }
  Eigen::VectorXd log_probs(const Ids& prefix) const { return table_(prefix).array().log().matrix(); }
  int vocab_size() const { return vocab_; }
  int bos() const { return -1; }
  int eos() const { return eos_; }
  bool emittable(int) const { return true; }

 private:
  int vocab_, eos_;
  Table table_;
};

/// Random strictly positive distributions, memoised per prefix.
inline TableModel::Table random_table(int vocab, std::uint64_t seed) {
  auto cache = std::make_shared<std::map<Ids, Eigen::VectorXd>>();
  return [=](const Ids& prefix) {
    auto it = cache->find(prefix);
    if (it != cache->end()) return it->second;
    std::uint64_t h = seed * 0x9e3779b97f4a7c15ULL + prefix.size();
    for (int t : prefix) h = h * 1000003ULL + static_cast<std::uint64_t>(t + 7);
    Rng rng(h);
    Eigen::VectorXd p(vocab);
    for (int i = 0; i < vocab; ++i) p[i] = 0.05 + rng.uniform();
    p /= p.sum();
    cache->emplace(prefix, p);
    return p;
  };
}

struct Scored {
  Ids tokens;
  double log_prob = -std::numeric_limits<double>::infinity();
};

/// Exhaustive oracle: every finished sequence (ends in EOS, or reaches
/// max_len) with its accumulated log-probability, accumulated in emission order.
inline std::vector<Scored> enumerate_finished(const TableModel& m, int max_len) {
  std::vector<Scored> out;
  std::function<void(Ids&, double)> rec = [&](Ids& prefix, double lp) {
    const Eigen::VectorXd probs_log = m.log_probs(prefix);
    for (int tok = 0; tok < m.vocab_size(); ++tok) {
      prefix.push_back(tok);
      const double s = lp + probs_log[tok];
      if (tok == m.eos() || static_cast<int>(prefix.size()) == max_len) out.push_back({prefix, s});
      else rec(prefix, s);
      prefix.pop_back();
    }
  };
  Ids prefix;
  rec(prefix, 0.0);
  return out;
}

inline Scored brute_force_best(const TableModel& m, int max_len) {
  Scored best;
  for (auto& s : enumerate_finished(m, max_len))
    if (s.log_prob > best.log_prob) best = s;
  return best;
}

// Clipped n-gram overlap by greedy one-to-one matching of n-gram positions.
inline long matched_ngrams(const Tokens& c, const Tokens& r, int n) {
  const auto un = static_cast<std::size_t>(n);
  std::vector<bool> used(r.size() + 1, false);
  long hits = 0;
  for (std::size_t i = 0; i + un <= c.size(); ++i)
    for (std::size_t j = 0; j + un <= r.size(); ++j) {
      if (used[j] || !std::equal(c.begin() + i, c.begin() + i + n, r.begin() + j)) continue;
      used[j] = true;
      ++hits;
      break;
    }
  return hits;
}

inline bool is_subsequence(const Tokens& s, const Tokens& of) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < of.size() && k < s.size(); ++i)
    if (of[i] == s[k]) ++k;
  return k == s.size();
}

// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs_by_subsets(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  for (unsigned mask = 0; mask < (1u << a.size()); ++mask) {
    Tokens s;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask >> i & 1u) s.push_back(a[i]);
    if (s.size() > best && is_subsequence(s, b)) best = s.size();
  }
  return best;
}

inline double f1_of(double overlap, double cand_units, double ref_units) {
  if (cand_units == 0 || ref_units == 0 || overlap == 0) return 0.0;
  const double p = overlap / cand_units, r = overlap / ref_units;
  return 2 * p * r / (p + r);
}

inline Tokens random_letters(Rng& rng, std::size_t max_len) {
  Tokens t;
  const std::size_t n = rng.index(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) t.push_back(std::string(1, static_cast<char>('a' + rng.index(4))));
  return t;
}

// Decoder that only attends to the sentence encoder; context = cx.
struct SentenceOnlyStep {
  Eigen::VectorXd state;
  Eigen::VectorXd probs;
};
inline SentenceOnlyStep sentence_only_step(const model::ModelParams& p, const model::Memory& m, int y_prev,
                                           const Eigen::VectorXd& s_prev) {
  const Eigen::VectorXd emb = p.target_embed.row(y_prev).transpose();
  const Eigen::VectorXd scores = nn::attention_scores(s_prev, p.sent_attn.Wk * m.sentence_states, p.sent_attn);
  const Eigen::VectorXd cx = m.sentence_states * nn::masked_softmax(scores, m.sentence.mask);
  Eigen::VectorXd in(emb.size() + cx.size());
  in << emb, cx;
  SentenceOnlyStep out;
  out.state = nn::gru_cell(in, s_prev, p.decoder);
  const Eigen::VectorXd readout = p.readout_word * emb + p.readout_context * cx + p.readout_state * out.state;
  out.probs = nn::softmax(p.output_W * readout + p.output_b);
  return out;
}

}  // namespace ftsum::testing
