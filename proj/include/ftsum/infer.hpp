#pragma once

// Length-capped beam search and greedy decoding over any step model.
//
// A step model exposes
//   using State = ...;
//   State start() const;
//   StepResult<State> step(const State&, int prev_token) const;
//   int vocab_size() const; int bos() const; int eos() const;
//   bool emittable(int token) const;

#include "ftsum/corpus.hpp"
#include "ftsum/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <concepts>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ftsum::infer {

template <class State>
struct StepResult {
  Eigen::VectorXd log_probs;
  State state;
  std::optional<double> gate_mean;
};

template <class M>
concept StepModel = requires(const M& m, const typename M::State& s, int tok) {
  { m.start() } -> std::convertible_to<typename M::State>;
  { m.step(s, tok) } -> std::same_as<StepResult<typename M::State>>;
  { m.vocab_size() } -> std::convertible_to<int>;
  { m.bos() } -> std::convertible_to<int>;
  { m.eos() } -> std::convertible_to<int>;
  { m.emittable(tok) } -> std::convertible_to<bool>;
};

template <class State>
struct Hypothesis {
  Ids tokens;  // after BOS; ends with EOS unless the length cap was hit
  double log_prob = 0;
  State state{};
  bool finished = false;
  std::vector<double> gate_trace;  // per-step gate mean (gated models)

  /// Tokens without the terminating EOS.
  Ids words(int eos) const {
    Ids out = tokens;
    if (!out.empty() && out.back() == eos) out.pop_back();
    return out;
  }
};

template <StepModel M>
Hypothesis<typename M::State> greedy_decode(const M& model, int max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  Hypothesis<typename M::State> hyp;
  hyp.state = model.start();
  int prev = model.bos();
  while (!hyp.finished) {
    auto r = model.step(hyp.state, prev);
    int best = -1;
    for (int tok = 0; tok < model.vocab_size(); ++tok) {
      if (!model.emittable(tok)) continue;
      if (best < 0 || r.log_probs[tok] > r.log_probs[best]) best = tok;  // strict: lowest id wins ties
    }
    hyp.tokens.push_back(best);
    hyp.log_prob += r.log_probs[best];
    hyp.state = std::move(r.state);
    if (r.gate_mean) hyp.gate_trace.push_back(*r.gate_mean);
    hyp.finished = best == model.eos() || static_cast<int>(hyp.tokens.size()) == max_len;
    prev = best;
  }
  return hyp;
}

/// Expands every live hypothesis over the vocabulary and keeps the `beam`
/// best extensions by accumulated log-probability. Extensions ending in EOS,
/// or reaching `max_len`, retire to a finished pool; the best pooled
/// hypothesis by raw log-probability is returned. Ties go to the earlier
/// parent, then the lower token id; among finished ones, to the first retired.
template <StepModel M>
Hypothesis<typename M::State> beam_search(const M& model, int beam, int max_len) {
  using H = Hypothesis<typename M::State>;
  if (beam < 1) throw std::invalid_argument("beam must be at least 1");
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");

  struct Candidate {
    std::size_t parent;
    int token;
    double score;
  };

  std::vector<H> live(1);
  live[0].state = model.start();
  std::vector<H> pool;
  for (int t = 1; t <= max_len && !live.empty(); ++t) {
    std::vector<StepResult<typename M::State>> steps;
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const int prev = live[i].tokens.empty() ? model.bos() : live[i].tokens.back();
      steps.push_back(model.step(live[i].state, prev));
      for (int tok = 0; tok < model.vocab_size(); ++tok)
        if (model.emittable(tok)) cands.push_back({i, tok, live[i].log_prob + steps.back().log_probs[tok]});
    }
    const std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(beam));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<H> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = cands[k];
      H h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.score;
      h.state = steps[c.parent].state;
      h.gate_trace = live[c.parent].gate_trace;
      if (steps[c.parent].gate_mean) h.gate_trace.push_back(*steps[c.parent].gate_mean);
      h.finished = c.token == model.eos() || t == max_len;
      (h.finished ? pool : next).push_back(std::move(h));
    }
    live = std::move(next);
    // Scores only decrease as hypotheses grow, so a live one can no longer win.
    if (!pool.empty() && !live.empty()) {
      double best_pool = -std::numeric_limits<double>::infinity();
      for (const auto& h : pool) best_pool = std::max(best_pool, h.log_prob);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.log_prob);
      if (best_pool >= best_live) break;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (pool[i].log_prob > pool[best].log_prob) best = i;
  return pool.at(best);
}

/// Step model over a trained summarizer for one input.
class SummarizerStepModel {
 public:
  using State = Eigen::VectorXd;

  SummarizerStepModel(const model::ModelParams& params, const model::ModelConfig& cfg, std::span<const int> source_ids,
                      std::span<const int> fact_ids)
      : params_(params), cfg_(cfg), memory_(model::encode(params, source_ids, fact_ids)) {}

  State start() const { return memory_.initial_state; }

  StepResult<State> step(const State& s, int prev) const {
    auto d = model::decode_step(params_, cfg_, memory_, prev, s);
    StepResult<State> r;
    r.log_probs = nn::log_softmax(d.logits);
    r.state = std::move(d.state);
    if (d.gate.size() > 0) r.gate_mean = d.gate.mean();
    return r;
  }

  int vocab_size() const { return cfg_.target_vocab; }
  int bos() const { return kBos; }
  int eos() const { return kEos; }
  bool emittable(int tok) const { return tok != kPad && tok != kBos && tok != kSep; }

 private:
  const model::ModelParams& params_;
  const model::ModelConfig& cfg_;
  model::Memory memory_;
};

}  // namespace ftsum::infer
