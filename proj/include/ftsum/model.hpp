#pragma once

// Fact-aware dual-attention encoder-decoder.
//
// Two BiGRU encoders read the sentence and the separator-joined fact
// descriptions. The fact encoder zeroes its carried state at every separator
// (in both directions), so every description is encoded from a zero state
// independently of its neighbours. At each decoding step the previous decoder
// state queries both encoders with additive attention; the two contexts are
// either concatenated or mixed by an elementwise sigmoid gate
//
//   g = σ(Wg [cx; cr] + bg),   c = g ⊙ cx + (1 - g) ⊙ cr,
//
// the decoder GRU reads [embed(y_prev); c], and the next-word distribution is
// softmax(Wo (Ww embed(y_prev) + Wc c + Ws s) + bo).

#include "ftsum/checkpoint.hpp"
#include "ftsum/corpus.hpp"
#include "ftsum/nn.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ftsum::model {

using nn::Mat;
using nn::Vec;

enum class Fusion { Concat, Gated };

Fusion parse_fusion(std::string_view name);
std::string to_string(Fusion f);

struct ModelConfig {
  int embed_dim = 200;
  int hidden_dim = 400;
  Fusion fusion = Fusion::Gated;
  int source_vocab = 0;
  int target_vocab = 0;
  double dropout = 0.5;

  /// Width of the fused context: 4·hidden when concatenated, 2·hidden when gated.
  int context_dim() const { return fusion == Fusion::Concat ? 4 * hidden_dim : 2 * hidden_dim; }
  void validate() const;
};

struct ModelParams {
  Mat source_embed;  // shared by the sentence and fact encoders
  Mat target_embed;
  nn::GruParams sent_fwd, sent_bwd, fact_fwd, fact_bwd;
  Mat init_W;  // s0 = tanh(init_W [fwd_last; bwd_first] + init_b)
  Vec init_b;
  nn::AttentionParams sent_attn, fact_attn;
  Mat gate_W;  // empty in concat mode
  Vec gate_b;
  nn::GruParams decoder;
  Mat readout_word, readout_context, readout_state;
  Mat output_W;
  Vec output_b;

  static ModelParams zeros(const ModelConfig& cfg);
  /// Uniform Glorot weights, zero biases.
  static ModelParams init(const ModelConfig& cfg, Rng& rng);

  template <class Self, class F>
  static void visit(Self& p, F&& f) {
    auto nested = [&](const std::string& prefix, auto& sub) {
      std::remove_cvref_t<decltype(sub)>::visit(sub, [&](const std::string& n, auto& t) { f(prefix + "." + n, t); });
    };
    f("source_embed", p.source_embed);
    f("target_embed", p.target_embed);
    nested("sent_fwd", p.sent_fwd);
    nested("sent_bwd", p.sent_bwd);
    nested("fact_fwd", p.fact_fwd);
    nested("fact_bwd", p.fact_bwd);
    f("init.W", p.init_W);
    f("init.b", p.init_b);
    nested("sent_attn", p.sent_attn);
    nested("fact_attn", p.fact_attn);
    f("gate.W", p.gate_W);
    f("gate.b", p.gate_b);
    nested("decoder", p.decoder);
    f("readout.word", p.readout_word);
    f("readout.context", p.readout_context);
    f("readout.state", p.readout_state);
    f("output.W", p.output_W);
    f("output.b", p.output_b);
  }
};

/// BiGRU states of one sequence, column i = [forward_i; backward_i].
struct Encoded {
  Ids ids;
  Mat states;
  nn::Mask mask;              // attention mask; 0 at separators
  std::vector<std::uint8_t> gamma;  // 0 at separators
  std::vector<nn::GruCache> fwd_cache, bwd_cache;

  Eigen::Index length() const { return states.cols(); }
};
using EncodedSource = Encoded;
using EncodedFacts = Encoded;

/// 0 at separator positions, 1 elsewhere.
std::vector<std::uint8_t> boundary_indicators(std::span<const int> fact_ids);

/// Throws on an empty sequence.
EncodedSource encode_sentence(const ModelParams& p, std::span<const int> ids);
/// `gamma` must be 0 exactly where `ids` holds the separator.
EncodedFacts encode_facts(const ModelParams& p, std::span<const int> ids, std::span<const std::uint8_t> gamma);

struct Attention {
  Vec weights;
  Vec context;  // zero when every position is masked
};
Attention attend(const Vec& s_prev, const Encoded& enc, const nn::AttentionParams& p);

struct Fused {
  Vec context;
  Vec gate;  // empty in concat mode
};
Fused combine_contexts(const Vec& cx, const Vec& cr, Fusion mode, const Mat& gate_W, const Vec& gate_b);

/// Everything the decoder reads from the inputs, computed once per example.
struct Memory {
  EncodedSource sentence;
  EncodedFacts facts;
  Mat sentence_states, fact_states;  // attended states (after dropout when training)
  Mat sentence_keys, fact_keys;      // Wk applied to the attended states
  Vec initial_state;
};

Memory encode(const ModelParams& p, std::span<const int> source_ids, std::span<const int> fact_ids);

struct DecoderStep {
  Vec state;
  Vec context;
  Vec gate;  // gated mode only
  Vec sentence_weights, fact_weights;
  Vec logits;
  Vec probs;
};

DecoderStep decode_step(const ModelParams& p, const ModelConfig& cfg, const Memory& memory, int y_prev,
                        const Vec& s_prev);

/// Streaming mean / standard deviation of gate components plus per-pair means.
struct GateRecorder {
  long count = 0;
  double mean = 0;
  double m2 = 0;
  std::vector<std::size_t> pair_index;
  std::vector<double> pair_mean;

  void add_pair(std::size_t index, std::span<const double> components);
  double stddev() const { return count > 0 ? std::sqrt(m2 / static_cast<double>(count)) : 0.0; }
};

struct LossResult {
  double loss = 0;  // nll / tokens
  double nll = 0;
  long tokens = 0;
};

struct LossOptions {
  bool train = false;             // dropout on
  Rng* rng = nullptr;             // required when train is set and dropout > 0
  ModelParams* grads = nullptr;   // gradients of `loss` are accumulated here
  GateRecorder* gates = nullptr;  // gated mode only
};

/// Teacher-forced per-token NLL over one batch.
LossResult batch_loss(const Batch& batch, const ModelParams& p, const ModelConfig& cfg,
                      const LossOptions& options = {});

/// Per-token NLL over several batches (no dropout, no gradients).
LossResult dataset_loss(std::span<const Batch> batches, const ModelParams& p, const ModelConfig& cfg,
                        GateRecorder* gates = nullptr);

Checkpoint to_checkpoint(const ModelParams& p, const ModelConfig& cfg, Precision precision = Precision::F32);
ModelConfig config_from_checkpoint(const Checkpoint& ckpt);
ModelParams params_from_checkpoint(const Checkpoint& ckpt, const ModelConfig& cfg);

}  // namespace ftsum::model
