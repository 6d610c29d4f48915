#include "ftsum/model.hpp"

#include "ftsum/error.hpp"
#include "ftsum/rng.hpp"

#include <cmath>
#include <sstream>

namespace ftsum::model {

using nn::GruCache;
using nn::GruParams;

Fusion parse_fusion(std::string_view name) {
  if (name == "gated") return Fusion::Gated;
  if (name == "concat") return Fusion::Concat;
  throw Error("unknown fusion mode '" + std::string(name) + "' (expected gated or concat)");
}

std::string to_string(Fusion f) { return f == Fusion::Gated ? "gated" : "concat"; }

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw Error("model dimensions must be positive");
  if (source_vocab <= kNumSpecials || target_vocab <= kNumSpecials)
    throw Error("vocabularies must contain at least one non-special token");
  if (dropout < 0 || dropout >= 1) throw Error("dropout must lie in [0, 1)");
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = cfg.embed_dim, h = cfg.hidden_dim, c = cfg.context_dim();
  ModelParams p;
  p.source_embed = Mat::Zero(cfg.source_vocab, d);
  p.target_embed = Mat::Zero(cfg.target_vocab, d);
  p.sent_fwd = p.sent_bwd = p.fact_fwd = p.fact_bwd = GruParams::zeros(d, h);
  p.init_W = Mat::Zero(h, 2 * h);
  p.init_b = Vec::Zero(h);
  p.sent_attn = p.fact_attn = nn::AttentionParams::zeros(h, 2 * h, h);
  if (cfg.fusion == Fusion::Gated) {
    p.gate_W = Mat::Zero(2 * h, 4 * h);
    p.gate_b = Vec::Zero(2 * h);
  }
  p.decoder = GruParams::zeros(d + c, h);
  p.readout_word = Mat::Zero(d, d);
  p.readout_context = Mat::Zero(d, c);
  p.readout_state = Mat::Zero(d, h);
  p.output_W = Mat::Zero(cfg.target_vocab, d);
  p.output_b = Vec::Zero(cfg.target_vocab);
  return p;
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  ModelParams p = zeros(cfg);
  // Matrices in visit order; vectors (biases) stay zero except the attention v.
  visit(p, [&](const std::string& name, auto& t) {
    if (t.cols() > 1 || name.ends_with(".v")) {
      Mat m = nn::glorot_uniform(t.rows(), t.cols(), rng);
      t = m;
    }
  });
  return p;
}

std::vector<std::uint8_t> boundary_indicators(std::span<const int> fact_ids) {
  std::vector<std::uint8_t> g(fact_ids.size());
  for (std::size_t i = 0; i < fact_ids.size(); ++i) g[i] = fact_ids[i] == kSep ? 0 : 1;
  return g;
}

namespace {

Vec embed_row(const Mat& table, int id) {
  if (id < 0 || id >= table.rows()) throw ShapeError("token id " + std::to_string(id) + " out of range");
  return table.row(id).transpose();
}

// BiGRU with state reset wherever gamma is 0. Positions with gamma 0 are not
// run through the cell at all: their stored output is the zero vector and the
// next cell starts from zero.
Encoded run_bigru(const Mat& embed, const GruParams& fwd, const GruParams& bwd, std::span<const int> ids,
                  std::span<const std::uint8_t> gamma) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  const Eigen::Index h = fwd.hidden_dim();
  Encoded e;
  e.ids.assign(ids.begin(), ids.end());
  e.gamma.assign(gamma.begin(), gamma.end());
  e.mask.assign(gamma.begin(), gamma.end());
  e.states = Mat::Zero(2 * h, n);
  e.fwd_cache.resize(static_cast<std::size_t>(n));
  e.bwd_cache.resize(static_cast<std::size_t>(n));
  std::vector<Vec> inputs(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    if (gamma[static_cast<std::size_t>(i)]) inputs[static_cast<std::size_t>(i)] = embed_row(embed, ids[static_cast<std::size_t>(i)]);

  Vec state = Vec::Zero(h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!gamma[k]) {
      state.setZero();
      continue;
    }
    state = nn::gru_cell(inputs[k], state, fwd, &e.fwd_cache[k]);
    e.states.col(i).head(h) = state;
  }
  state.setZero();
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const auto k = static_cast<std::size_t>(i);
    if (!gamma[k]) {
      state.setZero();
      continue;
    }
    state = nn::gru_cell(inputs[k], state, bwd, &e.bwd_cache[k]);
    e.states.col(i).tail(h) = state;
  }
  return e;
}

// Backward of run_bigru given d(states); embedding gradients go to `dembed`.
void bigru_backward(const Encoded& e, const GruParams& fwd, const GruParams& bwd, const Mat& dstates,
                    GruParams& gfwd, GruParams& gbwd, Mat& dembed) {
  const Eigen::Index n = e.length();
  const Eigen::Index h = fwd.hidden_dim();
  Vec carry = Vec::Zero(h);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const auto k = static_cast<std::size_t>(i);
    if (!e.gamma[k]) {
      carry.setZero();
      continue;
    }
    Vec dh = dstates.col(i).head(h) + carry;
    auto g = nn::gru_cell_backward(fwd, e.fwd_cache[k], dh, gfwd);
    dembed.row(e.ids[k]) += g.dx.transpose();
    carry = std::move(g.dh_prev);
  }
  carry.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!e.gamma[k]) {
      carry.setZero();
      continue;
    }
    Vec dh = dstates.col(i).tail(h) + carry;
    auto g = nn::gru_cell_backward(bwd, e.bwd_cache[k], dh, gbwd);
    dembed.row(e.ids[k]) += g.dx.transpose();
    carry = std::move(g.dh_prev);
  }
}

Vec initial_state_input(const Encoded& sentence, Eigen::Index h) {
  Vec in(2 * h);
  in.head(h) = sentence.states.col(sentence.length() - 1).head(h);
  in.tail(h) = sentence.states.col(0).tail(h);
  return in;
}

bool any_unmasked(const nn::Mask& m) {
  for (auto v : m)
    if (v) return true;
  return false;
}

struct StepCache {
  int y_prev = 0;
  Vec emb, s_prev;
  Mat sent_hidden, fact_hidden;
  Vec sent_w, fact_w;
  Vec cx, cr, gate, context;
  GruCache gru;
  Vec readout_mask;  // empty when no dropout
  Vec readout;       // after dropout
  Vec probs;
};

struct AttendOut {
  Vec weights, context;
};

AttendOut attend_memory(const Vec& s_prev, const Mat& states, const Mat& keys, const nn::Mask& mask,
                        const nn::AttentionParams& p, Mat* hidden) {
  AttendOut out;
  const Eigen::Index dim = states.rows();
  if (states.cols() == 0 || !any_unmasked(mask)) {
    out.weights = Vec::Zero(states.cols());
    out.context = Vec::Zero(dim);
    if (hidden) *hidden = Mat();
    return out;
  }
  Vec scores = nn::attention_scores(s_prev, keys, p, hidden);
  out.weights = nn::masked_softmax(scores, mask);
  out.context = states * out.weights;
  return out;
}

DecoderStep step_forward(const ModelParams& p, const ModelConfig& cfg, const Memory& m, int y_prev,
                         const Vec& s_prev, StepCache* cache, Rng* dropout_rng) {
  DecoderStep out;
  Vec emb = embed_row(p.target_embed, y_prev);
  Mat sent_hidden, fact_hidden;
  auto ax = attend_memory(s_prev, m.sentence_states, m.sentence_keys, m.sentence.mask, p.sent_attn,
                          cache ? &sent_hidden : nullptr);
  auto ar = attend_memory(s_prev, m.fact_states, m.fact_keys, m.facts.mask, p.fact_attn,
                          cache ? &fact_hidden : nullptr);
  auto fused = combine_contexts(ax.context, ar.context, cfg.fusion, p.gate_W, p.gate_b);

  Vec gru_in(emb.size() + fused.context.size());
  gru_in << emb, fused.context;
  GruCache gc;
  out.state = nn::gru_cell(gru_in, s_prev, p.decoder, cache ? &gc : nullptr);

  Vec readout = p.readout_word * emb + p.readout_context * fused.context + p.readout_state * out.state;
  Vec rmask;
  if (dropout_rng && cfg.dropout > 0) {
    rmask = nn::dropout_mask(readout.size(), cfg.dropout, *dropout_rng);
    readout = readout.cwiseProduct(rmask);
  }
  out.logits = p.output_W * readout + p.output_b;
  out.probs = nn::softmax(out.logits);
  out.context = fused.context;
  out.gate = fused.gate;
  out.sentence_weights = ax.weights;
  out.fact_weights = ar.weights;
  if (cache) {
    cache->y_prev = y_prev;
    cache->emb = std::move(emb);
    cache->s_prev = s_prev;
    cache->sent_hidden = std::move(sent_hidden);
    cache->fact_hidden = std::move(fact_hidden);
    cache->sent_w = std::move(ax.weights);
    cache->fact_w = std::move(ar.weights);
    cache->cx = std::move(ax.context);
    cache->cr = std::move(ar.context);
    cache->gate = fused.gate;
    cache->context = fused.context;
    cache->gru = std::move(gc);
    cache->readout_mask = std::move(rmask);
    cache->readout = std::move(readout);
    cache->probs = out.probs;
  }
  return out;
}

Memory build_memory(const ModelParams& p, std::span<const int> source_ids, std::span<const int> fact_ids,
                    Rng* dropout_rng, double dropout, Mat* sent_mask, Mat* fact_mask) {
  Memory m;
  m.sentence = encode_sentence(p, source_ids);
  const auto gamma = boundary_indicators(fact_ids);
  m.facts = encode_facts(p, fact_ids, gamma);
  const Eigen::Index h = p.init_W.rows();
  m.initial_state = (p.init_W * initial_state_input(m.sentence, h) + p.init_b).array().tanh().matrix();
  m.sentence_states = m.sentence.states;
  m.fact_states = m.facts.states;
  if (dropout_rng && dropout > 0) {
    *sent_mask = nn::dropout_mask(m.sentence_states.rows(), m.sentence_states.cols(), dropout, *dropout_rng);
    *fact_mask = nn::dropout_mask(m.fact_states.rows(), m.fact_states.cols(), dropout, *dropout_rng);
    m.sentence_states = m.sentence_states.cwiseProduct(*sent_mask);
    m.fact_states = m.fact_states.cwiseProduct(*fact_mask);
  }
  m.sentence_keys = p.sent_attn.Wk * m.sentence_states;
  m.fact_keys = p.fact_attn.Wk * m.fact_states;
  return m;
}

// Gradient of one attention read given d(context); accumulates into the
// attended-state and projected-key gradients and returns d(s_prev).
Vec attend_backward(const Vec& s_prev, const Mat& states, const Mat& hidden, const Vec& weights,
                    const nn::AttentionParams& p, const Vec& dcontext, nn::AttentionParams& g, Mat& dstates,
                    Mat& dkeys) {
  if (hidden.size() == 0) return Vec::Zero(s_prev.size());
  dstates.noalias() += dcontext * weights.transpose();
  const Vec dweights = states.transpose() * dcontext;
  const Vec dscores = nn::masked_softmax_backward(weights, dweights);
  return nn::attention_scores_backward(s_prev, hidden, p, dscores, g, dkeys);
}

// Forward and (optionally) backward over one pair; returns the summed NLL.
double pair_loss(const ModelParams& p, const ModelConfig& cfg, std::span<const int> source_ids,
                 std::span<const int> fact_ids, std::span<const int> target_ids, double grad_scale,
                 Rng* dropout_rng, ModelParams* grads, std::vector<double>* gate_components) {
  const Eigen::Index h = cfg.hidden_dim;
  Mat sent_mask, fact_mask;
  Memory m = build_memory(p, source_ids, fact_ids, dropout_rng, cfg.dropout, &sent_mask, &fact_mask);

  const std::size_t steps = target_ids.size() - 1;
  std::vector<StepCache> caches(grads ? steps : 0);
  double nll = 0;
  Vec s = m.initial_state;
  for (std::size_t t = 0; t < steps; ++t) {
    auto out = step_forward(p, cfg, m, target_ids[t], s, grads ? &caches[t] : nullptr, dropout_rng);
    const int gold = target_ids[t + 1];
    if (gold < 0 || gold >= out.probs.size()) throw ShapeError("target id out of range");
    nll -= nn::log_softmax(out.logits)[gold];
    if (gate_components) gate_components->insert(gate_components->end(), out.gate.data(), out.gate.data() + out.gate.size());
    s = std::move(out.state);
  }
  if (!grads) return nll;

  ModelParams& g = *grads;
  Mat d_sent_states = Mat::Zero(m.sentence_states.rows(), m.sentence_states.cols());
  Mat d_fact_states = Mat::Zero(m.fact_states.rows(), m.fact_states.cols());
  Mat d_sent_keys = Mat::Zero(m.sentence_keys.rows(), m.sentence_keys.cols());
  Mat d_fact_keys = Mat::Zero(m.fact_keys.rows(), m.fact_keys.cols());
  const Eigen::Index d = cfg.embed_dim;

  Vec ds = Vec::Zero(h);  // gradient w.r.t. the state produced at step t
  for (std::size_t t = steps; t-- > 0;) {
    const StepCache& c = caches[t];
    Vec dlogits = c.probs;
    dlogits[target_ids[t + 1]] -= 1.0;
    dlogits *= grad_scale;
    g.output_W.noalias() += dlogits * c.readout.transpose();
    g.output_b += dlogits;
    Vec dreadout = p.output_W.transpose() * dlogits;
    if (c.readout_mask.size() > 0) dreadout = dreadout.cwiseProduct(c.readout_mask);

    g.readout_word.noalias() += dreadout * c.emb.transpose();
    g.readout_context.noalias() += dreadout * c.context.transpose();
    g.readout_state.noalias() += dreadout * c.gru.h.transpose();
    Vec demb = p.readout_word.transpose() * dreadout;
    Vec dcontext = p.readout_context.transpose() * dreadout;
    ds.noalias() += p.readout_state.transpose() * dreadout;

    auto gi = nn::gru_cell_backward(p.decoder, c.gru, ds, g.decoder);
    demb += gi.dx.head(d);
    dcontext += gi.dx.tail(gi.dx.size() - d);
    Vec ds_prev = std::move(gi.dh_prev);

    Vec dcx, dcr;
    if (cfg.fusion == Fusion::Concat) {
      dcx = dcontext.head(2 * h);
      dcr = dcontext.tail(2 * h);
    } else {
      const Vec one_minus = Vec::Ones(c.gate.size()) - c.gate;
      const Vec dgate = dcontext.cwiseProduct(c.cx - c.cr);
      dcx = dcontext.cwiseProduct(c.gate);
      dcr = dcontext.cwiseProduct(one_minus);
      const Vec da = dgate.cwiseProduct(c.gate.cwiseProduct(one_minus));
      Vec both(4 * h);
      both << c.cx, c.cr;
      g.gate_W.noalias() += da * both.transpose();
      g.gate_b += da;
      const Vec dboth = p.gate_W.transpose() * da;
      dcx += dboth.head(2 * h);
      dcr += dboth.tail(2 * h);
    }
    ds_prev += attend_backward(c.s_prev, m.sentence_states, c.sent_hidden, c.sent_w, p.sent_attn, dcx,
                               g.sent_attn, d_sent_states, d_sent_keys);
    ds_prev += attend_backward(c.s_prev, m.fact_states, c.fact_hidden, c.fact_w, p.fact_attn, dcr, g.fact_attn,
                               d_fact_states, d_fact_keys);
    g.target_embed.row(c.y_prev) += demb.transpose();
    ds = std::move(ds_prev);
  }

  // Keys were Wk applied to the attended states.
  g.sent_attn.Wk.noalias() += d_sent_keys * m.sentence_states.transpose();
  d_sent_states.noalias() += p.sent_attn.Wk.transpose() * d_sent_keys;
  g.fact_attn.Wk.noalias() += d_fact_keys * m.fact_states.transpose();
  d_fact_states.noalias() += p.fact_attn.Wk.transpose() * d_fact_keys;
  if (sent_mask.size() > 0) {
    d_sent_states = d_sent_states.cwiseProduct(sent_mask);
    d_fact_states = d_fact_states.cwiseProduct(fact_mask);
  }

  // s0 = tanh(W0 [fwd_last; bwd_first] + b0)
  const Vec da0 = ds.cwiseProduct(Vec::Ones(h) - m.initial_state.cwiseProduct(m.initial_state));
  g.init_W.noalias() += da0 * initial_state_input(m.sentence, h).transpose();
  g.init_b += da0;
  const Vec din = p.init_W.transpose() * da0;
  d_sent_states.col(m.sentence.length() - 1).head(h) += din.head(h);
  d_sent_states.col(0).tail(h) += din.tail(h);

  bigru_backward(m.sentence, p.sent_fwd, p.sent_bwd, d_sent_states, g.sent_fwd, g.sent_bwd, g.source_embed);
  bigru_backward(m.facts, p.fact_fwd, p.fact_bwd, d_fact_states, g.fact_fwd, g.fact_bwd, g.source_embed);
  return nll;
}

}  // namespace

EncodedSource encode_sentence(const ModelParams& p, std::span<const int> ids) {
  if (ids.empty()) throw Error("cannot encode an empty sentence");
  std::vector<std::uint8_t> ones(ids.size(), 1);
  return run_bigru(p.source_embed, p.sent_fwd, p.sent_bwd, ids, ones);
}

EncodedFacts encode_facts(const ModelParams& p, std::span<const int> ids, std::span<const std::uint8_t> gamma) {
  if (gamma.size() != ids.size()) throw ShapeError("boundary indicators and fact ids differ in length");
  for (std::size_t i = 0; i < ids.size(); ++i)
    if ((gamma[i] == 0) != (ids[i] == kSep))
      throw ShapeError("boundary indicator at position " + std::to_string(i) + " disagrees with the separator");
  return run_bigru(p.source_embed, p.fact_fwd, p.fact_bwd, ids, gamma);
}

Attention attend(const Vec& s_prev, const Encoded& enc, const nn::AttentionParams& p) {
  const Mat keys = p.Wk * enc.states;
  auto a = attend_memory(s_prev, enc.states, keys, enc.mask, p, nullptr);
  return {std::move(a.weights), std::move(a.context)};
}

Fused combine_contexts(const Vec& cx, const Vec& cr, Fusion mode, const Mat& gate_W, const Vec& gate_b) {
  if (cx.size() != cr.size()) throw ShapeError("context vectors differ in size");
  Fused out;
  Vec both(cx.size() + cr.size());
  both << cx, cr;
  switch (mode) {
    case Fusion::Concat:
      out.context = std::move(both);
      return out;
    case Fusion::Gated: {
      if (gate_W.rows() != cx.size() || gate_W.cols() != both.size())
        throw ShapeError("gate weights do not match the context size");
      out.gate = (gate_W * both + gate_b).unaryExpr([](double x) { return nn::sigmoid(x); });
      out.context = out.gate.cwiseProduct(cx) + (Vec::Ones(cx.size()) - out.gate).cwiseProduct(cr);
      return out;
    }
  }
  throw Error("unknown fusion mode");
}

Memory encode(const ModelParams& p, std::span<const int> source_ids, std::span<const int> fact_ids) {
  return build_memory(p, source_ids, fact_ids, nullptr, 0.0, nullptr, nullptr);
}

DecoderStep decode_step(const ModelParams& p, const ModelConfig& cfg, const Memory& memory, int y_prev,
                        const Vec& s_prev) {
  return step_forward(p, cfg, memory, y_prev, s_prev, nullptr, nullptr);
}

void GateRecorder::add_pair(std::size_t index, std::span<const double> components) {
  if (components.empty()) return;
  double sum = 0;
  for (double x : components) {
    sum += x;
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  pair_index.push_back(index);
  pair_mean.push_back(sum / static_cast<double>(components.size()));
}

LossResult batch_loss(const Batch& batch, const ModelParams& p, const ModelConfig& cfg, const LossOptions& opt) {
  if (opt.gates && cfg.fusion != Fusion::Gated) throw Error("gate statistics need a gated model");
  Rng* rng = opt.train && cfg.dropout > 0 ? opt.rng : nullptr;
  if (opt.train && cfg.dropout > 0 && !rng) throw Error("training-mode loss needs a random source for dropout");

  std::vector<Ids> src, facts, tgt;
  long tokens = 0;
  for (Eigen::Index r = 0; r < batch.size(); ++r) {
    src.push_back(batch.source_row(r));
    facts.push_back(batch.fact_row(r));
    tgt.push_back(batch.target_row(r));
    if (tgt.back().size() < 2) throw Error("target row needs at least BOS and one token");
    tokens += static_cast<long>(tgt.back().size()) - 1;
  }
  LossResult res;
  res.tokens = tokens;
  const double scale = tokens > 0 ? 1.0 / static_cast<double>(tokens) : 0.0;
  std::vector<double> gates;
  for (std::size_t r = 0; r < src.size(); ++r) {
    gates.clear();
    res.nll += pair_loss(p, cfg, src[r], facts[r], tgt[r], scale, rng, opt.grads, opt.gates ? &gates : nullptr);
    if (opt.gates) {
      const std::size_t index = r < batch.pair_index.size() ? batch.pair_index[r] : r;
      opt.gates->add_pair(index, gates);
    }
  }
  res.loss = res.nll * scale;
  if (!std::isfinite(res.loss)) throw NumericError("non-finite loss");
  return res;
}

LossResult dataset_loss(std::span<const Batch> batches, const ModelParams& p, const ModelConfig& cfg,
                        GateRecorder* gates) {
  LossResult total;
  for (const auto& b : batches) {
    LossOptions opt;
    opt.gates = gates;
    auto r = batch_loss(b, p, cfg, opt);
    total.nll += r.nll;
    total.tokens += r.tokens;
  }
  if (total.tokens == 0) throw Error("dataset has no target tokens");
  total.loss = total.nll / static_cast<double>(total.tokens);
  return total;
}

Checkpoint to_checkpoint(const ModelParams& p, const ModelConfig& cfg, Precision precision) {
  Checkpoint ck;
  ck.metadata["embed_dim"] = std::to_string(cfg.embed_dim);
  ck.metadata["hidden_dim"] = std::to_string(cfg.hidden_dim);
  ck.metadata["fusion"] = to_string(cfg.fusion);
  ck.metadata["source_vocab"] = std::to_string(cfg.source_vocab);
  ck.metadata["target_vocab"] = std::to_string(cfg.target_vocab);
  {
    std::ostringstream os;
    os.precision(17);
    os << cfg.dropout;
    ck.metadata["dropout"] = os.str();
  }
  for (const auto& v : nn::views_of(p)) {
    CheckpointEntry e;
    e.name = v.name;
    e.shape = {static_cast<std::uint64_t>(v.rows), static_cast<std::uint64_t>(v.cols)};
    e.precision = precision;
    e.values.reserve(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
      e.values.push_back(precision == Precision::F32 ? static_cast<double>(static_cast<float>(v.data[i])) : v.data[i]);
    ck.entries.push_back(std::move(e));
  }
  return ck;
}

namespace {

int meta_int(const Checkpoint& ck, const std::string& key) {
  auto it = ck.metadata.find(key);
  if (it == ck.metadata.end()) throw ParseError("checkpoint metadata lacks '" + key + "'");
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ParseError("checkpoint metadata '" + key + "' is not an integer");
  }
}

}  // namespace

ModelConfig config_from_checkpoint(const Checkpoint& ck) {
  ModelConfig cfg;
  cfg.embed_dim = meta_int(ck, "embed_dim");
  cfg.hidden_dim = meta_int(ck, "hidden_dim");
  cfg.source_vocab = meta_int(ck, "source_vocab");
  cfg.target_vocab = meta_int(ck, "target_vocab");
  auto f = ck.metadata.find("fusion");
  if (f == ck.metadata.end()) throw ParseError("checkpoint metadata lacks 'fusion'");
  cfg.fusion = parse_fusion(f->second);
  if (auto dp = ck.metadata.find("dropout"); dp != ck.metadata.end()) cfg.dropout = std::stod(dp->second);
  cfg.validate();
  return cfg;
}

ModelParams params_from_checkpoint(const Checkpoint& ck, const ModelConfig& cfg) {
  ModelParams p = ModelParams::zeros(cfg);
  for (const auto& v : nn::views_of(p)) {
    const auto& e = ck.entry(v.name);
    if (e.shape.size() != 2 || e.shape[0] != static_cast<std::uint64_t>(v.rows) ||
        e.shape[1] != static_cast<std::uint64_t>(v.cols))
      throw ShapeError("checkpoint entry '" + v.name + "' has the wrong shape");
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data[i] = e.values[static_cast<std::size_t>(i)];
  }
  return p;
}

}  // namespace ftsum::model
