#include "ftsum/eval.hpp"

#include "ftsum/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace ftsum::eval {

RougeScore make_score(double overlap, double candidate_units, double reference_units) {
  RougeScore s;
  s.precision = candidate_units > 0 ? overlap / candidate_units : 0.0;
  s.recall = reference_units > 0 ? overlap / reference_units : 0.0;
  const double sum = s.precision + s.recall;
  s.f1 = sum > 0 ? 2 * s.precision * s.recall / sum : 0.0;
  return s;
}

namespace {

std::map<std::vector<std::string>, long> ngram_counts(std::span<const std::string> tokens, int n) {
  std::map<std::vector<std::string>, long> out;
  const auto len = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + len <= tokens.size(); ++i)
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + len))];
  return out;
}

double ngram_total(std::size_t len, int n) {
  return len >= static_cast<std::size_t>(n) ? static_cast<double>(len - static_cast<std::size_t>(n) + 1) : 0.0;
}

}  // namespace

RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n) {
  if (n < 1) throw Error("rouge_n needs n >= 1");
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  long overlap = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  return make_score(static_cast<double>(overlap), ngram_total(candidate.size(), n),
                    ngram_total(reference.size(), n));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return make_score(static_cast<double>(lcs_length(candidate, reference)), static_cast<double>(candidate.size()),
                    static_cast<double>(reference.size()));
}

CorpusRouge corpus_rouge(std::span<const Tokens> candidates, std::span<const Tokens> references,
                         const RougeOptions& options) {
  if (candidates.size() != references.size())
    throw Error("candidate and reference counts differ (" + std::to_string(candidates.size()) + " vs " +
                std::to_string(references.size()) + ")");
  CorpusRouge out;
  out.pairs = candidates.size();
  if (out.pairs == 0) return out;
  auto prep = [&](const Tokens& t) {
    if (!options.stem) return t;
    Tokens s;
    for (const auto& w : t) s.push_back(porter_stem(w));
    return s;
  };
  auto add = [](RougeScore& acc, const RougeScore& s) {
    acc.precision += s.precision;
    acc.recall += s.recall;
    acc.f1 += s.f1;
  };
  for (std::size_t i = 0; i < out.pairs; ++i) {
    const auto c = prep(candidates[i]);
    const auto r = prep(references[i]);
    add(out.rouge1, rouge_n(c, r, 1));
    add(out.rouge2, rouge_n(c, r, 2));
    add(out.rougeL, rouge_l(c, r));
  }
  const auto n = static_cast<double>(out.pairs);
  for (auto* s : {&out.rouge1, &out.rouge2, &out.rougeL}) {
    s->precision /= n;
    s->recall /= n;
    s->f1 /= n;
  }
  return out;
}

double perplexity(const model::ModelParams& p, const model::ModelConfig& cfg, std::span<const Batch> dataset) {
  if (dataset.empty()) throw Error("perplexity needs a non-empty dataset");
  return std::exp(model::dataset_loss(dataset, p, cfg).loss);
}

GateReport summarize_gates(const model::GateRecorder& rec, std::size_t top_k) {
  GateReport r;
  r.mean = rec.mean;
  r.stddev = rec.stddev();
  r.components = rec.count;
  std::vector<PairGate> pairs;
  for (std::size_t i = 0; i < rec.pair_mean.size(); ++i) pairs.push_back({rec.pair_index[i], rec.pair_mean[i]});
  std::stable_sort(pairs.begin(), pairs.end(), [](const PairGate& a, const PairGate& b) { return a.mean > b.mean; });
  const std::size_t k = std::min(top_k, pairs.size());
  r.top.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(k));
  r.bottom.assign(pairs.rbegin(), pairs.rbegin() + static_cast<std::ptrdiff_t>(k));
  return r;
}

GateReport gate_report(const model::ModelParams& p, const model::ModelConfig& cfg, std::span<const Batch> dataset,
                       std::size_t top_k) {
  if (cfg.fusion != model::Fusion::Gated) throw Error("gate report needs a gated model; this one concatenates");
  if (dataset.empty()) throw Error("gate report needs a non-empty dataset");
  model::GateRecorder rec;
  model::dataset_loss(dataset, p, cfg, &rec);
  return summarize_gates(rec, top_k);
}

FaithLabel parse_faith_label(std::string_view s) {
  if (s == "FAITHFUL") return FaithLabel::Faithful;
  if (s == "FAKE") return FaithLabel::Fake;
  if (s == "UNCLEAR") return FaithLabel::Unclear;
  throw ParseError("unknown faithfulness label '" + std::string(s) + "'");
}

std::string_view to_string(FaithLabel l) {
  switch (l) {
    case FaithLabel::Faithful: return "FAITHFUL";
    case FaithLabel::Fake: return "FAKE";
    case FaithLabel::Unclear: return "UNCLEAR";
  }
  return "?";
}

long FaithTally::count(const std::string& system, FaithLabel l) const {
  auto it = counts.find(system);
  return it == counts.end() ? 0 : it->second[static_cast<std::size_t>(l)];
}

long FaithTally::total(const std::string& system) const {
  auto it = counts.find(system);
  return it == counts.end() ? 0 : std::accumulate(it->second.begin(), it->second.end(), 0L);
}

FaithTally faithfulness_tally(std::istream& in) {
  FaithTally t;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (first && cols.size() == 3 && cols[2] == "label") {
      first = false;
      continue;
    }
    first = false;
    if (cols.size() != 3)
      throw ParseError("annotation line " + std::to_string(lineno) + ": expected system_id, example_id, label");
    const auto label = parse_faith_label(cols[2]);
    auto& row = t.counts.try_emplace(cols[0], std::array<long, 3>{0, 0, 0}).first->second;
    ++row[static_cast<std::size_t>(label)];
  }
  return t;
}

}  // namespace ftsum::eval
