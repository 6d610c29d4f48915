#pragma once

#include "ftsum/corpus.hpp"
#include "ftsum/model.hpp"

#include <array>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ftsum::eval {

struct RougeScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// P = overlap / candidate units, R = overlap / reference units; zero
/// denominators give 0, and F1 = 0 when P + R = 0.
RougeScore make_score(double overlap, double candidate_units, double reference_units);

/// Clipped n-gram overlap.
RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n);
/// Plain longest-common-subsequence ROUGE-L.
RougeScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Porter (1980) suffix stripper for lowercase ASCII words.
std::string porter_stem(std::string_view word);

struct RougeOptions {
  bool stem = false;
};

struct CorpusRouge {
  std::size_t pairs = 0;
  RougeScore rouge1, rouge2, rougeL;  // macro averages of P, R and F1
};

CorpusRouge corpus_rouge(std::span<const Tokens> candidates, std::span<const Tokens> references,
                         const RougeOptions& options = {});

/// exp(per-token NLL) with dropout off.
double perplexity(const model::ModelParams& p, const model::ModelConfig& cfg, std::span<const Batch> dataset);

struct PairGate {
  std::size_t pair = 0;
  double mean = 0;
};

struct GateReport {
  double mean = 0;
  double stddev = 0;
  long components = 0;
  std::vector<PairGate> top, bottom;  // highest / lowest per-pair mean gate
};

GateReport summarize_gates(const model::GateRecorder& rec, std::size_t top_k);
/// Teacher-forced gate statistics. Throws for a concat-mode model.
GateReport gate_report(const model::ModelParams& p, const model::ModelConfig& cfg, std::span<const Batch> dataset,
                       std::size_t top_k = 100);

enum class FaithLabel { Faithful = 0, Fake = 1, Unclear = 2 };

FaithLabel parse_faith_label(std::string_view s);
std::string_view to_string(FaithLabel l);

struct FaithTally {
  std::map<std::string, std::array<long, 3>> counts;  // system -> FAITHFUL/FAKE/UNCLEAR

  long count(const std::string& system, FaithLabel l) const;
  long total(const std::string& system) const;
};

/// TSV rows "system_id<TAB>example_id<TAB>label"; blank lines and a leading
/// header row are skipped.
FaithTally faithfulness_tally(std::istream& in);

}  // namespace ftsum::eval
