#pragma once

// Fact descriptions from OpenIE relation triples and dependency parses.
//
// Triples are joined subject + predicate + object; a triple whose words are
// all covered by another triple is dropped. Dependency tuples with
// predicate-related or modifier labels are merged into connected components
// and each component is read off in sentence order. The two sources are
// combined (triple facts first), reporting-verb facts are screened out and
// the rest are joined with the separator token.

#include "ftsum/corpus.hpp"

#include <filesystem>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ftsum::factex {

struct Word {
  int index = 0;  // 1-based position in the sentence, 0 when unknown
  std::string form;

  friend bool operator==(const Word&, const Word&) = default;
};

struct Triple {
  std::vector<Word> subject, predicate, object;
};

struct DepToken {
  int index = 0;
  std::string form;
  int head = 0;  // 0 = root
  std::string label;
};

/// A validated dependency tree: 1..n indices, one root, acyclic.
class DepTree {
 public:
  explicit DepTree(std::vector<DepToken> tokens);
  const std::vector<DepToken>& tokens() const { return tokens_; }
  const DepToken& at(int index) const { return tokens_.at(static_cast<std::size_t>(index - 1)); }
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::vector<DepToken> tokens_;
};

struct DepTuple {
  Word governor;
  Word dependent;
  std::string label;
};

struct FactDesc {
  std::vector<Word> words;

  Tokens forms() const;
  std::string text() const;
};

/// Ordered facts plus the flattened token stream with separators between them.
class FactSeq {
 public:
  FactSeq() = default;
  explicit FactSeq(std::vector<FactDesc> facts);

  const std::vector<FactDesc>& facts() const { return facts_; }
  Tokens flatten() const;
  /// Facts joined by " ||| "; empty string for no facts.
  std::string text() const;

 private:
  std::vector<FactDesc> facts_;
};

using LabelSet = std::set<std::string, std::less<>>;

/// Subject/object relations, the three modifier labels, plus temporal and
/// adverbial modifiers.
LabelSet default_labels();
/// Comma-separated list, whitespace ignored.
LabelSet parse_labels(std::string_view list);

struct ReportingLexicon {
  std::set<std::string, std::less<>> lemmas{"say", "declare", "announce"};
  std::set<std::pair<std::string, std::string>> irregular{{"said", "say"}};

  /// Lemma for a form in the lexicon (suffix stripping of "s"/"ed"), nullopt otherwise.
  std::optional<std::string> lemma(std::string_view form) const;
};

std::vector<Triple> dedup_triples(const std::vector<Triple>& triples);
FactDesc triple_to_fact(const Triple& triple);

std::vector<DepTuple> extract_dep_tuples(const DepTree& tree, const LabelSet& labels);
std::vector<FactDesc> merge_tuples(const std::vector<DepTuple>& tuples);

/// Drops "somebody said"-style facts: the final word is a reporting verb and
/// nothing follows it.
std::vector<FactDesc> filter_reporting(const std::vector<FactDesc>& facts, bool enabled,
                                       const ReportingLexicon& lexicon = {});

/// Triple facts followed by the dependency facts not covered by a triple fact.
std::vector<FactDesc> combine_facts(const std::vector<FactDesc>& triple_facts,
                                    const std::vector<FactDesc>& dep_facts);
FactSeq assemble_fact_sequence(const std::vector<FactDesc>& triple_facts, const std::vector<FactDesc>& dep_facts);

struct ExtractOptions {
  LabelSet labels = default_labels();
  bool reporting_filter = true;
  ReportingLexicon lexicon;
};

/// Full per-sentence pipeline. Either input may be absent.
FactSeq extract_facts(const std::vector<Triple>& triples, const DepTree* tree, const ExtractOptions& options);

// Input formats -------------------------------------------------------------

/// CoNLL-U style: ID FORM ... HEAD DEPREL (columns 1, 2, 7, 8), or a bare
/// four-column ID FORM HEAD DEPREL layout. '#' comments and multiword/empty
/// nodes (ids with '-' or '.') are skipped. Forms are normalized.
std::vector<DepTree> read_conll(std::istream& in);

struct TripleRecord {
  long id = 0;
  std::vector<Triple> triples;
};

/// JSON lines: {"id": n, "triples": [{"subject": [...], "predicate": [...], "object": [...]}]}.
/// Tokens are strings or {"form"|"text": s, "index": i}.
std::vector<TripleRecord> read_triples_jsonl(std::istream& in);

}  // namespace ftsum::factex
