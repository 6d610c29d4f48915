#include "ftsum/factex.hpp"

#include "ftsum/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace ftsum::factex {

namespace {

using Multiset = std::map<std::string, int>;

Multiset word_multiset(const std::vector<Word>& words) {
  Multiset m;
  for (const auto& w : words) ++m[w.form];
  return m;
}

Multiset word_multiset(const Triple& t) {
  Multiset m;
  for (const auto* part : {&t.subject, &t.predicate, &t.object})
    for (const auto& w : *part) ++m[w.form];
  return m;
}

// a ⊆ b as multisets.
bool covered_by(const Multiset& a, const Multiset& b) {
  for (const auto& [word, n] : a) {
    auto it = b.find(word);
    if (it == b.end() || it->second < n) return false;
  }
  return true;
}

int parse_int(const std::string& s, std::size_t lineno, const char* what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(lineno) + ": bad " + what + " '" + s + "'");
  }
}

}  // namespace

DepTree::DepTree(std::vector<DepToken> tokens) : tokens_(std::move(tokens)) {
  const int n = size();
  if (n == 0) throw ParseError("empty dependency tree");
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const auto& t = tokens_[static_cast<std::size_t>(i)];
    if (t.index != i + 1) throw ParseError("dependency token ids must run 1..n");
    if (t.head < 0 || t.head > n) throw ParseError("head " + std::to_string(t.head) + " out of range");
    if (t.head == t.index) throw ParseError("token " + std::to_string(t.index) + " is its own head");
    roots += t.head == 0;
  }
  if (roots != 1) throw ParseError("dependency tree must have exactly one root, found " + std::to_string(roots));
  // Every chain of heads must reach the root within n steps.
  for (int i = 1; i <= n; ++i) {
    int cur = i;
    for (int steps = 0; cur != 0; ++steps) {
      if (steps > n) throw ParseError("dependency tree contains a cycle");
      cur = at(cur).head;
    }
  }
}

Tokens FactDesc::forms() const {
  Tokens out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(w.form);
  return out;
}

std::string FactDesc::text() const {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w.form;
  }
  return out;
}

FactSeq::FactSeq(std::vector<FactDesc> facts) : facts_(std::move(facts)) {
  for (const auto& f : facts_)
    if (f.words.empty()) throw Error("fact descriptions must be non-empty");
}

Tokens FactSeq::flatten() const {
  Tokens out;
  for (std::size_t i = 0; i < facts_.size(); ++i) {
    if (i > 0) out.emplace_back(kSepToken);
    for (const auto& w : facts_[i].words) out.push_back(w.form);
  }
  return out;
}

std::string FactSeq::text() const {
  std::string out;
  for (const auto& t : flatten()) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

LabelSet default_labels() {
  return {"nsubj", "nsubjpass", "csubj", "csubjpass", "dobj", "amod", "nummod", "compound",
          "advmod", "nmod:tmod", "obl:tmod"};
}

LabelSet parse_labels(std::string_view list) {
  LabelSet out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    auto item = list.substr(start, end - start);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (!item.empty()) out.emplace(item);
    start = end + 1;
  }
  return out;
}

std::optional<std::string> ReportingLexicon::lemma(std::string_view form) const {
  for (const auto& [surface, base] : irregular)
    if (surface == form) return base;
  if (lemmas.count(form)) return std::string(form);
  auto strip = [&](std::size_t n) -> std::optional<std::string> {
    if (form.size() <= n) return std::nullopt;
    auto base = form.substr(0, form.size() - n);
    if (lemmas.count(base)) return std::string(base);
    return std::nullopt;
  };
  if (form.ends_with("s"))
    if (auto l = strip(1)) return l;
  if (form.ends_with("ed")) {
    if (auto l = strip(1)) return l;  // declared -> declare
    if (auto l = strip(2)) return l;
  }
  return std::nullopt;
}

std::vector<Triple> dedup_triples(const std::vector<Triple>& triples) {
  std::vector<Multiset> sets;
  sets.reserve(triples.size());
  for (const auto& t : triples) sets.push_back(word_multiset(t));

  std::vector<Triple> out;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    bool removed = false;
    for (std::size_t j = 0; j < triples.size() && !removed; ++j) {
      if (i == j || !covered_by(sets[i], sets[j])) continue;
      // Equal multisets: the earlier triple survives.
      removed = sets[i] != sets[j] || j < i;
    }
    if (!removed) out.push_back(triples[i]);
  }
  return out;
}

FactDesc triple_to_fact(const Triple& triple) {
  FactDesc f;
  for (const auto* part : {&triple.subject, &triple.predicate, &triple.object})
    f.words.insert(f.words.end(), part->begin(), part->end());
  bool ascending = true;
  for (std::size_t i = 0; i < f.words.size() && ascending; ++i)
    ascending = f.words[i].index > 0 && (i == 0 || f.words[i].index > f.words[i - 1].index);
  if (!ascending)
    for (std::size_t i = 0; i < f.words.size(); ++i) f.words[i].index = static_cast<int>(i) + 1;
  return f;
}

std::vector<DepTuple> extract_dep_tuples(const DepTree& tree, const LabelSet& labels) {
  std::vector<DepTuple> out;
  for (const auto& t : tree.tokens()) {
    if (t.head == 0 || !labels.count(t.label)) continue;
    const auto& gov = tree.at(t.head);
    out.push_back({Word{gov.index, gov.form}, Word{t.index, t.form}, t.label});
  }
  return out;
}

std::vector<FactDesc> merge_tuples(const std::vector<DepTuple>& tuples) {
  // Union-find over token indices; each tuple links its two tokens, so two
  // tuples sharing a token end up in the same component.
  std::map<int, int> parent;
  std::map<int, std::string> form;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& t : tuples) {
    for (const auto& w : {t.governor, t.dependent}) {
      if (parent.emplace(w.index, w.index).second) form[w.index] = w.form;
    }
    int a = find(t.governor.index), b = find(t.dependent.index);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<int, std::vector<int>> components;  // keyed by root = smallest index
  for (auto& [idx, p] : parent) components[find(idx)].push_back(idx);

  std::vector<FactDesc> out;
  for (auto& [root, members] : components) {
    std::sort(members.begin(), members.end());
    FactDesc f;
    for (int idx : members) f.words.push_back({idx, form[idx]});
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(),
            [](const FactDesc& a, const FactDesc& b) { return a.words.front().index < b.words.front().index; });
  return out;
}

std::vector<FactDesc> filter_reporting(const std::vector<FactDesc>& facts, bool enabled,
                                       const ReportingLexicon& lexicon) {
  if (!enabled) return facts;
  std::vector<FactDesc> out;
  for (const auto& f : facts) {
    if (!f.words.empty() && lexicon.lemma(f.words.back().form)) continue;
    out.push_back(f);
  }
  return out;
}

std::vector<FactDesc> combine_facts(const std::vector<FactDesc>& triple_facts,
                                    const std::vector<FactDesc>& dep_facts) {
  std::vector<Multiset> triple_sets;
  for (const auto& f : triple_facts) triple_sets.push_back(word_multiset(f.words));
  std::vector<FactDesc> out = triple_facts;
  for (const auto& f : dep_facts) {
    const auto m = word_multiset(f.words);
    const bool covered =
        std::any_of(triple_sets.begin(), triple_sets.end(), [&](const Multiset& t) { return covered_by(m, t); });
    if (!covered) out.push_back(f);
  }
  return out;
}

FactSeq assemble_fact_sequence(const std::vector<FactDesc>& triple_facts, const std::vector<FactDesc>& dep_facts) {
  return FactSeq(combine_facts(triple_facts, dep_facts));
}

FactSeq extract_facts(const std::vector<Triple>& triples, const DepTree* tree, const ExtractOptions& options) {
  std::vector<FactDesc> triple_facts;
  for (const auto& t : dedup_triples(triples)) {
    auto f = triple_to_fact(t);
    if (!f.words.empty()) triple_facts.push_back(std::move(f));
  }
  std::vector<FactDesc> dep_facts;
  if (tree) dep_facts = merge_tuples(extract_dep_tuples(*tree, options.labels));
  auto combined = combine_facts(triple_facts, dep_facts);
  return FactSeq(filter_reporting(combined, options.reporting_filter, options.lexicon));
}

std::vector<DepTree> read_conll(std::istream& in) {
  std::vector<DepTree> trees;
  std::vector<DepToken> cur;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!cur.empty()) trees.emplace_back(std::move(cur));
    cur.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.empty() || cols[0].find_first_of("-.") != std::string::npos) continue;
    DepToken tok;
    if (cols.size() >= 8) {
      tok.index = parse_int(cols[0], lineno, "token id");
      tok.form = normalize_token(cols[1]);
      tok.head = parse_int(cols[6], lineno, "head");
      tok.label = cols[7];
    } else if (cols.size() == 4) {
      tok.index = parse_int(cols[0], lineno, "token id");
      tok.form = normalize_token(cols[1]);
      tok.head = parse_int(cols[2], lineno, "head");
      tok.label = cols[3];
    } else {
      throw ParseError("line " + std::to_string(lineno) + ": expected 4 or at least 8 tab-separated columns");
    }
    cur.push_back(std::move(tok));
  }
  flush();
  return trees;
}

namespace {

std::vector<Word> parse_words(const nlohmann::json& j, std::size_t lineno) {
  std::vector<Word> out;
  if (j.is_null()) return out;
  if (j.is_string()) {
    // A bare phrase: split on whitespace.
    for (auto& t : split_tokens(j.get<std::string>())) out.push_back({0, normalize_token(t)});
    return out;
  }
  if (!j.is_array()) throw ParseError("line " + std::to_string(lineno) + ": triple slot must be an array");
  for (const auto& tok : j) {
    Word w;
    if (tok.is_string()) {
      w.form = tok.get<std::string>();
    } else if (tok.is_object()) {
      if (tok.contains("form"))
        w.form = tok.at("form").get<std::string>();
      else if (tok.contains("text"))
        w.form = tok.at("text").get<std::string>();
      else
        throw ParseError("line " + std::to_string(lineno) + ": token object needs \"form\" or \"text\"");
      if (tok.contains("index")) w.index = tok.at("index").get<int>();
    } else {
      throw ParseError("line " + std::to_string(lineno) + ": bad token entry");
    }
    w.form = normalize_token(w.form);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

std::vector<TripleRecord> read_triples_jsonl(std::istream& in) {
  std::vector<TripleRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TripleRecord rec;
      rec.id = j.at("id").get<long>();
      for (const auto& t : j.value("triples", nlohmann::json::array())) {
        Triple tr;
        tr.subject = parse_words(t.at("subject"), lineno);
        tr.predicate = parse_words(t.at("predicate"), lineno);
        tr.object = parse_words(t.value("object", nlohmann::json()), lineno);
        if (tr.subject.empty() || tr.predicate.empty())
          throw ParseError("line " + std::to_string(lineno) + ": triple needs a subject and a predicate");
        rec.triples.push_back(std::move(tr));
      }
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ftsum::factex
