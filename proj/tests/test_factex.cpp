#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ftsum/error.hpp"
#include "ftsum/factex.hpp"
#include "ftsum/rng.hpp"
#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

using namespace ftsum;
using namespace ftsum::factex;

namespace {

std::vector<Word> words(const std::string& text, int first_index = 0) {
  std::vector<Word> out;
  int i = first_index;
  for (const auto& t : split_tokens(text)) out.push_back({first_index ? i++ : 0, t});
  return out;
}

Triple triple(const std::string& s, const std::string& p, const std::string& o) {
  return {words(s), words(p), words(o)};
}

FactDesc fact(const std::string& text) {
  FactDesc f;
  int i = 1;
  for (const auto& t : split_tokens(text)) f.words.push_back({i++, t});
  return f;
}

std::vector<std::string> texts(const std::vector<FactDesc>& facts) {
  std::vector<std::string> out;
  for (const auto& f : facts) out.push_back(f.text());
  return out;
}

DepTree fig2_tree() {
  std::ifstream in(testing::data_path("fig2.conllu"));
  auto trees = read_conll(in);
  REQUIRE(trees.size() == 1);
  return trees[0];
}

std::string tuple_text(const DepTuple& t) { return "(" + t.governor.form + "; " + t.dependent.form + ")"; }

std::map<std::string, int> multiset(const std::vector<Word>& w) {
  std::map<std::string, int> m;
  for (const auto& x : w) ++m[x.form];
  return m;
}

}  // namespace

TEST_CASE("dedup_triples") {
  SUBCASE("nested granularities keep only the widest") {
    const std::vector<Triple> t = {triple("i", "saw", "cat"), triple("i", "saw", "cat sitting"),
                                   triple("i", "saw", "cat sitting on desk")};
    const auto out = dedup_triples(t);
    REQUIRE(out.size() == 1);
    CHECK(triple_to_fact(out[0]).text() == "i saw cat sitting on desk");
  }
  SUBCASE("single triple is kept") { CHECK(dedup_triples({triple("a", "b", "c")}).size() == 1); }
  SUBCASE("word-disjoint triples are both kept") {
    CHECK(dedup_triples({triple("a", "b", "c"), triple("d", "e", "f")}).size() == 2);
  }
  SUBCASE("identical multisets keep the earlier one") {
    const auto out = dedup_triples({triple("a", "b", "c"), triple("c", "b", "a")});
    REQUIRE(out.size() == 1);
    CHECK(out[0].subject[0].form == "a");
  }
  SUBCASE("multiplicity matters") {
    CHECK(dedup_triples({triple("a a", "b", ""), triple("a", "b", "c")}).size() == 2);
  }
}

TEST_CASE("dedup_triples output has no covered pair (random property)") {
  Rng rng(12);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Triple> ts;
    const int n = 1 + static_cast<int>(rng.index(5));
    for (int k = 0; k < n; ++k) {
      Triple t;
      for (auto* part : {&t.subject, &t.predicate, &t.object}) {
        const int len = (part == &t.object ? 0 : 1) + static_cast<int>(rng.index(3));
        for (int i = 0; i < len; ++i) part->push_back({0, vocab[rng.index(vocab.size())]});
      }
      ts.push_back(t);
    }
    const auto out = dedup_triples(ts);
    CHECK(!out.empty());
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = 0; j < out.size(); ++j) {
        if (i == j) continue;
        const auto a = multiset(triple_to_fact(out[i]).words), b = multiset(triple_to_fact(out[j]).words);
        bool covered = true;
        for (const auto& [w, c] : a) covered = covered && b.count(w) && b.at(w) >= c;
        CHECK_FALSE(covered);
      }
  }
}

TEST_CASE("triple_to_fact") {
  CHECK(triple_to_fact(triple("repatriation", "was postponed", "friday")).text() ==
        "repatriation was postponed friday");
  const auto f = triple_to_fact(triple("dealers", "said", ""));
  CHECK(f.text() == "dealers said");
  CHECK(f.words[0].index == 1);
  CHECK(f.words[1].index == 2);
  Triple indexed{{{4, "x"}}, {{7, "y"}}, {{9, "z"}}};
  CHECK(triple_to_fact(indexed).words[2].index == 9);
}

TEST_CASE("extract_dep_tuples on the dependency example") {
  const auto tuples = extract_dep_tuples(fig2_tree(), default_labels());
  std::vector<std::string> got;
  for (const auto& t : tuples) got.push_back(tuple_text(t));
  // Ordered by dependent index.
  const std::vector<std::string> expect = {"(prices; taiwan)", "(prices; share)",  "(opened; prices)",
                                           "(tuesday; lower)", "(opened; tuesday)", "(said; dealers)"};
  CHECK(got == expect);
}

TEST_CASE("extract_dep_tuples: no matching labels and a single nsubj edge") {
  CHECK(extract_dep_tuples(fig2_tree(), LabelSet{"xcomp"}).empty());
  const DepTree tiny({{1, "dogs", 2, "nsubj"}, {2, "bark", 0, "root"}, {3, "loudly", 2, "advcl"}});
  const auto t = extract_dep_tuples(tiny, default_labels());
  REQUIRE(t.size() == 1);
  CHECK(t[0].governor.form == "bark");
  CHECK(t[0].dependent.form == "dogs");
}

TEST_CASE("merge_tuples") {
  SUBCASE("dependency example merges into two facts") {
    const auto facts = merge_tuples(extract_dep_tuples(fig2_tree(), default_labels()));
    CHECK(texts(facts) == std::vector<std::string>{"taiwan share prices opened lower tuesday", "dealers said"});
  }
  SUBCASE("single tuple") {
    const auto facts = merge_tuples({{{1, "a"}, {2, "b"}, "nsubj"}});
    CHECK(texts(facts) == std::vector<std::string>{"a b"});
  }
  SUBCASE("index-disjoint tuples stay apart, ordered by first index") {
    const auto facts = merge_tuples({{{5, "c"}, {6, "d"}, "nsubj"}, {{2, "a"}, {1, "b"}, "nsubj"}});
    CHECK(texts(facts) == std::vector<std::string>{"b a", "c d"});
  }
  SUBCASE("invariant to input order; every index once, increasing within a fact") {
    auto tuples = extract_dep_tuples(fig2_tree(), default_labels());
    const auto ref = texts(merge_tuples(tuples));
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      for (std::size_t k = tuples.size(); k > 1; --k) std::swap(tuples[k - 1], tuples[rng.index(k)]);
      const auto facts = merge_tuples(tuples);
      CHECK(texts(facts) == ref);
      std::vector<int> seen;
      for (const auto& f : facts) {
        for (std::size_t j = 1; j < f.words.size(); ++j) CHECK(f.words[j].index > f.words[j - 1].index);
        for (const auto& w : f.words) seen.push_back(w.index);
      }
      std::sort(seen.begin(), seen.end());
      CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    }
  }
}

TEST_CASE("filter_reporting") {
  CHECK(filter_reporting({fact("dealers said")}, true).empty());
  CHECK(texts(filter_reporting({fact("prices opened")}, true)) == std::vector<std::string>{"prices opened"});
  CHECK(texts(filter_reporting({fact("officials announced plan")}, true)) ==
        std::vector<std::string>{"officials announced plan"});
  CHECK(filter_reporting({fact("he declares")}, true).empty());
  CHECK(filter_reporting({fact("they announce")}, true).empty());
  CHECK(texts(filter_reporting({fact("dealers said")}, false)) == std::vector<std::string>{"dealers said"});
  const ReportingLexicon lex;
  CHECK(lex.lemma("says") == std::optional<std::string>("say"));
  CHECK(lex.lemma("declared") == std::optional<std::string>("declare"));
  CHECK(lex.lemma("announced") == std::optional<std::string>("announce"));
  CHECK_FALSE(lex.lemma("opened").has_value());
}

TEST_CASE("assemble_fact_sequence") {
  SUBCASE("dependency facts only, joined by the separator") {
    const auto seq = assemble_fact_sequence({}, {fact("taiwan share prices opened lower tuesday"), fact("dealers said")});
    CHECK(seq.text() == "taiwan share prices opened lower tuesday ||| dealers said");
  }
  SUBCASE("empty input gives an empty sequence") {
    const auto seq = assemble_fact_sequence({}, {});
    CHECK(seq.flatten().empty());
    CHECK(seq.text().empty());
  }
  SUBCASE("one fact, no separator") { CHECK(assemble_fact_sequence({fact("a b")}, {}).text() == "a b"); }
  SUBCASE("dependency facts covered by a triple fact are dropped; triple facts come first") {
    const auto seq = assemble_fact_sequence({fact("prices opened lower")}, {fact("opened prices"), fact("x y")});
    CHECK(seq.text() == "prices opened lower ||| x y");
  }
  SUBCASE("flattened length = sum of fact lengths + separators") {
    const auto seq = assemble_fact_sequence({fact("a b c")}, {fact("d"), fact("e f")});
    CHECK(seq.flatten().size() == 6u + 2u);
  }
}

TEST_CASE("extract_facts pipeline on the golden inputs") {
  SUBCASE("nested triples") {
    std::ifstream in(testing::data_path("table2_triples.jsonl"));
    const auto recs = read_triples_jsonl(in);
    REQUIRE(recs.size() == 1);
    CHECK(extract_facts(recs[0].triples, nullptr, {}).text() == "i saw cat sitting on desk");
  }
  SUBCASE("bare-phrase triples keep their order and pass the reporting filter") {
    std::ifstream in(testing::data_path("table7_triples.jsonl"));
    const auto recs = read_triples_jsonl(in);
    REQUIRE(recs.size() == 1);
    REQUIRE(recs[0].triples.size() == 3);
    CHECK(triple_to_fact(recs[0].triples[1]).text() == "repatriation was postponed friday");
    CHECK(extract_facts(recs[0].triples, nullptr, {}).text() ==
          "unhcr pulled out of first joint scheme ||| repatriation was postponed friday ||| unhcr return refugees to "
          "their homes");
  }
  SUBCASE("dependency tree with and without the reporting filter") {
    const auto tree = fig2_tree();
    ExtractOptions opt;
    opt.reporting_filter = false;
    CHECK(extract_facts({}, &tree, opt).text() == "taiwan share prices opened lower tuesday ||| dealers said");
    CHECK(extract_facts({}, &tree, {}).text() == "taiwan share prices opened lower tuesday");
  }
}

TEST_CASE("labels parse from a comma list") {
  CHECK(parse_labels("nsubj, dobj,,amod") == LabelSet{"nsubj", "dobj", "amod"});
  CHECK(parse_labels("") == LabelSet{});
}

TEST_CASE("read_conll") {
  SUBCASE("comments, multiword ranges and normalization") {
    std::istringstream in(
        "# sent 1\n1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tDo\t_\t_\t_\t_\t0\troot\t_\t_\n2\tn't\t_\t_\t_\t_\t1\tadvmod\t_\t_\n\n"
        "1\tA\t2\tamod\n2\tB2\t0\troot\n");
    const auto trees = read_conll(in);
    REQUIRE(trees.size() == 2);
    CHECK(trees[0].size() == 2);
    CHECK(trees[0].at(1).form == "do");
    CHECK(trees[1].at(2).form == "b#");
  }
  SUBCASE("structural errors") {
    std::istringstream two_roots("1\ta\t0\troot\n2\tb\t0\troot\n");
    CHECK_THROWS_AS(read_conll(two_roots), ParseError);
    std::istringstream cycle("1\ta\t2\tx\n2\tb\t1\tx\n3\tc\t0\troot\n");
    CHECK_THROWS_AS(read_conll(cycle), ParseError);
    std::istringstream bad_head("1\ta\t0\troot\n2\tb\t7\tx\n");
    CHECK_THROWS_AS(read_conll(bad_head), ParseError);
    std::istringstream bad_cols("1\ta\t0\n");
    CHECK_THROWS_AS(read_conll(bad_cols), ParseError);
  }
}

TEST_CASE("read_triples_jsonl") {
  std::istringstream in(
      R"({"id": 3, "triples": [{"subject": [{"form": "He", "index": 1}], "predicate": [{"text": "ran", "index": 2}]}]})"
      "\n\n");
  const auto recs = read_triples_jsonl(in);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].id == 3);
  const auto f = triple_to_fact(recs[0].triples[0]);
  CHECK(f.text() == "he ran");
  CHECK(f.words[1].index == 2);

  std::istringstream no_pred(R"({"id": 1, "triples": [{"subject": ["a"], "object": ["b"]}]})");
  CHECK_THROWS_AS(read_triples_jsonl(no_pred), ParseError);
  std::istringstream bad_json("{not json}\n");
  CHECK_THROWS_AS(read_triples_jsonl(bad_json), ParseError);
}
