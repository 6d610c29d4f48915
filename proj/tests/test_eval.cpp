#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ftsum/error.hpp"
#include "ftsum/eval.hpp"
#include "ftsum/rng.hpp"
#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace ftsum;
using namespace ftsum::eval;

using namespace ftsum::testing;

TEST_CASE("ROUGE hand-computed fixtures") {
  const Tokens cand = split_tokens("the cat sat"), ref = split_tokens("the cat");
  const auto r1 = rouge_n(cand, ref, 1);
  CHECK(r1.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r1.recall == 1.0);
  CHECK(r1.f1 == doctest::Approx(0.8).epsilon(1e-15));
  const auto r2 = rouge_n(cand, ref, 2);
  CHECK(r2.precision == 0.5);
  CHECK(r2.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const auto rl = rouge_l(split_tokens("a b c d"), split_tokens("a c"));
  CHECK(lcs_length(split_tokens("a b c d"), split_tokens("a c")) == 2u);
  CHECK(rl.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("ROUGE identity, disjoint and empty cases") {
  const Tokens x = split_tokens("a b a c"), y = split_tokens("d e");
  for (int n : {1, 2, 3}) {
    CHECK(rouge_n(x, x, n).f1 == 1.0);
    CHECK(rouge_n(x, y, n).f1 == 0.0);
    CHECK(rouge_n(Tokens{}, x, n).f1 == 0.0);
    CHECK(rouge_n(x, Tokens{}, n).f1 == 0.0);
  }
  CHECK(rouge_l(x, x).f1 == 1.0);
  CHECK(rouge_l(x, y).f1 == 0.0);
  CHECK(rouge_l(Tokens{}, Tokens{}).f1 == 0.0);
  CHECK_THROWS(rouge_n(x, x, 0));
  // Clipping: "the the the" against "the" overlaps once.
  CHECK(rouge_n(split_tokens("the the the"), split_tokens("the"), 1).precision == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("ROUGE agrees with brute-force oracles on 1000 random pairs") {
  Rng rng(2718);
  for (int trial = 0; trial < 1000; ++trial) {
    const Tokens c = random_letters(rng, 9), r = random_letters(rng, 9);
    for (int n : {1, 2}) {
      const double cu = c.size() >= std::size_t(n) ? double(c.size() - n + 1) : 0;
      const double ru = r.size() >= std::size_t(n) ? double(r.size() - n + 1) : 0;
      const auto s = rouge_n(c, r, n);
      CHECK(s.f1 == doctest::Approx(f1_of(double(matched_ngrams(c, r, n)), cu, ru)).epsilon(1e-14));
      // Swapping candidate and reference swaps precision and recall.
      const auto t = rouge_n(r, c, n);
      CHECK(t.precision == s.recall);
      CHECK(t.recall == s.precision);
    }
    const std::size_t lcs = lcs_by_subsets(c, r);
    CHECK(lcs_length(c, r) == lcs);
    CHECK(rouge_l(c, r).f1 == doctest::Approx(f1_of(double(lcs), double(c.size()), double(r.size()))).epsilon(1e-14));
  }
}

TEST_CASE("Porter stemmer reference words") {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"caresses", "caress"},     {"ponies", "poni"},         {"ties", "ti"},
      {"caress", "caress"},       {"cats", "cat"},            {"feed", "feed"},
      {"agreed", "agre"},         {"plastered", "plaster"},   {"bled", "bled"},
      {"motoring", "motor"},      {"sing", "sing"},           {"conflated", "conflat"},
      {"troubled", "troubl"},     {"sized", "size"},          {"hopping", "hop"},
      {"tanned", "tan"},          {"falling", "fall"},        {"hissing", "hiss"},
      {"fizzed", "fizz"},         {"failing", "fail"},        {"filing", "file"},
      {"happy", "happi"},         {"sky", "sky"},             {"relational", "relat"},
      {"conditional", "condit"},  {"rational", "ration"},     {"valenci", "valenc"},
      {"digitizer", "digit"},     {"conformabli", "conform"}, {"radicalli", "radic"},
      {"differentli", "differ"},  {"vileli", "vile"},         {"analogousli", "analog"},
      {"vietnamization", "vietnam"}, {"predication", "predic"}, {"operator", "oper"},
      {"feudalism", "feudal"},    {"decisiveness", "decis"},  {"hopefulness", "hope"},
      {"callousness", "callous"}, {"formaliti", "formal"},    {"sensitiviti", "sensit"},
      {"sensibiliti", "sensibl"}, {"triplicate", "triplic"},  {"formative", "form"},
      {"formalize", "formal"},    {"electriciti", "electr"},  {"electrical", "electr"},
      {"hopeful", "hope"},        {"goodness", "good"},       {"revival", "reviv"},
      {"allowance", "allow"},     {"inference", "infer"},     {"airliner", "airlin"},
      {"gyroscopic", "gyroscop"}, {"adjustable", "adjust"},   {"defensible", "defens"},
      {"irritant", "irrit"},      {"replacement", "replac"},  {"adjustment", "adjust"},
      {"dependent", "depend"},    {"adoption", "adopt"},      {"communism", "commun"},
      {"activate", "activ"},      {"angulariti", "angular"},  {"homologous", "homolog"},
      {"effective", "effect"},    {"bowdlerize", "bowdler"},  {"probate", "probat"},
      {"rate", "rate"},           {"cease", "ceas"},          {"controll", "control"},
      {"roll", "roll"},           {"generalizations", "gener"}, {"oscillators", "oscil"},
      {"is", "is"},               {"#,###", "#,###"}};
  for (const auto& [in, out] : cases) {
    INFO(in);
    CHECK(porter_stem(in) == out);
  }
}

TEST_CASE("corpus ROUGE macro-averages and optionally stems") {
  const std::vector<Tokens> c = {split_tokens("the cat sat"), split_tokens("cats sitting")};
  const std::vector<Tokens> r = {split_tokens("the cat"), split_tokens("cat sits")};
  const auto plain = corpus_rouge(c, r);
  CHECK(plain.pairs == 2);
  CHECK(plain.rouge1.f1 == doctest::Approx((0.8 + 0.0) / 2));
  RougeOptions stem;
  stem.stem = true;
  const auto stemmed = corpus_rouge(c, r, stem);
  CHECK(stemmed.rouge1.f1 == doctest::Approx((0.8 + 1.0) / 2));  // cat sit vs cat sit
  const std::vector<Tokens> one = {split_tokens("a")};
  CHECK_THROWS(corpus_rouge(one, r));
}

TEST_CASE("faithfulness tally") {
  SUBCASE("annotation fixture") {
    std::ifstream in(testing::data_path("faithfulness.tsv"));
    const auto t = faithfulness_tally(in);
    CHECK(t.count("att-s2s", FaithLabel::Faithful) == 68);
    CHECK(t.count("att-s2s", FaithLabel::Fake) == 27);
    CHECK(t.count("att-s2s", FaithLabel::Unclear) == 5);
    CHECK(t.count("ftsum_g", FaithLabel::Faithful) == 87);
    CHECK(t.count("ftsum_g", FaithLabel::Fake) == 6);
    CHECK(t.count("ftsum_g", FaithLabel::Unclear) == 7);
    CHECK(t.total("ftsum_g") == 100);
  }
  SUBCASE("empty input") {
    std::istringstream in("");
    const auto t = faithfulness_tally(in);
    CHECK(t.counts.empty());
    CHECK(t.total("x") == 0);
  }
  SUBCASE("three rows") {
    std::istringstream in("s\t1\tFAITHFUL\ns\t2\tFAKE\n\ns\t3\tFAITHFUL\n");
    const auto t = faithfulness_tally(in);
    CHECK(t.count("s", FaithLabel::Faithful) == 2);
    CHECK(t.count("s", FaithLabel::Fake) == 1);
    CHECK(t.count("s", FaithLabel::Unclear) == 0);
  }
  SUBCASE("malformed rows") {
    std::istringstream bad_label("s\t1\tMAYBE\n");
    CHECK_THROWS_AS(faithfulness_tally(bad_label), ParseError);
    std::istringstream two_cols("s\tFAKE\n");
    CHECK_THROWS_AS(faithfulness_tally(two_cols), ParseError);
  }
  CHECK(to_string(FaithLabel::Unclear) == "UNCLEAR");
}

TEST_CASE("gate summaries") {
  model::GateRecorder rec;
  const std::vector<double> a = {0.2}, b = {0.6}, c = {0.1, 0.3};
  rec.add_pair(0, a);
  rec.add_pair(1, b);
  auto s = summarize_gates(rec, 1);
  CHECK(s.mean == doctest::Approx(0.4));
  CHECK(s.stddev == doctest::Approx(0.2));
  CHECK(s.components == 2);
  REQUIRE(s.top.size() == 1);
  CHECK(s.top[0].pair == 1);
  CHECK(s.bottom[0].pair == 0);
  rec.add_pair(2, c);
  s = summarize_gates(rec, 5);
  CHECK(s.top.size() == 3);
  CHECK(s.bottom.front().pair == 2);
  CHECK(s.mean == doctest::Approx(1.2 / 4));

  model::ModelConfig cfg;
  cfg.embed_dim = cfg.hidden_dim = 4;
  cfg.source_vocab = cfg.target_vocab = 8;
  cfg.fusion = model::Fusion::Concat;
  const auto p = model::ModelParams::zeros(cfg);
  const std::vector<Batch> none;
  CHECK_THROWS(gate_report(p, cfg, none));
}
