#include "ftsum/corpus.hpp"

#include "ftsum/error.hpp"
#include "ftsum/nn.hpp"
#include "ftsum/rng.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace ftsum {

namespace {

constexpr std::string_view kSpecialTokens[kNumSpecials] = {kPadToken, kUnkToken, kBosToken, kEosToken,
                                                           kSepToken};

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

Ids strip_pad(const IdMatrix& ids, const FlagMatrix& mask, Eigen::Index row) {
  Ids out;
  for (Eigen::Index j = 0; j < ids.cols(); ++j)
    if (mask(row, j)) out.push_back(ids(row, j));
  return out;
}

}  // namespace

bool is_special_token(std::string_view token) {
  return std::find(std::begin(kSpecialTokens), std::end(kSpecialTokens), token) != std::end(kSpecialTokens);
}

Vocab::Vocab() {
  for (auto t : kSpecialTokens) add(std::string(t));
}

void Vocab::add(const std::string& token) {
  auto [it, inserted] = token_to_id_.emplace(token, size());
  if (!inserted) throw ParseError("duplicate vocabulary entry '" + token + "'");
  id_to_token_.push_back(token);
}

Vocab Vocab::from_tokens(std::span<const std::string> tokens) {
  Vocab v;
  for (const auto& t : tokens) {
    if (is_special_token(t)) throw ParseError("reserved token '" + t + "' in vocabulary list");
    v.add(t);
  }
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) > 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw ShapeError("token id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocab::save(std::ostream& out) const {
  for (std::size_t i = kNumSpecials; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\n';
}

Vocab Vocab::load(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

Vocab Vocab::load(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load(in);
}

Ids Batch::source_row(Eigen::Index row) const { return strip_pad(source_ids, source_mask, row); }
Ids Batch::fact_row(Eigen::Index row) const { return strip_pad(fact_ids, fact_mask, row); }
Ids Batch::target_row(Eigen::Index row) const { return strip_pad(target_ids, target_mask, row); }

std::string normalize_token(std::string_view token) {
  std::string out(token);
  for (char& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isdigit(u))
      c = '#';
    else
      c = static_cast<char>(std::tolower(u));
  }
  return out;
}

Tokens normalize_text(std::span<const std::string> tokens) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(normalize_token(t));
  return out;
}

Tokens split_tokens(std::string_view line) {
  Tokens out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

Vocab build_vocab(std::span<const Tokens> corpus, int min_freq, int max_size) {
  if (min_freq < 1) throw Error("min_freq must be at least 1");
  std::unordered_map<std::string, long> freq;
  for (const auto& seq : corpus)
    for (const auto& t : seq)
      if (!is_special_token(t)) ++freq[t];

  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : freq)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (max_size > 0) {
    const auto room = static_cast<std::size_t>(std::max(0, max_size - kNumSpecials));
    if (kept.size() > room) kept.resize(room);
  }
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocab::from_tokens(tokens);
}

Ids encode_sequence(std::span<const std::string> tokens, const Vocab& vocab) {
  Ids out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab.id(t));
  return out;
}

Tokens decode_sequence(std::span<const int> ids, const Vocab& vocab) {
  Tokens out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

namespace {

struct EncodedPair {
  Ids source, facts, target;
};

EncodedPair encode_pair(const ParallelPair& p, const Vocab& src, const Vocab& tgt, std::size_t index) {
  if (p.source.empty()) throw ParseError("pair " + std::to_string(index) + " has an empty source");
  if (p.target.empty()) throw ParseError("pair " + std::to_string(index) + " has an empty target");
  EncodedPair e;
  e.source = encode_sequence(p.source, src);
  e.facts.reserve(p.facts.size());
  for (const auto& t : p.facts) e.facts.push_back(t == kSepToken ? kSep : src.id(t));
  e.target.reserve(p.target.size() + 2);
  e.target.push_back(kBos);
  for (const auto& t : p.target) e.target.push_back(tgt.id(t));
  e.target.push_back(kEos);
  return e;
}

void fill_row(IdMatrix& ids, FlagMatrix& mask, Eigen::Index row, const Ids& seq) {
  for (std::size_t j = 0; j < seq.size(); ++j) {
    ids(row, static_cast<Eigen::Index>(j)) = seq[j];
    mask(row, static_cast<Eigen::Index>(j)) = 1;
  }
}

Batch assemble(std::span<const EncodedPair> rows, std::span<const std::size_t> index) {
  std::size_t ls = 0, lf = 0, lt = 0;
  for (const auto& r : rows) {
    ls = std::max(ls, r.source.size());
    lf = std::max(lf, r.facts.size());
    lt = std::max(lt, r.target.size());
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Batch b;
  b.source_ids = IdMatrix::Constant(n, static_cast<Eigen::Index>(ls), kPad);
  b.fact_ids = IdMatrix::Constant(n, static_cast<Eigen::Index>(lf), kPad);
  b.target_ids = IdMatrix::Constant(n, static_cast<Eigen::Index>(lt), kPad);
  b.source_mask = FlagMatrix::Zero(n, b.source_ids.cols());
  b.fact_mask = FlagMatrix::Zero(n, b.fact_ids.cols());
  b.target_mask = FlagMatrix::Zero(n, b.target_ids.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    fill_row(b.source_ids, b.source_mask, i, r.source);
    fill_row(b.fact_ids, b.fact_mask, i, r.facts);
    fill_row(b.target_ids, b.target_mask, i, r.target);
  }
  b.gamma = (b.fact_ids.array() != kSep).cast<std::uint8_t>();
  b.pair_index.assign(index.begin(), index.end());
  return b;
}

std::vector<Batch> batches_in_order(std::span<const ParallelPair> pairs, std::span<const std::size_t> order,
                                    const Vocab& src, const Vocab& tgt, int batch_size) {
  if (batch_size < 1) throw Error("batch_size must be at least 1");
  std::vector<Batch> out;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    std::vector<EncodedPair> rows;
    for (std::size_t k = start; k < end; ++k) rows.push_back(encode_pair(pairs[order[k]], src, tgt, order[k]));
    out.push_back(assemble(rows, order.subspan(start, end - start)));
  }
  return out;
}

}  // namespace

std::vector<Batch> make_batches(std::span<const ParallelPair> pairs, const Vocab& source_vocab,
                                const Vocab& target_vocab, int batch_size, std::uint64_t seed) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return batches_in_order(pairs, order, source_vocab, target_vocab, batch_size);
}

std::vector<Batch> make_ordered_batches(std::span<const ParallelPair> pairs, const Vocab& source_vocab,
                                        const Vocab& target_vocab, int batch_size) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return batches_in_order(pairs, order, source_vocab, target_vocab, batch_size);
}

EmbeddingLoad load_pretrained_embeddings(std::istream& in, const Vocab& vocab, int dim, Rng& rng) {
  if (dim < 1) throw ShapeError("embedding dim must be positive");
  EmbeddingLoad out;
  out.matrix = nn::glorot_uniform(vocab.size(), dim, rng);
  out.candidates = static_cast<std::size_t>(vocab.size() - kNumSpecials);
  std::vector<bool> seen(static_cast<std::size_t>(vocab.size()), false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_tokens(line);
    if (fields.empty()) continue;
    if (fields.size() != static_cast<std::size_t>(dim) + 1)
      throw ShapeError("embedding line " + std::to_string(lineno) + " has " + std::to_string(fields.size() - 1) +
                       " values, expected " + std::to_string(dim));
    if (!vocab.contains(fields[0]) || is_special_token(fields[0])) continue;
    const int id = vocab.id(fields[0]);
    for (int k = 0; k < dim; ++k) {
      try {
        out.matrix(id, k) = std::stod(fields[static_cast<std::size_t>(k) + 1]);
      } catch (const std::exception&) {
        throw ParseError("bad embedding value on line " + std::to_string(lineno));
      }
    }
    if (!seen[static_cast<std::size_t>(id)]) {
      seen[static_cast<std::size_t>(id)] = true;
      ++out.covered;
    }
  }
  return out;
}

EmbeddingLoad load_pretrained_embeddings(const std::filesystem::path& path, const Vocab& vocab, int dim,
                                         Rng& rng) {
  auto in = open_or_throw(path);
  return load_pretrained_embeddings(in, vocab, dim, rng);
}

std::vector<Tokens> split_facts(std::span<const std::string> facts) {
  std::vector<Tokens> out;
  Tokens cur;
  for (const auto& t : facts) {
    if (t == kSepToken) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(t);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

// Fraction of `tokens` whose type occurs in `summary_types`.
double copy_ratio(const std::vector<const std::string*>& tokens,
                  const std::unordered_set<std::string>& summary_types) {
  std::size_t hit = 0;
  for (const auto* t : tokens) hit += summary_types.count(*t);
  return static_cast<double>(hit) / static_cast<double>(tokens.size());
}

}  // namespace

CorpusStats corpus_stats(std::span<const ParallelPair> pairs) {
  if (pairs.empty()) throw Error("corpus_stats needs at least one pair");
  CorpusStats s;
  s.pairs = pairs.size();
  std::size_t src_tokens = 0, fact_tokens = 0, fact_count = 0, tgt_tokens = 0, fact_pairs = 0;
  double src_copy = 0, fact_copy = 0;
  for (const auto& p : pairs) {
    std::unordered_set<std::string> summary(p.target.begin(), p.target.end());
    std::vector<const std::string*> src, fact;
    for (const auto& t : p.source) src.push_back(&t);
    for (const auto& t : p.facts)
      if (t != kSepToken) fact.push_back(&t);
    src_tokens += src.size();
    fact_tokens += fact.size();
    tgt_tokens += p.target.size();
    fact_count += split_facts(p.facts).size();
    if (!src.empty()) src_copy += copy_ratio(src, summary);
    if (!fact.empty()) {
      fact_copy += copy_ratio(fact, summary);
      ++fact_pairs;
    }
  }
  const auto n = static_cast<double>(pairs.size());
  s.avg_source_len = static_cast<double>(src_tokens) / n;
  s.avg_fact_len = static_cast<double>(fact_tokens) / n;
  s.avg_fact_count = static_cast<double>(fact_count) / n;
  s.avg_target_len = static_cast<double>(tgt_tokens) / n;
  s.copy_ratio_source = src_copy / n;
  s.copy_ratio_fact = fact_pairs == 0 ? 0.0 : fact_copy / static_cast<double>(fact_pairs);
  return s;
}

std::vector<ParallelPair> read_parallel_corpus(std::istream& corpus, std::istream* facts) {
  std::vector<ParallelPair> out;
  std::string line, fact_line;
  std::size_t lineno = 0;
  while (std::getline(corpus, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool have_fact_line = false;
    if (facts) {
      if (!std::getline(*facts, fact_line))
        throw ParseError("facts file is shorter than the corpus (line " + std::to_string(lineno) + ")");
      have_fact_line = true;
    }
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("corpus line " + std::to_string(lineno) + " has no TAB");
    ParallelPair p;
    p.source = normalize_text(split_tokens(std::string_view(line).substr(0, tab)));
    p.target = normalize_text(split_tokens(std::string_view(line).substr(tab + 1)));
    if (have_fact_line) p.facts = normalize_text(split_tokens(fact_line));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ParallelPair> read_parallel_corpus(const std::filesystem::path& corpus,
                                               const std::optional<std::filesystem::path>& facts) {
  auto in = open_or_throw(corpus);
  if (!facts) return read_parallel_corpus(in, nullptr);
  auto fin = open_or_throw(*facts);
  return read_parallel_corpus(in, &fin);
}

}  // namespace ftsum
