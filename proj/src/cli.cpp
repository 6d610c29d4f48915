#include "ftsum/cli.hpp"

#include "ftsum/corpus.hpp"
#include "ftsum/error.hpp"
#include "ftsum/eval.hpp"
#include "ftsum/factex.hpp"
#include "ftsum/gradcheck.hpp"
#include "ftsum/infer.hpp"
#include "ftsum/model.hpp"
#include "ftsum/rng.hpp"
#include "ftsum/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace ftsum::cli {

namespace {

using nlohmann::ordered_json;

constexpr double kGradcheckTolerance = 1e-4;

/// Writes to the configured output path, or to `fallback` when unset.
class Sink {
 public:
  Sink(const Config& cfg, std::ostream& fallback) {
    if (auto p = cfg.get_path("output")) {
      file_.open(*p);
      if (!file_) throw Error("cannot write " + p->string());
      stream_ = &file_;
    } else {
      stream_ = &fallback;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  auto in = open_in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

ordered_json score_json(const eval::RougeScore& s) {
  return ordered_json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

Vocab vocab_from_text(const std::string& text) {
  std::istringstream in(text);
  return Vocab::load(in);
}

std::string vocab_text(const Vocab& v) {
  std::ostringstream out;
  v.save(out);
  return out.str();
}

struct LoadedModel {
  model::ModelConfig cfg;
  model::ModelParams params;
  Vocab source, target;
};

LoadedModel load_model(const Config& cfg) {
  const auto ckpt = load_checkpoint(cfg.require_path("checkpoint"));
  LoadedModel m;
  m.cfg = model::config_from_checkpoint(ckpt);
  m.params = model::params_from_checkpoint(ckpt, m.cfg);
  auto text = [&](const char* key) {
    auto it = ckpt.metadata.find(key);
    if (it == ckpt.metadata.end()) throw ParseError(std::string("checkpoint lacks '") + key + "' metadata");
    return it->second;
  };
  m.source = vocab_from_text(text("source_tokens"));
  m.target = vocab_from_text(text("target_tokens"));
  if (m.source.size() != m.cfg.source_vocab || m.target.size() != m.cfg.target_vocab)
    throw ShapeError("checkpoint vocabularies disagree with its parameter shapes");
  return m;
}

std::vector<ParallelPair> read_split(const Config& cfg, const char* corpus_key, const char* facts_key) {
  return read_parallel_corpus(cfg.require_path(corpus_key), cfg.get_path(facts_key));
}

std::vector<Tokens> fact_and_source_tokens(std::span<const ParallelPair> pairs) {
  std::vector<Tokens> out;
  for (const auto& p : pairs) {
    out.push_back(p.source);
    out.push_back(p.facts);
  }
  return out;
}

// ---- subcommands ----

int cmd_extract_facts(const Config& cfg, std::ostream& out, std::ostream&) {
  factex::ExtractOptions opt;
  opt.labels = factex::parse_labels(cfg.get_string("labels"));
  opt.reporting_filter = cfg.get_bool("reporting_filter");

  std::vector<factex::DepTree> trees;
  if (auto p = cfg.get_path("conll")) {
    auto in = open_in(*p);
    trees = factex::read_conll(in);
  }
  std::vector<factex::TripleRecord> records;
  if (auto p = cfg.get_path("triples")) {
    auto in = open_in(*p);
    records = factex::read_triples_jsonl(in);
  }
  if (!cfg.get_path("conll") && !cfg.get_path("triples"))
    throw Error("extract-facts needs --conll and/or --triples");

  Sink sink(cfg, out);
  if (trees.empty()) {
    for (const auto& r : records) *sink << factex::extract_facts(r.triples, nullptr, opt).text() << "\n";
    return 0;
  }
  // Triple records are keyed by 1-based sentence number.
  std::vector<std::vector<factex::Triple>> by_sentence(trees.size());
  for (const auto& r : records) {
    if (r.id < 1 || static_cast<std::size_t>(r.id) > trees.size())
      throw ParseError("triple record id " + std::to_string(r.id) + " has no matching sentence");
    auto& slot = by_sentence[static_cast<std::size_t>(r.id - 1)];
    slot.insert(slot.end(), r.triples.begin(), r.triples.end());
  }
  for (std::size_t i = 0; i < trees.size(); ++i)
    *sink << factex::extract_facts(by_sentence[i], &trees[i], opt).text() << "\n";
  return 0;
}

int cmd_stats(const Config& cfg, std::ostream& out, std::ostream&) {
  const auto pairs = read_split(cfg, "train", "train_facts");
  const auto s = corpus_stats(pairs);
  ordered_json j{{"pairs", s.pairs},
                 {"avg_source_len", s.avg_source_len},
                 {"avg_fact_len", s.avg_fact_len},
                 {"avg_fact_count", s.avg_fact_count},
                 {"avg_target_len", s.avg_target_len},
                 {"copy_ratio_source", s.copy_ratio_source},
                 {"copy_ratio_fact", s.copy_ratio_fact}};
  Sink sink(cfg, out);
  *sink << j.dump(2) << "\n";
  return 0;
}

std::pair<Vocab, Vocab> build_vocabs(const Config& cfg, std::span<const ParallelPair> pairs) {
  const int min_freq = static_cast<int>(cfg.get_int("min_freq"));
  const int max_size = static_cast<int>(cfg.get_int("max_vocab"));
  std::vector<Tokens> targets;
  for (const auto& p : pairs) targets.push_back(p.target);
  return {build_vocab(fact_and_source_tokens(pairs), min_freq, max_size), build_vocab(targets, min_freq, max_size)};
}

int cmd_build_vocab(const Config& cfg, std::ostream& out, std::ostream&) {
  const auto pairs = read_split(cfg, "train", "train_facts");
  const auto [src, tgt] = build_vocabs(cfg, pairs);
  {
    auto f = open_out(cfg.require_path("source_vocab"));
    src.save(f);
  }
  {
    auto f = open_out(cfg.require_path("target_vocab"));
    tgt.save(f);
  }
  out << "source_vocab " << src.size() << "\ntarget_vocab " << tgt.size() << "\n";
  return 0;
}

int cmd_train(const Config& cfg, std::ostream& out, std::ostream& err) {
  const bool quiet = cfg.get_bool("quiet");
  const auto train_pairs = read_split(cfg, "train", "train_facts");
  const auto dev_pairs = read_split(cfg, "dev", "dev_facts");

  Vocab src, tgt;
  if (cfg.get_path("source_vocab") && cfg.get_path("target_vocab")) {
    src = Vocab::load(*cfg.get_path("source_vocab"));
    tgt = Vocab::load(*cfg.get_path("target_vocab"));
  } else {
    std::tie(src, tgt) = build_vocabs(cfg, train_pairs);
  }

  auto mcfg = cfg.model_config();
  mcfg.source_vocab = src.size();
  mcfg.target_vocab = tgt.size();
  const auto tcfg = cfg.train_config();
  mcfg.validate();
  tcfg.validate();

  Rng init_rng(tcfg.seed);
  auto params = model::ModelParams::init(mcfg, init_rng);
  if (auto emb = cfg.get_path("embeddings")) {
    auto s = load_pretrained_embeddings(*emb, src, mcfg.embed_dim, init_rng);
    auto t = load_pretrained_embeddings(*emb, tgt, mcfg.embed_dim, init_rng);
    params.source_embed = s.matrix;
    params.target_embed = t.matrix;
    if (!quiet)
      err << "pretrained embedding coverage: source " << s.coverage() << ", target " << t.coverage() << "\n";
  }

  std::optional<std::ofstream> log;
  if (auto p = cfg.get_path("log")) log = open_out(*p);
  auto on_validation = [&](const model::TrainLogRecord& r) {
    const auto line = model::to_json_line(r);
    if (log) *log << line << "\n" << std::flush;
    if (!quiet) err << line << "\n";
  };

  const auto result = model::train(train_pairs, dev_pairs, src, tgt, mcfg, tcfg, std::move(params), on_validation);

  auto ckpt = model::to_checkpoint(result.params, mcfg);
  ckpt.metadata["source_tokens"] = vocab_text(src);
  ckpt.metadata["target_tokens"] = vocab_text(tgt);
  save_checkpoint(cfg.require_path("checkpoint"), ckpt);
  if (!quiet) out << "trained " << result.steps << " steps\n";
  return 0;
}

int cmd_decode(const Config& cfg, std::ostream& out, std::ostream&) {
  const auto m = load_model(cfg);
  const int beam = static_cast<int>(cfg.get_int("beam"));
  const int max_len = static_cast<int>(cfg.get_int("max_len"));
  const auto inputs = read_lines(cfg.require_path("input"));
  std::vector<std::string> fact_lines;
  if (auto p = cfg.get_path("facts")) {
    fact_lines = read_lines(*p);
    if (fact_lines.size() < inputs.size()) throw ParseError("facts file has fewer lines than the input");
  }
  std::optional<std::ofstream> trace;
  if (auto p = cfg.get_path("gate_trace")) trace = open_out(*p);

  Sink sink(cfg, out);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto source = normalize_text(split_tokens(inputs[i]));
    if (source.empty()) throw ParseError("input line " + std::to_string(i + 1) + " is empty");
    const Tokens facts = fact_lines.empty() ? Tokens{} : normalize_text(split_tokens(fact_lines[i]));
    const auto src_ids = encode_sequence(source, m.source);
    const auto fact_ids = encode_sequence(facts, m.source);
    infer::SummarizerStepModel step(m.params, m.cfg, src_ids, fact_ids);
    const auto hyp = infer::beam_search(step, beam, max_len);
    const auto words = decode_sequence(hyp.words(kEos), m.target);
    std::string line;
    for (std::size_t k = 0; k < words.size(); ++k) line += (k ? " " : "") + words[k];
    *sink << line << "\n";
    if (trace) {
      ordered_json j{{"line", i + 1}, {"gates", hyp.gate_trace}};
      *trace << j.dump() << "\n";
    }
  }
  return 0;
}

int cmd_evaluate(const Config& cfg, std::ostream& out, std::ostream&) {
  ordered_json report = ordered_json::object();
  bool any = false;
  if (cfg.get_path("candidates") || cfg.get_path("references")) {
    const auto cand_lines = read_lines(cfg.require_path("candidates"));
    const auto ref_lines = read_lines(cfg.require_path("references"));
    std::vector<Tokens> cands, refs;
    for (const auto& l : cand_lines) cands.push_back(normalize_text(split_tokens(l)));
    for (const auto& l : ref_lines) refs.push_back(normalize_text(split_tokens(l)));
    const auto r = eval::corpus_rouge(cands, refs, {cfg.get_bool("stem")});
    report["rouge"] = ordered_json{{"pairs", r.pairs},
                                   {"rouge1", score_json(r.rouge1)},
                                   {"rouge2", score_json(r.rouge2)},
                                   {"rougeL", score_json(r.rougeL)}};
    any = true;
  }
  if (cfg.get_path("checkpoint") && cfg.get_path("dev")) {
    const auto m = load_model(cfg);
    const auto pairs = read_split(cfg, "dev", "dev_facts");
    const auto batches = make_ordered_batches(pairs, m.source, m.target, static_cast<int>(cfg.get_int("batch_size")));
    report["perplexity"] = eval::perplexity(m.params, m.cfg, batches);
    any = true;
  }
  if (auto p = cfg.get_path("annotations")) {
    auto in = open_in(*p);
    const auto tally = eval::faithfulness_tally(in);
    ordered_json f = ordered_json::object();
    for (const auto& [system, counts] : tally.counts)
      f[system] = ordered_json{{"FAITHFUL", counts[0]},
                               {"FAKE", counts[1]},
                               {"UNCLEAR", counts[2]},
                               {"total", tally.total(system)}};
    report["faithfulness"] = f;
    any = true;
  }
  if (!any) throw Error("evaluate needs --candidates/--references, --checkpoint with --dev, or --annotations");
  Sink sink(cfg, out);
  *sink << report.dump(2) << "\n";
  return 0;
}

int cmd_gate_report(const Config& cfg, std::ostream& out, std::ostream&) {
  const auto m = load_model(cfg);
  const auto pairs = read_split(cfg, "dev", "dev_facts");
  const auto batches = make_ordered_batches(pairs, m.source, m.target, static_cast<int>(cfg.get_int("batch_size")));
  const auto r = eval::gate_report(m.params, m.cfg, batches, static_cast<std::size_t>(cfg.get_int("top_k")));
  auto list = [](const std::vector<eval::PairGate>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& g : v) a.push_back(ordered_json{{"pair", g.pair}, {"mean", g.mean}});
    return a;
  };
  ordered_json j{{"mean", r.mean},
                 {"std", r.stddev},
                 {"components", r.components},
                 {"top", list(r.top)},
                 {"bottom", list(r.bottom)}};
  Sink sink(cfg, out);
  *sink << j.dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(const Config& cfg, std::ostream& out, std::ostream&) {
  const auto which = cfg.get_string("fusion_check");
  std::vector<model::Fusion> modes;
  if (which == "both" || which == "concat") modes.push_back(model::Fusion::Concat);
  if (which == "both" || which == "gated") modes.push_back(model::Fusion::Gated);
  if (modes.empty()) throw ParseError("gradcheck fusion must be concat, gated or both");
  const auto seed = cfg.train_config().seed;
  bool ok = true;
  for (auto mode : modes) {
    const auto r = model::run_gradcheck(mode, seed);
    const bool pass = r.max_rel_error <= kGradcheckTolerance;
    ok = ok && pass;
    out << "fusion=" << model::to_string(mode) << " max_rel_error=" << r.max_rel_error << " worst=" << r.worst_tensor
        << "[" << r.worst_index << "] checked=" << r.checked << (pass ? " ok" : " FAILED") << "\n";
  }
  return ok ? 0 : 1;
}

}  // namespace

std::string usage() {
  std::string s =
      "usage: ftsum [--config FILE] [--seed N] [--quiet] [--set key=value]... <subcommand> [options]\n"
      "subcommands:";
  for (auto sub : kSubcommands) s += " " + std::string(sub);
  return s + "\n";
}

int dispatch(std::string_view subcommand, const Config& cfg, std::ostream& out, std::ostream& err) {
  using Handler = int (*)(const Config&, std::ostream&, std::ostream&);
  static const std::map<std::string_view, Handler> handlers = {
      {"extract-facts", cmd_extract_facts}, {"stats", cmd_stats},       {"build-vocab", cmd_build_vocab},
      {"train", cmd_train},                 {"decode", cmd_decode},     {"evaluate", cmd_evaluate},
      {"gate-report", cmd_gate_report},     {"gradcheck", cmd_gradcheck},
  };
  auto it = handlers.find(subcommand);
  if (it == handlers.end()) {
    err << "unknown subcommand '" << subcommand << "'\n" << usage();
    return 2;
  }
  try {
    return it->second(cfg, out, err);
  } catch (const std::exception& e) {
    err << "ftsum " << subcommand << ": " << e.what() << "\n";
    return 1;
  }
}

namespace {

struct Binding {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
  std::string fixed;  // for switches: the value stored when present
};

std::string flag_name(std::string_view key) {
  std::string s(key);
  for (auto& c : s)
    if (c == '_') c = '-';
  return "--" + s;
}

const std::map<std::string_view, std::string_view>& subcommand_help() {
  static const std::map<std::string_view, std::string_view> help = {
      {"extract-facts", "fact descriptions from triples and/or dependency parses"},
      {"stats", "corpus length and copy statistics as JSON"},
      {"build-vocab", "write source and target vocabularies"},
      {"train", "train a model and save a checkpoint"},
      {"decode", "beam-search summaries for input sentences"},
      {"evaluate", "ROUGE, perplexity and faithfulness reports"},
      {"gate-report", "context gate statistics on a dataset"},
      {"gradcheck", "finite-difference check of the tiny model"},
  };
  return help;
}

const std::map<std::string_view, std::vector<std::string_view>>& subcommand_keys() {
  static const std::map<std::string_view, std::vector<std::string_view>> keys = {
      {"extract-facts", {"conll", "triples", "output", "labels"}},
      {"stats", {"train", "train_facts", "output"}},
      {"build-vocab", {"train", "train_facts", "min_freq", "max_vocab", "source_vocab", "target_vocab"}},
      {"train",
       {"train", "train_facts", "dev", "dev_facts", "source_vocab", "target_vocab", "embeddings", "checkpoint", "log",
        "fusion", "embed_dim", "hidden_dim", "dropout", "lr", "batch_size", "clip_mode", "clip_lo", "clip_hi",
        "clip_norm", "validate_every", "patience", "max_epochs", "max_steps", "min_freq", "max_vocab"}},
      {"decode", {"checkpoint", "input", "facts", "beam", "max_len", "output", "gate_trace"}},
      {"evaluate",
       {"candidates", "references", "annotations", "checkpoint", "dev", "dev_facts", "batch_size", "output"}},
      {"gate-report", {"checkpoint", "dev", "dev_facts", "top_k", "batch_size", "output"}},
      {"gradcheck", {}},
  };
  return keys;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fact-aware sentence summarization toolkit", "ftsum"};
  app.require_subcommand(1);

  std::string config_file;
  std::optional<long> seed;
  bool quiet = false;
  std::vector<std::string> sets;
  app.add_option("--config", config_file, "key=value configuration file");
  app.add_option("--seed", seed, "random seed");
  app.add_flag("--quiet", quiet, "suppress progress output");
  app.add_option("--set", sets, "override one configuration key (key=value)");

  std::deque<Binding> bindings;
  std::map<std::string_view, CLI::App*> subs;
  for (auto name : kSubcommands) {
    auto* sub = app.add_subcommand(std::string(name), std::string(subcommand_help().at(name)));
    subs[name] = sub;
    for (auto key : subcommand_keys().at(name)) {
      auto& b = bindings.emplace_back();
      b.key = std::string(key);
      b.option = sub->add_option(flag_name(key), b.value, "config key " + b.key);
    }
  }
  auto add_switch = [&](std::string_view sub, const std::string& flag, const std::string& key,
                        const std::string& value, const std::string& help) {
    auto& b = bindings.emplace_back();
    b.key = key;
    b.fixed = value;
    b.option = subs.at(sub)->add_flag(flag, help);
  };
  add_switch("extract-facts", "--no-reporting-filter", "reporting_filter", "false",
             "keep facts ending in a reporting verb");
  add_switch("evaluate", "--stem", "stem", "true", "Porter-stem tokens before scoring");
  {
    auto& b = bindings.emplace_back();
    b.key = "fusion_check";
    b.option = subs.at("gradcheck")->add_option("--fusion", b.value, "concat, gated or both");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    // Name the offending word when the first positional is not a subcommand.
    for (int i = 1; i < argc; ++i) {
      const std::string_view a = argv[i];
      if (a == "--config" || a == "--seed" || a == "--set") {
        ++i;
        continue;
      }
      if (a.starts_with("-")) continue;
      if (std::find(kSubcommands.begin(), kSubcommands.end(), a) == kSubcommands.end()) {
        err << "unknown subcommand '" << a << "'\n" << usage();
        return 2;
      }
      break;
    }
    err << e.what() << "\n" << usage();
    return 2;
  }

  std::string_view chosen;
  for (auto& [name, sub] : subs)
    if (sub->parsed()) chosen = name;

  try {
    std::vector<std::string> overrides = sets;
    for (const auto& b : bindings)
      if (b.option->count() > 0) overrides.push_back(b.key + "=" + (b.fixed.empty() ? b.value : b.fixed));
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (quiet) overrides.push_back("quiet=true");
    std::optional<std::filesystem::path> file;
    if (!config_file.empty()) file = config_file;
    const auto cfg = parse_config(file, overrides);
    return dispatch(chosen, cfg, out, err);
  } catch (const std::exception& e) {
    err << "ftsum: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ftsum::cli
