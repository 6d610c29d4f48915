#include "ftsum/gradcheck.hpp"

#include "ftsum/rng.hpp"

namespace ftsum::model {

nn::FiniteDiffReport run_gradcheck(Fusion fusion, std::uint64_t seed, const GradcheckSetup& s) {
  ModelConfig cfg;
  cfg.embed_dim = s.embed_dim;
  cfg.hidden_dim = s.hidden_dim;
  cfg.fusion = fusion;
  cfg.source_vocab = s.vocab;
  cfg.target_vocab = s.vocab;
  cfg.dropout = s.dropout ? 0.5 : 0.0;

  Rng rng(seed);
  ModelParams params = ModelParams::zeros(cfg);
  // Every entry, biases included, away from zero so no path is trivially dead.
  ModelParams::visit(params, [&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-0.5, 0.5);
  });

  auto word = [&] { return kNumSpecials + static_cast<int>(rng.index(static_cast<std::uint64_t>(s.vocab - kNumSpecials))); };
  std::vector<Ids> src(static_cast<std::size_t>(s.pairs)), facts(src.size()), tgt(src.size());
  for (std::size_t r = 0; r < src.size(); ++r) {
    for (int i = 0; i < s.sentence_len; ++i) src[r].push_back(word());
    for (int f = 0; f < s.fact_count; ++f) {
      if (f > 0) facts[r].push_back(kSep);
      for (int i = 0; i < s.fact_len; ++i) facts[r].push_back(word());
    }
    tgt[r].push_back(kBos);
    const int len = s.target_len + static_cast<int>(r % 2);
    for (int i = 0; i < len; ++i) tgt[r].push_back(word());
    tgt[r].push_back(kEos);
  }

  // Batch with padding, built directly from id rows.
  auto pad = [](const std::vector<Ids>& rows, IdMatrix& ids, FlagMatrix& mask) {
    std::size_t len = 0;
    for (const auto& r : rows) len = std::max(len, r.size());
    ids = IdMatrix::Constant(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(len), kPad);
    mask = FlagMatrix::Zero(ids.rows(), ids.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        ids(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1;
      }
  };
  Batch batch;
  pad(src, batch.source_ids, batch.source_mask);
  pad(facts, batch.fact_ids, batch.fact_mask);
  pad(tgt, batch.target_ids, batch.target_mask);
  batch.gamma = (batch.fact_ids.array() != kSep).cast<std::uint8_t>();

  const std::uint64_t dropout_seed = rng.next();
  auto loss = [&](ModelParams* grads) {
    Rng drop(dropout_seed);  // same masks on every evaluation
    LossOptions opt;
    opt.train = s.dropout;
    opt.rng = &drop;
    opt.grads = grads;
    return batch_loss(batch, params, cfg, opt).loss;
  };

  ModelParams grads = nn::zeros_like(params);
  loss(&grads);
  auto pviews = nn::views_of(params);
  const ModelParams& cgrads = grads;
  auto gviews = nn::views_of(cgrads);
  return nn::finite_diff_check([&] { return loss(nullptr); }, pviews, gviews, s.eps);
}

}  // namespace ftsum::model
