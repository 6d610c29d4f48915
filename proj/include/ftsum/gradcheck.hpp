#pragma once

#include "ftsum/model.hpp"

#include <cstdint>

namespace ftsum::model {

/// Shape of the tiny model used for whole-network gradient checks.
struct GradcheckSetup {
  int embed_dim = 8;
  int hidden_dim = 8;
  int vocab = 20;
  int sentence_len = 5;
  int fact_count = 2;
  int fact_len = 3;
  int target_len = 4;
  int pairs = 2;
  double eps = 1e-5;
  bool dropout = false;  // check with a fixed dropout mask
};

/// Random parameters and a random batch drawn from `seed`; analytic gradients
/// of the per-token loss against central differences over every parameter.
nn::FiniteDiffReport run_gradcheck(Fusion fusion, std::uint64_t seed, const GradcheckSetup& setup = {});

}  // namespace ftsum::model
