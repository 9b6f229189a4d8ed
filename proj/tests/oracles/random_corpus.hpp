#pragma once

#include <string>
#include <vector>

#include "mbridge/metrics/metrics.hpp"
#include "mbridge/numcore/rng.hpp"
#include "oracles/metrics_oracle.hpp"

namespace oracle {

/// Small random corpus over a tiny word pool, so n-gram overlaps are common.
/// Returned both as an oracle item list and as the library's EvalCorpus.
struct RandomCorpus {
  std::vector<Item> items;
  mbridge::metrics::EvalCorpus corpus;
};

inline RandomCorpus random_corpus(mbridge::Rng& rng) {
  static const std::vector<std::string> pool{"a", "red", "blue", "circle", "square", "left", "of", "and"};
  const auto sentence = [&](std::size_t min_len) {
    Sentence s(min_len + rng.index(6));
    for (auto& w : s) w = pool[rng.index(pool.size())];
    return s;
  };
  RandomCorpus out;
  const std::size_t n_ids = 2 + rng.index(7);
  for (std::size_t i = 0; i < n_ids; ++i) {
    Item item;
    item.candidate = sentence(rng.index(4) == 0 ? 0 : 1);
    const std::size_t n_refs = 1 + rng.index(3);
    for (std::size_t r = 0; r < n_refs; ++r) item.references.push_back(sentence(1));
    out.corpus.add(static_cast<std::int64_t>(i), item.candidate, item.references);
    out.items.push_back(std::move(item));
  }
  return out;
}

}  // namespace oracle
