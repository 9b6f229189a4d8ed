#pragma once

#include <map>
#include <vector>

#include "mbridge/captioner/captioner.hpp"
#include "mbridge/synthdata/synthdata.hpp"

namespace fixtures {

using namespace mbridge;

/// Small synthetic samples grouped by caption length, so any group forms a
/// valid training batch.
inline std::map<std::size_t, std::vector<CaptionSample>> samples_by_length(std::uint64_t seed, std::size_t n,
                                                                           std::size_t d_v = 16) {
  synthdata::CorpusConfig cfg;
  cfg.n_scenes = n;
  cfg.seed = seed;
  cfg.d_v = d_v;
  std::map<std::size_t, std::vector<CaptionSample>> out;
  for (auto& s : synthdata::generate_samples(cfg, synthdata::synthetic_vocabulary())) {
    out[s.caption.ids.size()].push_back(std::move(s));
  }
  return out;
}

inline captioner::CaptionerConfig small_captioner(bool attention, bool use_mtm, std::size_t d_v = 16,
                                                  std::size_t d_e = 6) {
  captioner::CaptionerConfig c;
  c.vocab_size = synthdata::synthetic_vocabulary().size();
  c.bridge_in = use_mtm ? d_e : d_v;
  c.d_emb = 5;
  c.d_h = 7;
  c.attention = attention;
  c.d_v = d_v;
  c.d_att = 4;
  c.max_len = 20;
  return c;
}

}  // namespace fixtures
