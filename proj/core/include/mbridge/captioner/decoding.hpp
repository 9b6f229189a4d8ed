#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <vector>

#include "mbridge/numcore/errors.hpp"
#include "mbridge/numcore/ops.hpp"
#include "mbridge/textae/vocabulary.hpp"

namespace mbridge::captioner {

/// An autoregressive scorer: a start state, next-token log-probabilities for
/// a state, and the state after emitting a token.
template <class M>
concept StepDecoder = requires(const M& m, const typename M::State& s, TokenId t) {
  { m.start() } -> std::convertible_to<typename M::State>;
  { m.log_probs(s) } -> std::convertible_to<const std::vector<double>&>;
  { m.advance(s, t) } -> std::convertible_to<typename M::State>;
};

struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;

  /// Length-normalized log-probability.
  double score() const {
    return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size());
  }
};

/// Argmax decoding, ties to the lowest id. Stops after `eos` or max_len tokens.
template <StepDecoder M>
Hypothesis greedy_search(const M& model, std::size_t max_len, TokenId eos = Vocabulary::kEos) {
  Hypothesis out;
  auto state = model.start();
  while (out.tokens.size() < max_len) {
    const std::vector<double>& lp = model.log_probs(state);
    const auto tok = static_cast<TokenId>(argmax(lp));
    out.tokens.push_back(tok);
    out.log_prob += lp[static_cast<std::size_t>(tok)];
    if (tok == eos || out.tokens.size() == max_len) break;
    state = model.advance(state, tok);
  }
  return out;
}

/// Beam search scored by mean log-probability per generated token.
///
/// Each step keeps the `width` best expansions by cumulative log-probability
/// (ties: larger step log-probability, then earlier parent, then lower id).
/// Expansions that emit `eos` or reach max_len are set aside as completed.
/// The greedy completion is always among the candidates, so the result never
/// scores below greedy; width 1 reproduces greedy exactly.
template <StepDecoder M>
Hypothesis beam_search(const M& model, std::size_t width, std::size_t max_len,
                       TokenId eos = Vocabulary::kEos) {
  if (width < 1) throw InputError("beam width must be at least 1");
  using State = typename M::State;
  struct Live {
    Hypothesis hyp;
    State state;
  };
  struct Candidate {
    std::size_t parent;
    TokenId token;
    double total;
    double step;
  };

  std::vector<Hypothesis> completed;
  std::vector<Live> live;
  live.push_back({Hypothesis{}, model.start()});
  while (!live.empty()) {
    std::vector<Candidate> candidates;
    for (std::size_t p = 0; p < live.size(); ++p) {
      const std::vector<double>& lp = model.log_probs(live[p].state);
      for (std::size_t t = 0; t < lp.size(); ++t) {
        candidates.push_back({p, static_cast<TokenId>(t), live[p].hyp.log_prob + lp[t], lp[t]});
      }
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.total != b.total) return a.total > b.total;
                        if (a.step != b.step) return a.step > b.step;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Live> next;
    for (std::size_t c = 0; c < keep; ++c) {
      const auto& cand = candidates[c];
      Hypothesis hyp = live[cand.parent].hyp;
      hyp.tokens.push_back(cand.token);
      hyp.log_prob = cand.total;
      if (cand.token == eos || hyp.tokens.size() >= max_len) {
        completed.push_back(std::move(hyp));
      } else {
        next.push_back({std::move(hyp), model.advance(live[cand.parent].state, cand.token)});
      }
    }
    live = std::move(next);
  }
  completed.push_back(greedy_search(model, max_len, eos));

  std::size_t best = 0;
  for (std::size_t i = 1; i < completed.size(); ++i) {
    if (completed[i].score() > completed[best].score()) best = i;
  }
  return completed[best];
}

}  // namespace mbridge::captioner
