#include <cmath>
#include <thread>

#include "doctest.h"
#include "mbridge/metrics/metrics.hpp"
#include "mbridge/numcore/errors.hpp"
#include "oracles/metrics_oracle.hpp"
#include "oracles/random_corpus.hpp"

using namespace mbridge;
using metrics::EvalCorpus;
using metrics::Tokens;
using doctest::Approx;

namespace {

Tokens words(std::initializer_list<const char*> w) { return Tokens(w.begin(), w.end()); }

EvalCorpus single(const Tokens& cand, const Tokens& ref) {
  EvalCorpus c;
  c.add(0, cand, {ref});
  return c;
}

}  // namespace

TEST_CASE("bleu examples") {
  SUBCASE("identity") {
    EvalCorpus c;
    c.add(0, words({"a", "red", "circle", "and", "a", "blue", "square"}), {words({"a", "red", "circle", "and", "a", "blue", "square"})});
    c.add(1, words({"a", "small", "green", "triangle"}), {words({"a", "small", "green", "triangle"})});
    for (double b : metrics::bleu(c)) CHECK(b == 1.0);
  }
  SUBCASE("disjoint") {
    CHECK(metrics::bleu(single(words({"x", "y"}), words({"a", "b"})))[0] == 0.0);
  }
  SUBCASE("clipped unigram precision") {
    const auto stats = metrics::bleu_stats(single(words({"the", "the", "the"}), words({"the", "cat"})), 1);
    CHECK(stats.matches[0] == 1);
    CHECK(stats.totals[0] == 3);
    // Candidate longer than the reference: no brevity penalty.
    CHECK(metrics::bleu(single(words({"the", "the", "the"}), words({"the", "cat"})), 1)[0] == Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("empty corpus") { CHECK_THROWS_AS(metrics::bleu(EvalCorpus{}), InputError); }
}

TEST_CASE("rouge-l examples") {
  CHECK(metrics::rouge_l(single(words({"a", "b"}), words({"a", "b"}))) == 1.0);
  CHECK(metrics::rouge_l(single(words({"a", "b"}), words({"c", "d"}))) == 0.0);
  const auto cand = words({"a", "b", "c", "d"});
  const auto ref = words({"a", "c", "d", "e"});
  CHECK(metrics::lcs_length(cand, ref) == 3);
  CHECK(metrics::rouge_l(single(cand, ref)) == Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(metrics::rouge_l(EvalCorpus{}), InputError);
}

TEST_CASE("cider examples") {
  EvalCorpus c;
  c.add(0, words({"a", "red", "big", "circle"}), {words({"a", "red", "big", "circle"})});
  c.add(1, words({"one", "blue", "small", "square"}), {words({"one", "blue", "small", "square"})});
  c.add(2, words({"two", "green", "tiny", "stars"}), {words({"two", "green", "tiny", "stars"})});
  CHECK(metrics::cider(c) == Approx(10.0).epsilon(1e-12));

  EvalCorpus d;
  d.add(0, words({"x"}), {words({"red", "circle"})});
  d.add(1, words({"y"}), {words({"blue", "square"})});
  CHECK(metrics::cider(d) == 0.0);

  EvalCorpus one;
  one.add(0, words({"a"}), {words({"a"})});
  CHECK_THROWS_AS(metrics::cider(one), InputError);
}

TEST_CASE("cider is invariant under id relabeling") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto rc = oracle::random_corpus(rng);
    EvalCorpus relabeled;
    const auto& e = rc.corpus.entries();
    for (std::size_t i = e.size(); i-- > 0;) relabeled.add(static_cast<std::int64_t>(100 + 7 * i), e[i].candidate, e[i].references);
    CHECK(metrics::cider(relabeled) == Approx(metrics::cider(rc.corpus)).epsilon(1e-12));
  }
}

TEST_CASE("specials are stripped and references are required") {
  EvalCorpus c;
  c.add(0, words({"<bos>", "a", "b", "<eos>", "<pad>"}), {words({"a", "b"})});
  CHECK(c.entries()[0].candidate == words({"a", "b"}));
  CHECK_THROWS_AS(c.add(1, words({"a"}), {}), InputError);
  CHECK_THROWS_AS(c.add(0, words({"a"}), {words({"a"})}), InputError);
}

TEST_CASE("library matches the brute-force oracle on random corpora") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rc = oracle::random_corpus(rng);
    const auto lib_bleu = metrics::bleu(rc.corpus);
    const auto ref_bleu = oracle::bleu(rc.items, 4);
    for (int n = 0; n < 4; ++n) CHECK(std::abs(lib_bleu[n] - ref_bleu[n]) <= 1e-10);
    CHECK(std::abs(metrics::rouge_l(rc.corpus) - oracle::rouge_l(rc.items)) <= 1e-10);
    CHECK(std::abs(metrics::cider(rc.corpus) - oracle::cider(rc.items)) <= 1e-10);
  }
}

TEST_CASE("corrupting a perfect candidate never raises a metric") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    auto rc = oracle::random_corpus(rng);
    EvalCorpus perfect, corrupted;
    const auto& e = rc.corpus.entries();
    const std::size_t victim = rng.index(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
      perfect.add(e[i].id, e[i].references[0], e[i].references);
      Tokens cand = e[i].references[0];
      if (i == victim) cand[rng.index(cand.size())] = "zzz";
      corrupted.add(e[i].id, cand, e[i].references);
    }
    const auto a = metrics::evaluate(perfect);
    const auto b = metrics::evaluate(corrupted);
    for (int n = 0; n < 4; ++n) CHECK(b.bleu[n] <= a.bleu[n]);
    CHECK(b.rouge_l <= a.rouge_l);
    CHECK(b.cider <= a.cider);
  }
}

TEST_CASE("evaluation is pure and thread-count independent") {
  Rng rng(99);
  const auto rc = oracle::random_corpus(rng);
  const auto a = metrics::evaluate(rc.corpus, 1);
  const auto b = metrics::evaluate(rc.corpus, 1);
  const auto c = metrics::evaluate(rc.corpus, 4);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.bleu == c.bleu);
  CHECK(a.rouge_l == c.rouge_l);
  CHECK(a.cider == c.cider);
  for (double v : a.bleu) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(a.cider >= 0.0);
}

TEST_CASE("spearman") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> up{2, 4, 6, 8, 10};
  const std::vector<double> down{5, 3, 2, 1, 0};
  CHECK(metrics::spearman(x, up) == Approx(1.0));
  CHECK(metrics::spearman(x, down) == Approx(-1.0));
  // Ties take average ranks: ranks of y are (1.5, 1.5, 3, 4, 5).
  const std::vector<double> tied{1, 1, 2, 3, 4};
  CHECK(metrics::spearman(x, tied) == Approx(0.9746794344808963));
}
