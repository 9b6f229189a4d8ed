#include "mbridge/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "mbridge/numcore/errors.hpp"

namespace mbridge::metrics {

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

bool is_special(const std::string& t) { return t == "<pad>" || t == "<bos>" || t == "<eos>"; }

Tokens strip(Tokens tokens) {
  tokens.erase(std::remove_if(tokens.begin(), tokens.end(), is_special), tokens.end());
  return tokens;
}

NgramCounts count_ngrams(const Tokens& tokens, int n) {
  NgramCounts counts;
  const auto len = static_cast<std::ptrdiff_t>(tokens.size());
  for (std::ptrdiff_t i = 0; i + n <= len; ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) {
      if (k) key.push_back('\x1f');
      key += tokens[static_cast<std::size_t>(i + k)];
    }
    ++counts[key];
  }
  return counts;
}

void require_nonempty(const EvalCorpus& corpus, const char* metric) {
  if (corpus.empty()) throw InputError(std::string(metric) + ": empty corpus");
}

// Runs fn(i) for i in [0, n) on up to `threads` threads.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct EntryBleu {
  std::vector<std::size_t> matches, totals;
  std::size_t cand_len = 0, ref_len = 0;
};

EntryBleu entry_bleu(const EvalEntry& e, int max_n) {
  EntryBleu out;
  out.matches.assign(static_cast<std::size_t>(max_n), 0);
  out.totals.assign(static_cast<std::size_t>(max_n), 0);
  out.cand_len = e.candidate.size();
  std::size_t best = e.references.front().size();
  for (const auto& r : e.references) {
    const auto diff = [&](std::size_t len) {
      return len > out.cand_len ? len - out.cand_len : out.cand_len - len;
    };
    if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) best = r.size();
  }
  out.ref_len = best;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = count_ngrams(e.candidate, n);
    NgramCounts max_ref;
    for (const auto& r : e.references) {
      for (const auto& [g, c] : count_ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    std::size_t total = 0, match = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      const auto it = max_ref.find(g);
      if (it != max_ref.end()) match += std::min(c, it->second);
    }
    out.totals[static_cast<std::size_t>(n - 1)] = total;
    out.matches[static_cast<std::size_t>(n - 1)] = match;
  }
  return out;
}

BleuStats reduce_bleu(const std::vector<EntryBleu>& per_entry, int max_n) {
  BleuStats stats;
  stats.matches.assign(static_cast<std::size_t>(max_n), 0);
  stats.totals.assign(static_cast<std::size_t>(max_n), 0);
  for (const auto& e : per_entry) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(max_n); ++k) {
      stats.matches[k] += e.matches[k];
      stats.totals[k] += e.totals[k];
    }
    stats.candidate_length += e.cand_len;
    stats.reference_length += e.ref_len;
  }
  return stats;
}

std::vector<double> bleu_from_stats(const BleuStats& s, int max_n) {
  std::vector<double> scores(static_cast<std::size_t>(max_n), 0.0);
  if (s.candidate_length == 0) return scores;
  const double c = static_cast<double>(s.candidate_length);
  const double r = static_cast<double>(s.reference_length);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 1; n <= max_n; ++n) {
    const auto k = static_cast<std::size_t>(n - 1);
    if (s.matches[k] == 0 || s.totals[k] == 0) zero = true;
    if (!zero) {
      log_sum += std::log(static_cast<double>(s.matches[k]) / static_cast<double>(s.totals[k]));
      scores[k] = bp * std::exp(log_sum / n);
    }
  }
  return scores;
}

double entry_rouge(const EvalEntry& e, double beta) {
  double best = 0.0;
  for (const auto& r : e.references) best = std::max(best, rouge_l_pair(e.candidate, r, beta));
  return best;
}

struct CiderVector {
  std::unordered_map<std::string, double> weights;
  double norm = 0.0;
};

CiderVector tfidf(const NgramCounts& counts, const std::unordered_map<std::string, std::size_t>& df,
                  double log_corpus) {
  CiderVector v;
  for (const auto& [g, c] : counts) {
    const auto it = df.find(g);
    const double d = it == df.end() ? 1.0 : std::max<double>(1.0, static_cast<double>(it->second));
    const double w = static_cast<double>(c) * (log_corpus - std::log(d));
    v.weights.emplace(g, w);
    v.norm += w * w;
  }
  v.norm = std::sqrt(v.norm);
  return v;
}

double cosine(const CiderVector& a, const CiderVector& b) {
  if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
  double dot = 0.0;
  // Accumulate over a sorted key order so the sum is reproducible.
  std::vector<const std::string*> keys;
  keys.reserve(a.weights.size());
  for (const auto& kv : a.weights) keys.push_back(&kv.first);
  std::sort(keys.begin(), keys.end(), [](auto* x, auto* y) { return *x < *y; });
  for (const auto* g : keys) {
    const auto it = b.weights.find(*g);
    if (it != b.weights.end()) dot += a.weights.at(*g) * it->second;
  }
  return dot / (a.norm * b.norm);
}

std::vector<double> cider_scores(const EvalCorpus& corpus, int max_n, unsigned threads) {
  require_nonempty(corpus, "cider");
  if (corpus.size() < 2) throw InputError("cider: IDF needs at least two distinct ids");
  const auto& entries = corpus.entries();
  std::vector<std::unordered_map<std::string, std::size_t>> df(static_cast<std::size_t>(max_n));
  for (const auto& e : entries) {
    for (int n = 1; n <= max_n; ++n) {
      std::set<std::string> seen;
      for (const auto& r : e.references) {
        for (const auto& kv : count_ngrams(r, n)) seen.insert(kv.first);
      }
      for (const auto& g : seen) ++df[static_cast<std::size_t>(n - 1)][g];
    }
  }
  const double log_corpus = std::log(static_cast<double>(entries.size()));
  std::vector<double> scores(entries.size(), 0.0);
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    const auto& e = entries[i];
    double total = 0.0;
    for (int n = 1; n <= max_n; ++n) {
      const auto& table = df[static_cast<std::size_t>(n - 1)];
      const auto cand = tfidf(count_ngrams(e.candidate, n), table, log_corpus);
      double per_n = 0.0;
      for (const auto& r : e.references) per_n += cosine(cand, tfidf(count_ngrams(r, n), table, log_corpus));
      total += per_n / static_cast<double>(e.references.size());
    }
    scores[i] = 10.0 * total / static_cast<double>(max_n);
  });
  return scores;
}

double mean(const std::vector<double>& values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

void EvalCorpus::add(std::int64_t id, Tokens candidate, std::vector<Tokens> references) {
  if (references.empty()) throw InputError("id " + std::to_string(id) + " has no reference");
  for (const auto& e : entries_) {
    if (e.id == id) throw InputError("duplicate id " + std::to_string(id));
  }
  EvalEntry entry{id, strip(std::move(candidate)), {}};
  for (auto& r : references) entry.references.push_back(strip(std::move(r)));
  entries_.push_back(std::move(entry));
}

BleuStats bleu_stats(const EvalCorpus& corpus, int max_n) {
  require_nonempty(corpus, "bleu");
  if (max_n < 1) throw InputError("bleu: max_n must be at least 1");
  std::vector<EntryBleu> per_entry;
  for (const auto& e : corpus.entries()) per_entry.push_back(entry_bleu(e, max_n));
  return reduce_bleu(per_entry, max_n);
}

std::vector<double> bleu(const EvalCorpus& corpus, int max_n) {
  return bleu_from_stats(bleu_stats(corpus, max_n), max_n);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_pair(std::span<const std::string> candidate, std::span<const std::string> reference,
                    double beta) {
  const std::size_t lcs = lcs_length(candidate, reference);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

double rouge_l(const EvalCorpus& corpus, double beta) {
  require_nonempty(corpus, "rouge_l");
  std::vector<double> scores;
  for (const auto& e : corpus.entries()) scores.push_back(entry_rouge(e, beta));
  return mean(scores);
}

std::vector<double> cider_per_id(const EvalCorpus& corpus, int max_n) {
  return cider_scores(corpus, max_n, 1);
}

double cider(const EvalCorpus& corpus, int max_n) { return mean(cider_scores(corpus, max_n, 1)); }

std::string EvalReport::to_json() const {
  std::ostringstream out;
  out << "{\"BLEU-1\": " << format_double(bleu[0]) << ", \"BLEU-2\": " << format_double(bleu[1])
      << ", \"BLEU-3\": " << format_double(bleu[2]) << ", \"BLEU-4\": " << format_double(bleu[3])
      << ", \"ROUGE-L\": " << format_double(rouge_l) << ", \"CIDEr\": " << format_double(cider) << "}";
  return out.str();
}

std::string EvalReport::csv_header() { return "BLEU-1,BLEU-2,BLEU-3,BLEU-4,ROUGE-L,CIDEr"; }

std::string EvalReport::csv_row() const {
  return format_double(bleu[0]) + "," + format_double(bleu[1]) + "," + format_double(bleu[2]) + "," +
         format_double(bleu[3]) + "," + format_double(rouge_l) + "," + format_double(cider);
}

EvalReport evaluate(const EvalCorpus& corpus, unsigned threads) {
  require_nonempty(corpus, "evaluate");
  const auto& entries = corpus.entries();
  std::vector<EntryBleu> per_bleu(entries.size());
  std::vector<double> per_rouge(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    per_bleu[i] = entry_bleu(entries[i], 4);
    per_rouge[i] = entry_rouge(entries[i], 1.2);
  });
  EvalReport report;
  const auto b = bleu_from_stats(reduce_bleu(per_bleu, 4), 4);
  std::copy(b.begin(), b.end(), report.bleu.begin());
  report.rouge_l = mean(per_rouge);
  report.cider = mean(cider_scores(corpus, 4, threads));
  return report;
}

unsigned threads_from_env() {
  const char* value = std::getenv("MBRIDGE_THREADS");
  if (!value) return 1;
  const long n = std::strtol(value, nullptr, 10);
  return n >= 1 ? static_cast<unsigned>(n) : 1u;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("spearman needs two equal-length series of length >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace mbridge::metrics
