#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mbridge::metrics {

using Tokens = std::vector<std::string>;

/// One scored caption with its references. Specials are already stripped.
struct EvalEntry {
  std::int64_t id = 0;
  Tokens candidate;
  std::vector<Tokens> references;
};

/// Candidate/reference pairs keyed by id.
class EvalCorpus {
 public:
  /// Strips `<pad>`, `<bos>` and `<eos>`. Throws InputError when no
  /// reference is given or the id is already present.
  void add(std::int64_t id, Tokens candidate, std::vector<Tokens> references);

  const std::vector<EvalEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<EvalEntry> entries_;
};

/// Corpus-level n-gram statistics behind BLEU.
struct BleuStats {
  std::vector<std::size_t> matches;  // clipped matches per order
  std::vector<std::size_t> totals;   // candidate n-grams per order
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;  // closest reference length, ties to the shorter
};

BleuStats bleu_stats(const EvalCorpus& corpus, int max_n = 4);
/// BLEU-1..BLEU-max_n. No smoothing: a zero precision at any order up to n
/// makes BLEU-n zero. Throws InputError for an empty corpus.
std::vector<double> bleu(const EvalCorpus& corpus, int max_n = 4);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
/// LCS-based F_beta of one candidate against one reference.
double rouge_l_pair(std::span<const std::string> candidate, std::span<const std::string> reference,
                    double beta = 1.2);
/// Mean over ids of the best F_beta across references.
double rouge_l(const EvalCorpus& corpus, double beta = 1.2);

/// Per-id CIDEr scores (TF-IDF cosine averaged over references and orders
/// 1..max_n, times 10). IDF comes from the reference sets; at least two ids
/// are required.
std::vector<double> cider_per_id(const EvalCorpus& corpus, int max_n = 4);
double cider(const EvalCorpus& corpus, int max_n = 4);

struct EvalReport {
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  double cider = 0.0;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// All metrics. `threads` > 1 splits per-id work across threads; the
/// reduction order is fixed so results do not depend on it.
EvalReport evaluate(const EvalCorpus& corpus, unsigned threads = 1);

/// Thread cap from MBRIDGE_THREADS (default 1).
unsigned threads_from_env();

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace mbridge::metrics
