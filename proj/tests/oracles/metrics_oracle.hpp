#pragma once

// Brute-force caption metrics used to cross-check the library. Plain loops
// over token vectors: no hashing, no shared helpers with the library.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace oracle {

using Sentence = std::vector<std::string>;

struct Item {
  Sentence candidate;
  std::vector<Sentence> references;
};

inline std::vector<Sentence> grams(const Sentence& s, int n) {
  std::vector<Sentence> out;
  for (int i = 0; i + n <= static_cast<int>(s.size()); ++i) out.emplace_back(s.begin() + i, s.begin() + i + n);
  return out;
}

inline int occurrences(const std::vector<Sentence>& list, const Sentence& g) {
  int c = 0;
  for (const auto& x : list) c += x == g ? 1 : 0;
  return c;
}

inline std::vector<double> bleu(const std::vector<Item>& items, int max_n) {
  std::vector<double> match(max_n + 1, 0.0), total(max_n + 1, 0.0);
  double c_len = 0.0, r_len = 0.0;
  for (const auto& it : items) {
    c_len += it.candidate.size();
    int best = -1;
    for (const auto& r : it.references) {
      const int d = std::abs(static_cast<int>(r.size()) - static_cast<int>(it.candidate.size()));
      const int bd = best < 0 ? 1 << 30 : std::abs(best - static_cast<int>(it.candidate.size()));
      if (d < bd || (d == bd && static_cast<int>(r.size()) < best)) best = static_cast<int>(r.size());
    }
    r_len += best;
    for (int n = 1; n <= max_n; ++n) {
      const auto cg = grams(it.candidate, n);
      total[n] += cg.size();
      std::vector<Sentence> done;
      for (const auto& g : cg) {
        if (occurrences(done, g) > 0) continue;
        done.push_back(g);
        int ref_max = 0;
        for (const auto& r : it.references) ref_max = std::max(ref_max, occurrences(grams(r, n), g));
        match[n] += std::min(occurrences(cg, g), ref_max);
      }
    }
  }
  std::vector<double> out(max_n, 0.0);
  if (c_len == 0.0) return out;
  const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  for (int n = 1; n <= max_n; ++n) {
    double logs = 0.0;
    bool zero = false;
    for (int k = 1; k <= n; ++k) {
      if (match[k] == 0.0 || total[k] == 0.0) zero = true;
      else logs += std::log(match[k] / total[k]);
    }
    out[n - 1] = zero ? 0.0 : bp * std::exp(logs / n);
  }
  return out;
}

inline int lcs(const Sentence& a, const Sentence& b) {
  std::vector<std::vector<int>> t(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;) {
    for (std::size_t j = b.size(); j-- > 0;) {
      t[i][j] = a[i] == b[j] ? t[i + 1][j + 1] + 1 : std::max(t[i + 1][j], t[i][j + 1]);
    }
  }
  return t[0][0];
}

inline double rouge_l(const std::vector<Item>& items, double beta = 1.2) {
  double sum = 0.0;
  for (const auto& it : items) {
    double best = 0.0;
    for (const auto& r : it.references) {
      const int l = lcs(it.candidate, r);
      if (l == 0) continue;
      const double p = static_cast<double>(l) / it.candidate.size();
      const double rc = static_cast<double>(l) / r.size();
      best = std::max(best, (1 + beta * beta) * p * rc / (rc + beta * beta * p));
    }
    sum += best;
  }
  return sum / items.size();
}

inline double cider(const std::vector<Item>& items, int max_n = 4) {
  const double n_docs = static_cast<double>(items.size());
  double corpus = 0.0;
  for (const auto& it : items) {
    double score = 0.0;
    for (int n = 1; n <= max_n; ++n) {
      const auto doc_freq = [&](const Sentence& g) {
        int df = 0;
        for (const auto& other : items) {
          bool found = false;
          for (const auto& r : other.references) found = found || occurrences(grams(r, n), g) > 0;
          df += found ? 1 : 0;
        }
        return std::max(1, df);
      };
      const auto weights = [&](const Sentence& s) {
        std::vector<std::pair<Sentence, double>> w;
        const auto gs = grams(s, n);
        for (const auto& g : gs) {
          bool seen = false;
          for (const auto& e : w) seen = seen || e.first == g;
          if (!seen) w.emplace_back(g, occurrences(gs, g) * (std::log(n_docs) - std::log(doc_freq(g))));
        }
        return w;
      };
      const auto cw = weights(it.candidate);
      double per_ref = 0.0;
      for (const auto& r : it.references) {
        const auto rw = weights(r);
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (const auto& [g, v] : cw) {
          na += v * v;
          for (const auto& [h, u] : rw) dot += g == h ? v * u : 0.0;
        }
        for (const auto& e : rw) nb += e.second * e.second;
        per_ref += (na == 0.0 || nb == 0.0) ? 0.0 : dot / (std::sqrt(na) * std::sqrt(nb));
      }
      score += per_ref / it.references.size();
    }
    corpus += 10.0 * score / max_n;
  }
  return corpus / items.size();
}

}  // namespace oracle
