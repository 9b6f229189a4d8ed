#include "mbridge/textae/vocabulary.hpp"

#include <algorithm>
#include <set>

#include "mbridge/numcore/errors.hpp"

namespace mbridge {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials{"<pad>", "<bos>", "<eos>", "<unk>"};
  return specials;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> id_to_token) : id_to_token_(std::move(id_to_token)) {
  const auto& specials = special_tokens();
  if (id_to_token_.size() < kNumSpecials ||
      !std::equal(specials.begin(), specials.end(), id_to_token_.begin())) {
    throw InputError("vocabulary must start with <pad>, <bos>, <eos>, <unk>");
  }
  if (id_to_token_.size() <= kNumSpecials) throw InputError("vocabulary has no content words");
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    if (!token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i)).second) {
      throw InputError("duplicate vocabulary entry: " + id_to_token_[i]);
    }
  }
}

Vocabulary Vocabulary::from_words(std::span<const std::string> words) {
  std::set<std::string> unique;
  for (const auto& w : words) {
    if (std::find(special_tokens().begin(), special_tokens().end(), w) == special_tokens().end()) {
      unique.insert(w);
    }
  }
  std::vector<std::string> table = special_tokens();
  table.insert(table.end(), unique.begin(), unique.end());
  return Vocabulary(std::move(table));
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) != 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

TokenSequence Vocabulary::encode_caption(std::span<const std::string> words) const {
  TokenSequence s;
  s.ids.reserve(words.size() + 2);
  s.ids.push_back(kBos);
  for (const auto& w : words) s.ids.push_back(id(w));
  s.ids.push_back(kEos);
  return s;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> words;
  for (const TokenId t : ids) {
    if (t == kPad || t == kBos || t == kEos) continue;
    words.push_back(token(t));
  }
  return words;
}

std::vector<TokenId> caption_targets(const TokenSequence& s, std::size_t max_len) {
  std::size_t begin = 0;
  std::size_t end = s.ids.size();
  if (begin < end && s.ids[begin] == Vocabulary::kBos) ++begin;
  while (end > begin && s.ids[end - 1] == Vocabulary::kPad) --end;
  std::vector<TokenId> out(s.ids.begin() + static_cast<std::ptrdiff_t>(begin),
                           s.ids.begin() + static_cast<std::ptrdiff_t>(end));
  if (std::find(out.begin(), out.end(), Vocabulary::kPad) != out.end()) {
    throw InputError("caption has an interior <pad>");
  }
  if (out.empty()) throw InputError("empty caption");
  if (out.back() != Vocabulary::kEos) out.push_back(Vocabulary::kEos);
  if (out.size() > max_len) {
    throw InputError("caption length " + std::to_string(out.size()) + " exceeds max_len " +
                     std::to_string(max_len));
  }
  return out;
}

std::vector<TokenId> content_tokens(std::span<const TokenId> ids) {
  std::vector<TokenId> out;
  for (const TokenId t : ids) {
    if (t == Vocabulary::kEos) break;
    if (t == Vocabulary::kPad || t == Vocabulary::kBos) continue;
    out.push_back(t);
  }
  return out;
}

}  // namespace mbridge
