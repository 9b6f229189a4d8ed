#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mbridge/numcore/ops.hpp"

namespace mbridge {

/// Sequence of token ids.
///
/// Captions are stored in decoder-facing form `<bos> w_1 ... w_n <eos>`.
/// Decoders return the generated tokens only (no leading `<bos>`).
struct TokenSequence {
  std::vector<TokenId> ids;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Bidirectional token/id map. Ids 0..3 are reserved for the specials.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kNumSpecials = 4;

  /// Builds a vocabulary from an id→token list whose first four entries are
  /// the specials. Throws InputError on duplicates or a missing special.
  explicit Vocabulary(std::vector<std::string> id_to_token);

  /// Sorted unique content words after the specials. Throws InputError when
  /// no content word is given.
  static Vocabulary from_words(std::span<const std::string> words);

  std::size_t size() const { return id_to_token_.size(); }
  /// Unknown tokens map to `<unk>`.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// `<bos> ids(words) <eos>`.
  TokenSequence encode_caption(std::span<const std::string> words) const;
  /// Token strings with `<pad>`, `<bos>` and `<eos>` removed.
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  static bool is_special(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kNumSpecials); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

/// Encoder-facing tokens S_1..S_N of a caption: drops a leading `<bos>` and
/// trailing `<pad>`, and appends `<eos>` when missing. Throws InputError when
/// the result is empty, longer than `max_len`, or has an interior `<pad>`.
std::vector<TokenId> caption_targets(const TokenSequence& s, std::size_t max_len);

/// Content tokens (specials stripped, cut at the first `<eos>`).
std::vector<TokenId> content_tokens(std::span<const TokenId> ids);

}  // namespace mbridge
