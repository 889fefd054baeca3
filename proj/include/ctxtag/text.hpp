#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxtag/layers.hpp"
#include "ctxtag/ops.hpp"

namespace ctxtag {

inline constexpr std::size_t kMaxWords = 30;
inline constexpr std::size_t kMaxVocabWords = 10000;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

using Tokens = std::vector<std::string>;

// Lowercases, splits contraction suffixes (n't 's 're 've 'll 'd 'm) into
// their own tokens and emits every other punctuation mark as a one-character
// token. Bytes >= 0x80 are treated as word characters.
Tokens tokenize(std::string_view text);

std::string join_tokens(std::span<const std::string> tokens);

/// Token <-> id map with PAD = 0 and UNK = 1. Words are ordered by
/// descending frequency, ties lexicographically.
class Vocab {
 public:
  Vocab();

  static Vocab build(std::span<const Tokens> sentences, std::size_t max_words = kMaxVocabWords);
  // Tokens in id order; the first two must be the PAD and UNK markers.
  static Vocab from_tokens(std::vector<std::string> tokens);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // FNV-1a 64 over the newline-joined token list, as 16 hex digits.
  std::string hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct EncodedSentence {
  std::vector<TokenId> ids;  // length max_words, PAD-filled
  Mask mask;                 // true at real tokens
  std::size_t length() const;
};

// Unknown tokens map to UNK; longer inputs keep their first `max_words`.
EncodedSentence encode_pad(const Vocab& vocab, std::span<const std::string> tokens,
                           std::size_t max_words = kMaxWords);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace ctxtag
