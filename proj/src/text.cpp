#include "ctxtag/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>

#include "ctxtag/error.hpp"

namespace ctxtag {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

constexpr std::array<std::string_view, 6> kApostropheSuffixes = {"s", "re", "ve", "ll", "d", "m"};

std::string lowercase_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Folds the typographic apostrophe (U+2019) onto ASCII so contractions in
// copied policy text split the same way.
std::string fold_apostrophes(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 && static_cast<unsigned char>(text[i + 2]) == 0x99) {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

}  // namespace

Tokens tokenize(std::string_view raw) {
  const std::string text = lowercase_ascii(fold_apostrophes(raw));
  Tokens out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
      ++i;
    } else if (is_word_byte(c)) {
      word.push_back(static_cast<char>(c));
      ++i;
    } else if (c == '\'') {
      // Word characters directly after the apostrophe.
      std::size_t end = i + 1;
      while (end < n && is_word_byte(static_cast<unsigned char>(text[end]))) ++end;
      const std::string_view suffix(text.data() + i + 1, end - i - 1);
      if (suffix == "t" && !word.empty() && word.back() == 'n') {
        word.pop_back();
        flush();
        out.emplace_back("n't");
        i = end;
      } else if (std::find(kApostropheSuffixes.begin(), kApostropheSuffixes.end(), suffix) !=
                 kApostropheSuffixes.end()) {
        flush();
        out.push_back("'" + std::string(suffix));
        i = end;
      } else {
        flush();
        out.emplace_back("'");
        ++i;
      }
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  flush();
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Vocab::Vocab() : tokens_{std::string(kPadToken), std::string(kUnkToken)} {
  index_.emplace(tokens_[kPadId], kPadId);
  index_.emplace(tokens_[kUnkId], kUnkId);
}

Vocab Vocab::build(std::span<const Tokens> sentences, std::size_t max_words) {
  std::map<std::string, std::size_t> counts;
  for (const Tokens& s : sentences) {
    for (const std::string& t : s) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_words) ranked.resize(max_words);
  std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken)};
  for (auto& [token, count] : ranked) tokens.push_back(token);
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[kPadId] != kPadToken || tokens[kUnkId] != kUnkToken) {
    throw DataError("vocabulary must start with " + std::string(kPadToken) + " and " + std::string(kUnkToken));
  }
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary entry '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const std::string& t : tokens_) out << t << '\n';
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw DataError("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[id];
}

bool Vocab::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

std::string Vocab::hash() const {
  std::string joined;
  for (const std::string& t : tokens_) {
    joined += t;
    joined.push_back('\n');
  }
  return fnv1a_hex(joined);
}

std::size_t EncodedSentence::length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

EncodedSentence encode_pad(const Vocab& vocab, std::span<const std::string> tokens, std::size_t max_words) {
  EncodedSentence out{std::vector<TokenId>(max_words, kPadId), Mask(max_words, false)};
  const std::size_t kept = std::min(tokens.size(), max_words);
  for (std::size_t i = 0; i < kept; ++i) {
    out.ids[i] = vocab.id(tokens[i]);
    out.mask[i] = true;
  }
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ctxtag
