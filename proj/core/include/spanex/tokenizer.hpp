#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace spanex {

/// Half-open [begin, end) byte range into a UTF-8 string.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool empty() const { return end <= begin; }
  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool overlaps(const CharSpan& other) const {
    return begin < other.end && other.begin < end;
  }
  bool operator==(const CharSpan&) const = default;
};

/// Inclusive [first, last] token index range.
struct TokenSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  bool operator==(const TokenSpan&) const = default;
};

/// Subword vocabulary with dense ids starting at 0. The four special
/// tokens [CLS], [SEP], [UNK], [PAD] must be present and distinct.
class Vocabulary {
 public:
  static constexpr const char* kCls = "[CLS]";
  static constexpr const char* kSep = "[SEP]";
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kPad = "[PAD]";

  /// Builds from an explicit token list; throws std::invalid_argument on
  /// duplicates or missing specials.
  static Vocabulary from_tokens(std::vector<std::string> tokens,
                                std::string continuation_prefix = "##");

  /// Loads a newline-delimited token file (line number = id).
  static Vocabulary from_file(const std::string& path);

  /// Frequency-based builder for synthetic corpora: specials, then every
  /// character seen (plus its continuation form), then the top-K whole
  /// words by descending count (ties broken alphabetically).
  static Vocabulary build_from_corpus(const std::vector<std::string>& texts,
                                      std::size_t max_words,
                                      bool lowercase = true);

  std::optional<int> id_of(std::string_view token) const;
  const std::string& token_of(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& continuation_prefix() const { return continuation_prefix_; }

  int cls_id() const { return cls_id_; }
  int sep_id() const { return sep_id_; }
  int unk_id() const { return unk_id_; }
  int pad_id() const { return pad_id_; }

  void save(const std::string& path) const;

 private:
  struct TokenHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int, TokenHash, std::equal_to<>> ids_;
  std::string continuation_prefix_;
  int cls_id_ = -1, sep_id_ = -1, unk_id_ = -1, pad_id_ = -1;

  void reindex();
};

/// Parallel token strings, vocabulary ids, and source-text byte offsets.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<int> ids;
  std::vector<CharSpan> offsets;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

/// Encoded pair layout: [CLS], m source tokens, [SEP], n auxiliary tokens.
/// p = m + n + 2; source_mask is true exactly at positions 1..m.
struct ModelInput {
  std::vector<int> ids;
  std::vector<int> segment_ids;
  std::vector<int> position_ids;
  std::vector<bool> source_mask;
  std::size_t source_token_count = 0;     // m
  std::size_t auxiliary_token_count = 0;  // n

  std::size_t length() const { return ids.size(); }  // p
};

struct TokenizerOptions {
  bool lowercase = true;             // ASCII-only, byte-preserving
  std::size_t max_word_chars = 100;  // longer words degrade to [UNK]
};

/// Greedy longest-match subword tokenization. Words are split on
/// whitespace, ASCII punctuation becomes its own word, and pieces after
/// the first within a word carry the continuation prefix. A word with no
/// full piece cover maps to a single [UNK] spanning the whole word.
TokenSequence wordpiece_tokenize(std::string_view text, const Vocabulary& vocab,
                                 const TokenizerOptions& options = {});

/// Assembles the [CLS] source [SEP] auxiliary layout. When m+n+2 exceeds
/// max_len, auxiliary tokens are dropped from the tail first, then source
/// tokens from the tail. Throws std::runtime_error if no source token
/// survives and std::invalid_argument when max_len < 3.
ModelInput encode_pair(const TokenSequence& source, const TokenSequence& auxiliary,
                       std::size_t max_len, const Vocabulary& vocab);

/// Minimal contiguous token range whose offsets cover char_range. Throws
/// std::runtime_error when the range overlaps no token.
TokenSpan align_char_span(CharSpan char_range, const TokenSequence& seq);

/// Trim, collapse internal whitespace runs to single spaces.
std::string normalize_whitespace(std::string_view text);

}  // namespace spanex
