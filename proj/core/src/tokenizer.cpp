#include "spanex/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace spanex {

namespace {

bool is_ascii_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c) != 0; }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

struct Word {
  std::string text;  // possibly lowercased; same byte length as the original
  CharSpan span;
};

// Whitespace-delimited words, with each ASCII punctuation byte split out
// as its own word. Non-ASCII bytes are treated as word characters.
std::vector<Word> basic_split(std::string_view text, bool lowercase) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_ascii_space(c)) {
      ++i;
      continue;
    }
    if (is_ascii_punct(c)) {
      words.push_back({std::string(1, text[i]), {i, i + 1}});
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size()) {
      unsigned char w = static_cast<unsigned char>(text[i]);
      if (is_ascii_space(w) || is_ascii_punct(w)) break;
      ++i;
    }
    std::string_view piece = text.substr(start, i - start);
    words.push_back({lowercase ? ascii_lower(piece) : std::string(piece), {start, i}});
  }
  return words;
}

}  // namespace

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens,
                                   std::string continuation_prefix) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.continuation_prefix_ = std::move(continuation_prefix);
  v.reindex();
  return v;
}

void Vocabulary::reindex() {
  ids_.clear();
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = ids_.emplace(tokens_[i], static_cast<int>(i));
    if (!inserted) {
      throw std::invalid_argument("vocabulary: duplicate token '" + tokens_[i] +
                                  "' at ids " + std::to_string(it->second) + " and " +
                                  std::to_string(i));
    }
  }
  auto require = [&](const char* name) {
    auto it = ids_.find(name);
    if (it == ids_.end()) {
      throw std::invalid_argument(std::string("vocabulary: missing special token ") + name);
    }
    return it->second;
  };
  cls_id_ = require(kCls);
  sep_id_ = require(kSep);
  unk_id_ = require(kUnk);
  pad_id_ = require(kPad);
}

Vocabulary Vocabulary::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("vocabulary: cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  // A trailing newline produces no extra entry; an empty final line does.
  if (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("vocabulary: cannot write " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::build_from_corpus(const std::vector<std::string>& texts,
                                         std::size_t max_words, bool lowercase) {
  std::map<std::string, std::size_t> counts;
  std::set<char> chars;
  for (const auto& text : texts) {
    for (const auto& word : basic_split(text, lowercase)) {
      ++counts[word.text];
      for (char c : word.text) chars.insert(c);
    }
  }

  std::vector<std::string> tokens = {kPad, kUnk, kCls, kSep};
  std::set<std::string> seen(tokens.begin(), tokens.end());
  auto add = [&](const std::string& t) {
    if (seen.insert(t).second) tokens.push_back(t);
  };
  for (char c : chars) add(std::string(1, c));
  for (char c : chars) add("##" + std::string(1, c));

  std::vector<std::pair<std::string, std::size_t>> by_count(counts.begin(), counts.end());
  std::stable_sort(by_count.begin(), by_count.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::size_t added = 0;
  for (const auto& [word, count] : by_count) {
    if (added >= max_words) break;
    if (seen.count(word)) continue;
    add(word);
    ++added;
  }
  return from_tokens(std::move(tokens));
}

std::optional<int> Vocabulary::id_of(std::string_view token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSequence wordpiece_tokenize(std::string_view text, const Vocabulary& vocab,
                                 const TokenizerOptions& options) {
  TokenSequence seq;
  const std::string& cont = vocab.continuation_prefix();
  for (const auto& word : basic_split(text, options.lowercase)) {
    if (word.text.size() > options.max_word_chars) {
      seq.tokens.push_back(Vocabulary::kUnk);
      seq.ids.push_back(vocab.unk_id());
      seq.offsets.push_back(word.span);
      continue;
    }
    std::vector<std::string> pieces;
    std::vector<CharSpan> piece_spans;
    bool ok = true;
    std::size_t start = 0;
    while (start < word.text.size()) {
      std::size_t end = word.text.size();
      std::optional<int> match;
      std::string candidate;
      while (end > start) {
        candidate = word.text.substr(start, end - start);
        if (start > 0) candidate = cont + candidate;
        if ((match = vocab.id_of(candidate))) break;
        --end;
      }
      if (!match) {
        ok = false;
        break;
      }
      pieces.push_back(candidate);
      piece_spans.push_back({word.span.begin + start, word.span.begin + end});
      start = end;
    }
    if (!ok) {
      seq.tokens.push_back(Vocabulary::kUnk);
      seq.ids.push_back(vocab.unk_id());
      seq.offsets.push_back(word.span);
      continue;
    }
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      seq.ids.push_back(*vocab.id_of(pieces[i]));
      seq.tokens.push_back(std::move(pieces[i]));
      seq.offsets.push_back(piece_spans[i]);
    }
  }
  return seq;
}

ModelInput encode_pair(const TokenSequence& source, const TokenSequence& auxiliary,
                       std::size_t max_len, const Vocabulary& vocab) {
  if (max_len < 3) {
    throw std::invalid_argument("encode_pair: max_len must be at least 3, got " +
                                std::to_string(max_len));
  }
  std::size_t m = source.size();
  std::size_t n = auxiliary.size();
  if (m + n + 2 > max_len) {
    std::size_t budget = max_len - 2;
    n = budget > m ? budget - m : 0;  // auxiliary tail goes first
    if (m + n > budget) m = budget;   // then the source tail
  }
  if (m == 0) {
    throw std::runtime_error("encode_pair: source empty after truncation, no span to extract");
  }

  ModelInput out;
  const std::size_t p = m + n + 2;
  out.ids.reserve(p);
  out.ids.push_back(vocab.cls_id());
  out.ids.insert(out.ids.end(), source.ids.begin(), source.ids.begin() + static_cast<long>(m));
  out.ids.push_back(vocab.sep_id());
  out.ids.insert(out.ids.end(), auxiliary.ids.begin(),
                 auxiliary.ids.begin() + static_cast<long>(n));

  out.segment_ids.assign(p, 0);
  std::fill(out.segment_ids.begin() + static_cast<long>(m + 2), out.segment_ids.end(), 1);
  out.position_ids.resize(p);
  for (std::size_t t = 0; t < p; ++t) out.position_ids[t] = static_cast<int>(t);
  out.source_mask.assign(p, false);
  for (std::size_t t = 1; t <= m; ++t) out.source_mask[t] = true;
  out.source_token_count = m;
  out.auxiliary_token_count = n;
  return out;
}

TokenSpan align_char_span(CharSpan char_range, const TokenSequence& seq) {
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.offsets[i].overlaps(char_range)) {
      if (!first) first = i;
      last = i;
    }
  }
  if (!first) {
    throw std::runtime_error("align_char_span: range [" + std::to_string(char_range.begin) +
                             ", " + std::to_string(char_range.end) +
                             ") overlaps no token offsets");
  }
  return {*first, *last};
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // leading whitespace is dropped
  for (char c : text) {
    if (is_ascii_space(static_cast<unsigned char>(c))) {
      in_space = true;
    } else {
      if (in_space && !out.empty()) out.push_back(' ');
      out.push_back(c);
      in_space = false;
    }
  }
  return out;
}

}  // namespace spanex
