#include "spanex/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

namespace spanex {

namespace {

constexpr int kLookupValuePool = 4;  // distinct values across a lookup dataset
constexpr int kCueFillers = 5;       // filler words around the cue
constexpr int kOverlapSentenceLen = 4;
constexpr int kOverlapFillerPool = 8;  // distractor words for sentence B

const std::vector<std::string> kCueWords = {"great", "awful"};  // label 0, label 1

// k distinct indices from [0, n) by partial Fisher-Yates, in draw order.
std::vector<int> sample_indices(int n, int k, std::mt19937_64& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

Vocabulary build_vocab(std::vector<std::string> tokens, int vocab_size) {
  if (static_cast<int>(tokens.size()) > vocab_size) {
    throw std::invalid_argument("synthetic vocabulary needs " +
                                std::to_string(tokens.size()) +
                                " tokens but only " + std::to_string(vocab_size) +
                                " were allowed");
  }
  const std::size_t missing = static_cast<std::size_t>(vocab_size) - tokens.size();
  if (missing > 0) {
    std::vector<std::string> exclude = tokens;
    for (auto& w : synthetic_words(missing, exclude)) tokens.push_back(std::move(w));
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

std::vector<std::string> specials() {
  return {Vocabulary::kPad, Vocabulary::kUnk, Vocabulary::kCls, Vocabulary::kSep};
}

// Collects train_n + dev_n distinct examples from a generator functor that
// returns (dedupe key, example).
template <typename Gen>
void fill_splits(Task& task, int train_n, int dev_n, Gen&& gen) {
  std::set<std::string> seen;
  const int total = train_n + dev_n;
  int stale = 0;
  while (static_cast<int>(seen.size()) < total) {
    auto [key, example] = gen();
    if (!seen.insert(std::move(key)).second) {
      if (++stale > 1000 * total) {
        throw std::runtime_error("synthetic generator cannot produce " +
                                 std::to_string(total) + " distinct examples");
      }
      continue;
    }
    stale = 0;
    if (static_cast<int>(task.train.size()) < train_n) {
      task.train.push_back(std::move(example));
    } else {
      task.dev.push_back(std::move(example));
    }
  }
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

std::vector<std::string> synthetic_words(std::size_t count,
                                         const std::vector<std::string>& exclude) {
  const std::set<std::string> banned(exclude.begin(), exclude.end());
  std::vector<std::string> out;
  out.reserve(count);
  auto emit = [&](std::string word) {
    if (out.size() < count && banned.find(word) == banned.end()) {
      out.push_back(std::move(word));
    }
  };
  for (char a = 'a'; a <= 'z' && out.size() < count; ++a) {
    for (char b = 'a'; b <= 'z' && out.size() < count; ++b) {
      emit({a, b});
    }
  }
  for (char a = 'a'; a <= 'z' && out.size() < count; ++a) {
    for (char b = 'a'; b <= 'z' && out.size() < count; ++b) {
      for (char c = 'a'; c <= 'z' && out.size() < count; ++c) {
        emit({a, b, c});
      }
    }
  }
  if (out.size() < count) {
    throw std::invalid_argument("synthetic_words: word space exhausted");
  }
  return out;
}

SyntheticTask make_lookup_qa(int train_n, int dev_n, std::uint64_t seed,
                             int vocab_size, int pairs) {
  if (train_n < 1 || dev_n < 0) throw std::invalid_argument("lookup_qa: bad split sizes");
  if (pairs < 1) throw std::invalid_argument("lookup_qa: pairs must be >= 1");
  std::vector<std::string> reserved = {":", ";", "?", "what", "is"};
  const int budget = vocab_size - 4 - static_cast<int>(reserved.size());
  // The key pool equals the pair count: every source permutes the same keys,
  // so all (arrangement, query) combinations occur in a 200-example train
  // split and the dev split probes extraction of fresh value assignments.
  const int n_keys = pairs;
  const int n_values = std::min(budget - n_keys, kLookupValuePool);
  if (budget < n_keys + 2 || n_values < 2) {
    throw std::invalid_argument("lookup_qa: vocab_size " + std::to_string(vocab_size) +
                                " too small");
  }
  auto words = synthetic_words(static_cast<std::size_t>(n_keys + n_values), reserved);
  const std::vector<std::string> keys(words.begin(), words.begin() + n_keys);
  const std::vector<std::string> values(words.begin() + n_keys, words.end());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_value(0, n_values - 1);
  std::uniform_int_distribution<int> pick_query(0, pairs - 1);

  SyntheticTask out;
  out.task.name = "lookup_qa";
  out.task.kind = TaskKind::qa;
  out.task.metric = "exact_match";

  fill_splits(out.task, train_n, dev_n, [&] {
    const auto key_idx = sample_indices(n_keys, pairs, rng);
    std::vector<int> value_idx;
    for (int i = 0; i < pairs; ++i) value_idx.push_back(pick_value(rng));
    const int query = pick_query(rng);

    std::string source;
    CharSpan answer{0, 0};
    for (int i = 0; i < pairs; ++i) {
      if (i > 0) source += " ; ";
      source += keys[static_cast<std::size_t>(key_idx[static_cast<std::size_t>(i)])];
      source += " : ";
      const std::string& value = values[static_cast<std::size_t>(value_idx[static_cast<std::size_t>(i)])];
      if (i == query) answer = {source.size(), source.size() + value.size()};
      source += value;
    }
    const std::string auxiliary =
        "what is " + keys[static_cast<std::size_t>(key_idx[static_cast<std::size_t>(query)])] + " ?";
    SpanExample ex = qa_to_span(source, auxiliary, answer, false);
    return std::pair(source + '\x1f' + auxiliary, std::move(ex));
  });

  std::vector<std::string> tokens = specials();
  tokens.insert(tokens.end(), reserved.begin(), reserved.end());
  tokens.insert(tokens.end(), keys.begin(), keys.end());
  tokens.insert(tokens.end(), values.begin(), values.end());
  out.vocab = build_vocab(std::move(tokens), vocab_size);
  return out;
}

SyntheticTask make_cue_classification(int train_n, int dev_n, std::uint64_t seed,
                                      int vocab_size) {
  if (train_n < 1 || dev_n < 0) {
    throw std::invalid_argument("cue_classification: bad split sizes");
  }
  const LabelSet labels({"positive", "negative"});
  std::vector<std::string> reserved = {"positive", "negative", "or", "?"};
  reserved.insert(reserved.end(), kCueWords.begin(), kCueWords.end());
  const int n_fillers = vocab_size - 4 - static_cast<int>(reserved.size());
  if (n_fillers < kCueFillers) {
    throw std::invalid_argument("cue_classification: vocab_size " +
                                std::to_string(vocab_size) + " too small");
  }
  const auto fillers = synthetic_words(static_cast<std::size_t>(n_fillers), reserved);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_label(0, 1);
  std::uniform_int_distribution<int> pick_slot(0, kCueFillers);

  SyntheticTask out;
  out.task.name = "cue_classification";
  out.task.kind = TaskKind::classification;
  out.task.metric = "accuracy";
  out.task.labels = labels;

  fill_splits(out.task, train_n, dev_n, [&] {
    const int label = pick_label(rng);
    std::vector<std::string> sentence;
    for (int idx : sample_indices(n_fillers, kCueFillers, rng)) {
      sentence.push_back(fillers[static_cast<std::size_t>(idx)]);
    }
    sentence.insert(sentence.begin() + pick_slot(rng),
                    kCueWords[static_cast<std::size_t>(label)]);
    const std::string text = join_words(sentence);
    SpanExample ex = classify_to_span(text, std::nullopt, labels, label);
    return std::pair(text, std::move(ex));
  });

  std::vector<std::string> tokens = specials();
  tokens.insert(tokens.end(), reserved.begin(), reserved.end());
  tokens.insert(tokens.end(), fillers.begin(), fillers.end());
  out.vocab = build_vocab(std::move(tokens), vocab_size);
  return out;
}

SyntheticTask make_overlap_regression(int train_n, int dev_n, std::uint64_t seed,
                                      int vocab_size) {
  if (train_n < 1 || dev_n < 0) {
    throw std::invalid_argument("overlap_regression: bad split sizes");
  }
  const BucketSpec buckets(0.0, 1.0, kOverlapSentenceLen + 1);
  // Each rendered bucket string is one vocabulary token, so an option such
  // as "0.25" is a single position the span head can point at.
  std::vector<std::string> reserved = buckets.rendered();
  const int budget = vocab_size - 4 - static_cast<int>(reserved.size());
  // Sentence A permutes one fixed word set; sentence B mixes `overlap`
  // words of A with distractors. Keeping A's word set constant across the
  // dataset makes the per-word presence signals stable enough to learn
  // from a 200-example split while the overlap ratio still depends on
  // both sentences of every example.
  const int n_fillers = std::min(budget - kOverlapSentenceLen, kOverlapFillerPool);
  if (n_fillers < kOverlapSentenceLen) {
    throw std::invalid_argument("overlap_regression: vocab_size " +
                                std::to_string(vocab_size) + " too small");
  }
  const auto pool = synthetic_words(
      static_cast<std::size_t>(kOverlapSentenceLen + n_fillers), reserved);
  const std::vector<std::string> a_set(pool.begin(),
                                       pool.begin() + kOverlapSentenceLen);
  const std::vector<std::string> fillers(pool.begin() + kOverlapSentenceLen,
                                         pool.end());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_overlap(0, kOverlapSentenceLen);

  SyntheticTask out;
  out.task.name = "overlap_regression";
  out.task.kind = TaskKind::regression;
  out.task.metric = "pearson_spearman_avg";
  out.task.buckets = buckets;

  fill_splits(out.task, train_n, dev_n, [&] {
    std::vector<std::string> a_words = a_set;
    std::shuffle(a_words.begin(), a_words.end(), rng);

    const int overlap = pick_overlap(rng);
    const auto shared = sample_indices(kOverlapSentenceLen, overlap, rng);
    const auto extra =
        sample_indices(n_fillers, kOverlapSentenceLen - overlap, rng);
    std::vector<std::string> b_words;
    for (int i : shared) b_words.push_back(a_set[static_cast<std::size_t>(i)]);
    for (int i : extra) b_words.push_back(fillers[static_cast<std::size_t>(i)]);
    std::shuffle(b_words.begin(), b_words.end(), rng);

    const std::string text_a = join_words(a_words);
    const std::string text_b = join_words(b_words);
    const double value =
        static_cast<double>(overlap) / static_cast<double>(kOverlapSentenceLen);
    SpanExample ex = regress_to_span(text_a, text_b, buckets, value);
    return std::pair(text_a + '\x1f' + text_b, std::move(ex));
  });

  std::vector<std::string> tokens = specials();
  tokens.insert(tokens.end(), reserved.begin(), reserved.end());
  tokens.insert(tokens.end(), pool.begin(), pool.end());
  out.vocab = build_vocab(std::move(tokens), vocab_size);
  return out;
}

SyntheticTask generate_synthetic_suite(std::string_view kind, int train_n, int dev_n,
                                       std::uint64_t seed, int vocab_size) {
  if (kind == "lookup_qa") return make_lookup_qa(train_n, dev_n, seed, vocab_size);
  if (kind == "cue_classification") {
    return make_cue_classification(train_n, dev_n, seed, vocab_size);
  }
  if (kind == "overlap_regression") {
    return make_overlap_regression(train_n, dev_n, seed, vocab_size);
  }
  throw std::invalid_argument("unknown synthetic kind '" + std::string(kind) + "'");
}

}  // namespace spanex
