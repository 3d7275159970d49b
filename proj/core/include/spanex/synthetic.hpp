#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spanex/pipeline.hpp"
#include "spanex/tokenizer.hpp"

namespace spanex {

// A generated task bundled with the exact vocabulary that covers it (padded
// with unused words so the token table has precisely the requested size).
struct SyntheticTask {
  Task task;
  Vocabulary vocab;
};

// "k0 : v0 ; k1 : v1 ; k2 : v2" with auxiliary "what is k1 ?"; the gold span
// is the queried value. Every example permutes the same small key pool, so
// a held-out split tests extraction of fresh value assignments rather than
// unseen keys. Scored by exact match.
SyntheticTask make_lookup_qa(int train_n, int dev_n, std::uint64_t seed,
                             int vocab_size, int pairs = 3);

// Auxiliary sentence of filler words with one cue word whose identity fixes
// the label; source is the rendered "positive or negative?" option list.
// Scored by accuracy.
SyntheticTask make_cue_classification(int train_n, int dev_n, std::uint64_t seed,
                                      int vocab_size);

// Gold value is the token-overlap ratio between two generated sentences,
// bucketed onto [0, 1]. Scored by the Pearson/Spearman average.
SyntheticTask make_overlap_regression(int train_n, int dev_n, std::uint64_t seed,
                                      int vocab_size);

// Dispatch by kind name: lookup_qa | cue_classification | overlap_regression.
// All generators are seed-deterministic and emit disjoint train/dev splits.
SyntheticTask generate_synthetic_suite(std::string_view kind, int train_n, int dev_n,
                                       std::uint64_t seed, int vocab_size);

// i-th two/three-letter word from a fixed enumeration, skipping any word in
// `exclude` (reserved template words stay unique in the vocabulary).
std::vector<std::string> synthetic_words(std::size_t count,
                                         const std::vector<std::string>& exclude);

}  // namespace spanex
