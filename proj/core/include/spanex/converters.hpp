#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "spanex/reformulation.hpp"

namespace spanex {

// Public-layout converters. TSV columns are located by header name, so extra
// columns (as in the GLUE distributions) are tolerated.
enum class GlueFormat { sst2, mnli, rte, stsb };

GlueFormat glue_format_from_name(std::string_view name);
std::string_view glue_format_name(GlueFormat format);

// The option list / bucket range each converted dataset is scored against.
LabelSet glue_labels(GlueFormat format);  // throws for stsb
BucketSpec stsb_buckets();                // [0, 5] in 21 steps of 0.25

std::vector<SpanExample> convert_glue_tsv(const std::string& path, GlueFormat format);

// SQuAD-style JSON (data -> paragraphs -> qas). With append_unanswerable,
// every source gains a trailing "unanswerable" token and impossible
// questions point their gold span at it.
std::vector<SpanExample> convert_squad_json(const std::string& path,
                                            bool append_unanswerable = false);

}  // namespace spanex
