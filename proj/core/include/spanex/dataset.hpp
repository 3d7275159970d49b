#pragma once

#include <string>
#include <vector>

#include "spanex/reformulation.hpp"

namespace spanex {

// JSONL schema, one example per line:
//   {"task_kind": "...", "source": "...", "auxiliary": "...",
//    "gold_span": [begin, end], "label": 1, "value": 2.5}
// label and value are optional. gold_span must lie within the source text.
// Errors carry the offending line number.
std::vector<SpanExample> load_dataset(const std::string& path);

// Atomic write (temp file + rename).
void save_dataset(const std::vector<SpanExample>& examples, const std::string& path);

std::string example_to_json_line(const SpanExample& example);
SpanExample example_from_json_line(const std::string& line);

}  // namespace spanex
