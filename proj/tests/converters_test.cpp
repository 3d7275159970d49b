#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "spanex/converters.hpp"
#include "test_util.hpp"

using namespace spanex;

namespace {

std::string fixture(const std::string& name) {
  return std::string(SPANEX_FIXTURE_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("format names round-trip and reject strangers") {
  for (const auto format : {GlueFormat::sst2, GlueFormat::mnli, GlueFormat::rte,
                            GlueFormat::stsb}) {
    CHECK(glue_format_from_name(glue_format_name(format)) == format);
  }
  CHECK_THROWS_AS(glue_format_from_name("cola"), std::invalid_argument);
}

TEST_CASE("each format carries its option list or bucket range") {
  CHECK(glue_labels(GlueFormat::sst2).descriptions() ==
        std::vector<std::string>{"positive", "negative"});
  CHECK(glue_labels(GlueFormat::mnli).descriptions() ==
        std::vector<std::string>{"entailment", "contradiction", "neutral"});
  CHECK(glue_labels(GlueFormat::rte).descriptions() ==
        std::vector<std::string>{"entailment", "not"});
  CHECK_THROWS_WITH_AS(glue_labels(GlueFormat::stsb),
                       doctest::Contains("regression"), std::invalid_argument);

  const BucketSpec buckets = stsb_buckets();
  CHECK(buckets.min_value() == 0.0);
  CHECK(buckets.max_value() == 5.0);
  CHECK(buckets.count() == 21);
  CHECK(buckets.step() == 0.25);
}

TEST_CASE("sst2 rows become single-sentence classification examples") {
  const auto examples = convert_glue_tsv(fixture("sst2.tsv"), GlueFormat::sst2);
  REQUIRE(examples.size() == 8);

  const SpanExample& first = examples[0];
  CHECK(first.task_kind == TaskKind::classification);
  CHECK(first.source_text == "positive or negative?");
  CHECK(first.auxiliary_text == "the plot drifts for an hour");
  CHECK(first.gold_label == 1);  // file label 0 means negative
  CHECK(first.gold_text() == "negative");
  CHECK(examples[1].gold_label == 0);
  CHECK(examples[1].gold_text() == "positive");

  for (std::size_t i = 0; i < examples.size(); ++i) {
    CHECK(examples[i].gold_label == (i % 2 == 0 ? 1 : 0));
  }
}

TEST_CASE("mnli columns are located by header name, not position") {
  const auto examples = convert_glue_tsv(fixture("mnli.tsv"), GlueFormat::mnli);
  REQUIRE(examples.size() == 6);

  // The fixture interleaves index/genre/label1 columns; only the named
  // sentence1/sentence2/gold_label columns may matter.
  const SpanExample& first = examples[0];
  CHECK(first.source_text ==
        "The captain left the bridge at dawn. entailment, contradiction, or neutral?");
  CHECK(first.auxiliary_text == "The captain stayed on the bridge all night.");
  CHECK(first.gold_label == 1);
  CHECK(first.gold_text() == "contradiction");
  CHECK(examples[1].gold_label == 0);
  CHECK(examples[1].gold_text() == "entailment");
  CHECK(examples[2].gold_label == 2);
  CHECK(examples[2].gold_text() == "neutral");
}

TEST_CASE("rte maps not_entailment onto the short option") {
  const auto examples = convert_glue_tsv(fixture("rte.tsv"), GlueFormat::rte);
  REQUIRE(examples.size() == 4);
  CHECK(examples[0].gold_label == 0);
  CHECK(examples[0].gold_text() == "entailment");
  CHECK(examples[1].gold_label == 1);
  CHECK(examples[1].gold_text() == "not");
  CHECK(examples[0].source_text.ends_with(" entailment or not?"));
  CHECK(examples[0].auxiliary_text == "The firm has offices in Lisbon.");
}

TEST_CASE("stsb scores keep their raw value and snap to a bucket span") {
  const auto examples = convert_glue_tsv(fixture("stsb.tsv"), GlueFormat::stsb);
  REQUIRE(examples.size() == 5);

  const SpanExample& first = examples[0];
  CHECK(first.task_kind == TaskKind::regression);
  CHECK(first.gold_value == 4.8);
  CHECK(first.gold_text() == "4.75");
  CHECK(first.auxiliary_text == "A person plays guitar.");
  CHECK(first.source_text.starts_with("A man is playing a guitar. 0.0 0.25"));
  CHECK(first.source_text.ends_with("4.75 5.0"));

  CHECK(examples[1].gold_value == 0.4);
  CHECK(examples[1].gold_text() == "0.5");
  CHECK(examples[2].gold_text() == "3.5");
  CHECK(examples[4].gold_value == 5.0);
  CHECK(examples[4].gold_text() == "5.0");
}

TEST_CASE("tsv problems are reported with their line") {
  test::TempDir dir;

  test::write_file(dir.file("ragged.tsv"),
                   "sentence\tlabel\nfine movie\t1\nbroken row\n");
  CHECK_THROWS_WITH_AS(convert_glue_tsv(dir.file("ragged.tsv"), GlueFormat::sst2),
                       doctest::Contains(":3"), std::runtime_error);

  test::write_file(dir.file("odd.tsv"), "sentence\tlabel\nodd film\tmaybe\n");
  CHECK_THROWS_WITH_AS(convert_glue_tsv(dir.file("odd.tsv"), GlueFormat::sst2),
                       doctest::Contains("unknown label 'maybe'"),
                       std::runtime_error);

  test::write_file(dir.file("renamed.tsv"), "text\tlabel\nfine\t1\n");
  CHECK_THROWS_WITH_AS(convert_glue_tsv(dir.file("renamed.tsv"), GlueFormat::sst2),
                       doctest::Contains("no column named 'sentence'"),
                       std::runtime_error);

  test::write_file(dir.file("empty.tsv"), "");
  CHECK_THROWS_WITH_AS(convert_glue_tsv(dir.file("empty.tsv"), GlueFormat::sst2),
                       doctest::Contains("missing header row"),
                       std::runtime_error);

  CHECK_THROWS_WITH_AS(convert_glue_tsv(dir.file("absent.tsv"), GlueFormat::sst2),
                       doctest::Contains("cannot open"), std::runtime_error);

  test::write_file(dir.file("bad-score.tsv"),
                   "sentence1\tsentence2\tscore\na\tb\thigh\n");
  CHECK_THROWS_WITH_AS(convert_glue_tsv(dir.file("bad-score.tsv"), GlueFormat::stsb),
                       doctest::Contains("bad score 'high'"), std::runtime_error);
}

TEST_CASE("squad answers resolve by offset, with search as the fallback") {
  const auto examples = convert_squad_json(fixture("squad_v1.json"));
  REQUIRE(examples.size() == 5);

  const SpanExample& first = examples[0];
  CHECK(first.task_kind == TaskKind::qa);
  CHECK(first.source_text ==
        "The old lighthouse was built in 1884 on the rocky northern shore. "
        "Its lamp was converted to electricity in 1921.");
  CHECK(first.auxiliary_text == "When was the lighthouse built?");
  CHECK(first.gold_char_span == CharSpan{32, 36});
  CHECK(first.gold_text() == "1884");

  // answer_start of 5 disagrees with the text, so the converter searches.
  CHECK(examples[1].gold_text() == "electricity");
  // No answer_start at all: same fallback.
  CHECK(examples[2].gold_text() == "1921");
  CHECK(examples[3].gold_text() == "sugar maples");
  CHECK(examples[4].gold_text() == "late December");
}

TEST_CASE("impossible squad questions point at the trailing marker") {
  const std::string context = "The station opened in 1902 and closed after the war.";

  const auto plain = convert_squad_json(fixture("squad_v2.json"));
  REQUIRE(plain.size() == 2);
  CHECK(plain[0].source_text == context);  // answerable source left bare
  CHECK(plain[0].gold_text() == "1902");
  CHECK(plain[1].source_text == context + " unanswerable");
  CHECK(plain[1].gold_text() == "unanswerable");

  const auto marked = convert_squad_json(fixture("squad_v2.json"), true);
  REQUIRE(marked.size() == 2);
  CHECK(marked[0].source_text == context + " unanswerable");
  CHECK(marked[0].gold_text() == "1902");  // the gold span stays on the answer
  CHECK(marked[1].source_text == context + " unanswerable");
}

TEST_CASE("squad files are validated while converting") {
  test::TempDir dir;

  test::write_file(
      dir.file("empty-answers.json"),
      R"({"data":[{"paragraphs":[{"context":"a b c","qas":[)"
      R"({"question":"why?","answers":[]}]}]}]})");
  CHECK_THROWS_WITH_AS(convert_squad_json(dir.file("empty-answers.json")),
                       doctest::Contains("has no answers"), std::runtime_error);

  test::write_file(
      dir.file("lost-answer.json"),
      R"({"data":[{"paragraphs":[{"context":"a b c","qas":[)"
      R"({"question":"why?","answers":[{"text":"xyz"}]}]}]}]})");
  CHECK_THROWS_WITH_AS(convert_squad_json(dir.file("lost-answer.json")),
                       doctest::Contains("not found in its context"),
                       std::runtime_error);

  test::write_file(dir.file("bad.json"), "{");
  CHECK_THROWS_WITH_AS(convert_squad_json(dir.file("bad.json")),
                       doctest::Contains("bad.json"), std::runtime_error);

  CHECK_THROWS_WITH_AS(convert_squad_json(dir.file("absent.json")),
                       doctest::Contains("cannot open"), std::runtime_error);
}
