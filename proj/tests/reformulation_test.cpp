#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spanex/reformulation.hpp"

using namespace spanex;

namespace {
const LabelSet kBinary({"positive", "negative"});
const LabelSet kNli({"entailment", "contradiction", "neutral"});
}  // namespace

TEST_CASE("task kind names round trip") {
  for (TaskKind kind : {TaskKind::classification, TaskKind::regression, TaskKind::qa}) {
    CHECK(task_kind_from_name(task_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(task_kind_from_name("ranking"), std::invalid_argument);
}

TEST_CASE("label sets render as an option list with tracked spans") {
  const auto two = kBinary.render_options();
  CHECK(two.text == "positive or negative?");
  CHECK(two.label_spans == std::vector<CharSpan>{{0, 8}, {12, 20}});

  const auto three = kNli.render_options();
  CHECK(three.text == "entailment, contradiction, or neutral?");
  CHECK(three.label_spans == std::vector<CharSpan>{{0, 10}, {12, 25}, {30, 37}});
  for (std::size_t i = 0; i < kNli.size(); ++i) {
    const CharSpan s = three.label_spans[i];
    CHECK(three.text.substr(s.begin, s.size()) == kNli.descriptions()[i]);
  }

  CHECK(LabelSet({"entailment", "not"}).render_options().text == "entailment or not?");
}

TEST_CASE("label sets reject empty and ambiguous descriptions") {
  CHECK_THROWS_AS(LabelSet({}), std::invalid_argument);
  CHECK_THROWS_AS(LabelSet({"a", ""}), std::invalid_argument);
  CHECK_THROWS_AS(LabelSet({"entailment", "not entailment"}), std::invalid_argument);
  CHECK_THROWS_AS(LabelSet({"good", "good"}), std::invalid_argument);
}

TEST_CASE("single-sentence classification extracts from the option list") {
  const SpanExample ex =
      classify_to_span(std::nullopt, std::string("it's slow -- very, very slow"), kBinary, 1);
  CHECK(ex.source_text == "positive or negative?");
  CHECK(ex.auxiliary_text == "it's slow -- very, very slow");
  CHECK(ex.gold_text() == "negative");
  CHECK(ex.gold_char_span == CharSpan{12, 20});
  CHECK(ex.task_kind == TaskKind::classification);
  CHECK(ex.gold_label == 1);
}

TEST_CASE("sentence-pair classification appends options to the first sentence") {
  const SpanExample ex = classify_to_span(std::string("I don't know a lot about camping."),
                                          std::string("I know exactly."), kNli, 1);
  CHECK(ex.source_text ==
        "I don't know a lot about camping. entailment, contradiction, or neutral?");
  CHECK(ex.auxiliary_text == "I know exactly.");
  CHECK(ex.gold_text() == "contradiction");
}

TEST_CASE("gold span points into the option list even when a label word appears earlier") {
  const std::string text_a = "negative vibes";
  const SpanExample ex = classify_to_span(text_a, std::string("aux"), kBinary, 0);
  CHECK(ex.source_text == "negative vibes positive or negative?");
  CHECK(ex.gold_char_span.begin >= text_a.size());
  CHECK(ex.gold_text() == "positive");
}

TEST_CASE("classify_to_span rejects out-of-range gold labels") {
  CHECK_THROWS_AS(classify_to_span(std::nullopt, std::string("x"), kBinary, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(classify_to_span(std::nullopt, std::string("x"), kBinary, -1),
                  std::invalid_argument);
}

TEST_CASE("bucket specs render evenly spaced centers with minimal decimals") {
  const BucketSpec sts(0.0, 5.0, 21);
  CHECK(sts.count() == 21);
  CHECK(sts.step() == doctest::Approx(0.25));
  CHECK(sts.center(2) == doctest::Approx(0.5));
  REQUIRE(sts.rendered().size() == 21);
  CHECK(sts.rendered()[0] == "0.0");
  CHECK(sts.rendered()[1] == "0.25");
  CHECK(sts.rendered()[2] == "0.5");
  CHECK(sts.rendered()[3] == "0.75");
  CHECK(sts.rendered()[4] == "1.0");
  CHECK(sts.rendered()[20] == "5.0");

  const BucketSpec coarse(0.0, 4.0, 5);
  CHECK(coarse.rendered() == std::vector<std::string>{"0.0", "1.0", "2.0", "3.0", "4.0"});

  CHECK_THROWS_AS(BucketSpec(0.0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(BucketSpec(0.0, 1.0, 65), std::invalid_argument);
  CHECK_THROWS_AS(BucketSpec(1.0, 1.0, 5), std::invalid_argument);
}

TEST_CASE("render_all span offsets select each bucket string") {
  const BucketSpec spec(0.0, 1.0, 5);
  const auto all = spec.render_all();
  CHECK(all.text == "0.0 0.25 0.5 0.75 1.0");
  REQUIRE(all.bucket_spans.size() == 5);
  for (std::size_t i = 0; i < all.bucket_spans.size(); ++i) {
    const CharSpan s = all.bucket_spans[i];
    CHECK(all.text.substr(s.begin, s.size()) == spec.rendered()[i]);
  }
}

TEST_CASE("value_to_bucket picks the nearest center, midpoints rounding down") {
  const BucketSpec sts(0.0, 5.0, 21);
  CHECK(value_to_bucket(0.0, sts) == 0);
  CHECK(value_to_bucket(0.37, sts) == 1);   // |0.37-0.25| < |0.5-0.37|
  CHECK(value_to_bucket(0.5, sts) == 2);
  CHECK(value_to_bucket(5.0, sts) == 20);

  const BucketSpec unit(0.0, 1.0, 5);
  CHECK(value_to_bucket(0.125, unit) == 0);  // exact midpoint
  CHECK(value_to_bucket(0.375, unit) == 1);
}

TEST_CASE("sentence-pair regression spans the gold bucket") {
  const BucketSpec sts(0.0, 5.0, 21);
  const SpanExample ex = regress_to_span(std::string("A woman is riding a horse."),
                                         std::string("A man is playing a guitar."), sts, 0.5);
  CHECK(ex.task_kind == TaskKind::regression);
  CHECK(ex.gold_value == 0.5);
  CHECK(ex.gold_text() == "0.5");
  CHECK(ex.auxiliary_text == "A man is playing a guitar.");
  CHECK(ex.source_text.substr(0, 31) == "A woman is riding a horse. 0.0 ");

  const SpanExample low = regress_to_span(std::string("s"), std::nullopt, sts, 0.37);
  CHECK(low.gold_text() == "0.25");
  CHECK(low.auxiliary_text == "s");
}

TEST_CASE("out-of-range regression values clamp to the boundary bucket") {
  const BucketSpec sts(0.0, 5.0, 21);
  const SpanExample high = regress_to_span(std::string("s"), std::nullopt, sts, 7.2);
  CHECK(high.gold_text() == "5.0");
  CHECK(high.gold_value == 7.2);  // the recorded value keeps the raw input
  const SpanExample low = regress_to_span(std::string("s"), std::nullopt, sts, -1.0);
  CHECK(low.gold_text() == "0.0");
}

TEST_CASE("qa examples keep the context as source") {
  const std::string context =
      "Nikola Tesla (10 July 1856 -- 7 January 1943) was a Serbian American inventor ...";
  const std::string question = "When was Tesla born?";
  const auto span = find_answer_span(context, "10 July 1856");
  REQUIRE(span.has_value());
  CHECK(*span == CharSpan{14, 26});

  const SpanExample ex = qa_to_span(context, question, span, false);
  CHECK(ex.source_text == context);
  CHECK(ex.auxiliary_text == question);
  CHECK(ex.gold_text() == "10 July 1856");
  CHECK(ex.task_kind == TaskKind::qa);

  CHECK(!find_answer_span(context, "Edison").has_value());
  CHECK(!find_answer_span(context, "").has_value());
}

TEST_CASE("unanswerable examples extract the appended marker") {
  const SpanExample ex = qa_to_span("short context", "why?", std::nullopt, true);
  CHECK(ex.source_text == "short context unanswerable");
  CHECK(ex.gold_text() == "unanswerable");

  // Answerable examples in an append_unanswerable dataset also grow the
  // marker, but keep their own gold span.
  const SpanExample with = qa_to_span("short context", "why?", CharSpan{0, 5}, false, true);
  CHECK(with.source_text == "short context unanswerable");
  CHECK(with.gold_text() == "short");
}

TEST_CASE("qa_to_span validates span presence and bounds") {
  CHECK_THROWS_AS(qa_to_span("ctx", "q", CharSpan{0, 1}, true), std::invalid_argument);
  CHECK_THROWS_AS(qa_to_span("ctx", "q", std::nullopt, false), std::invalid_argument);
  CHECK_THROWS_AS(qa_to_span("ctx", "q", CharSpan{1, 1}, false), std::runtime_error);
  CHECK_THROWS_AS(qa_to_span("ctx", "q", CharSpan{0, 9}, false), std::runtime_error);
}

TEST_CASE("span_to_label recovers indices, flagging inexact matches") {
  CHECK(span_to_label("negative", kBinary) == std::pair{1, true});
  CHECK(span_to_label("  negative ", kBinary) == std::pair{1, true});
  CHECK(span_to_label("or negative", kBinary) == std::pair{1, false});
  CHECK(span_to_label("zzz", kBinary) == std::pair{0, false});
  CHECK(span_to_label("contradiction", kNli) == std::pair{1, true});
}

TEST_CASE("span_to_value recovers centers, falling back to edit distance") {
  const BucketSpec sts(0.0, 5.0, 21);
  auto [v, ok] = span_to_value("0.5", sts);
  CHECK(v == doctest::Approx(0.5));
  CHECK(ok);

  auto [multi, multi_ok] = span_to_value("0.5 0.75", sts);
  CHECK(multi == doctest::Approx(0.75));  // deleting "0.5 " costs 4, " 0.75" costs 5
  CHECK(!multi_ok);
}

TEST_CASE("every classification example round trips through its gold span") {
  const std::vector<std::string> pool = {"alpha", "beta", "gamma", "delta", "epsilon"};
  for (std::size_t k = 2; k <= pool.size(); ++k) {
    const LabelSet labels(std::vector<std::string>(pool.begin(), pool.begin() + k));
    for (int gold = 0; gold < static_cast<int>(k); ++gold) {
      const SpanExample single = classify_to_span(std::nullopt, std::string("aux"), labels, gold);
      CHECK(span_to_label(single.gold_text(), labels) == std::pair{gold, true});
      const SpanExample pair =
          classify_to_span(std::string("left sentence"), std::string("aux"), labels, gold);
      CHECK(span_to_label(pair.gold_text(), labels) == std::pair{gold, true});
    }
  }
}

TEST_CASE("regression round trips land within half a bucket width") {
  const BucketSpec sts(0.0, 5.0, 21);
  const double half = sts.step() / 2;
  for (double value : {0.0, 0.1, 0.12, 1.3749, 2.49, 3.874, 5.0}) {
    const SpanExample ex = regress_to_span(std::string("s"), std::nullopt, sts, value);
    auto [recovered, ok] = span_to_value(ex.gold_text(), sts);
    CHECK(ok);
    CHECK(std::abs(recovered - value) <= half + 1e-12);
  }
}
