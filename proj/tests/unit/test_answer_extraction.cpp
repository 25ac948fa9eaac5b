#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include <json.hpp>

#include "grpokit/answer_extraction.hpp"
#include "grpokit/error.hpp"
#include "grpokit/numeric_expression.hpp"
#include "oracles.hpp"

using namespace grpokit;
using nlohmann::json;

namespace {

std::vector<json> golden_corpus() {
    std::ifstream in(std::string(GRPOKIT_FIXTURES) + "/golden_extraction.jsonl");
    std::vector<json> items;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) items.push_back(json::parse(line));
    }
    return items;
}

GroundTruth numeric_gt(std::string value, std::optional<double> tol = std::nullopt) {
    return GroundTruth{GroundTruthKind::numeric, std::move(value), tol, std::nullopt};
}

}  // namespace

TEST(ExtractBoxed, SingleOccurrence) { EXPECT_EQ(extract_boxed("so \\boxed{42}"), "42"); }

TEST(ExtractBoxed, LastOccurrenceWins) {
    EXPECT_EQ(extract_boxed("\\boxed{1} then \\boxed{\\frac{1}{7}}"), "\\frac{1}{7}");
}

TEST(ExtractBoxed, UnclosedIsAbsent) { EXPECT_FALSE(extract_boxed("\\boxed{unclosed").has_value()); }

TEST(ExtractBoxed, AgreesWithBraceCounterOnRandomStrings) {
    std::mt19937_64 rng(7);
    const std::vector<std::string> pieces{"\\boxed{", "{", "}", "x", "1", " ", "\\frac", "\\boxed"};
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    std::uniform_int_distribution<int> len(0, 14);
    for (int trial = 0; trial < 5000; ++trial) {
        std::string s;
        for (int k = len(rng); k > 0; --k) s += pieces[pick(rng)];
        EXPECT_EQ(extract_boxed(s), oracle::last_box(s)) << s;
    }
}

TEST(ExtractChoice, Examples) {
    EXPECT_EQ(extract_choice("I pick (B) because...").value, "B");
    EXPECT_EQ(extract_choice("Could be A or C. Final answer: C").value, "C");
    EXPECT_EQ(extract_choice("no letters here 123").kind, AnswerKind::none);
}

TEST(ExtractChoice, LastStandaloneLetterMatchesScan) {
    // oracle: every uppercase letter bounded by non-alphanumerics, take the last
    const std::string text = "Options B, D and E are plausible; after checking, C.";
    char expected = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const bool left = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
        const bool right = i + 1 == text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 1]));
        if (std::isupper(static_cast<unsigned char>(text[i])) && left && right) expected = text[i];
    }
    EXPECT_EQ(extract_choice(text).value, std::string(1, expected));
}

TEST(ExtractChoice, SpanPointsAtLetter) {
    const std::string text = "so the answer is (d).";
    const auto a = extract_choice(text);
    ASSERT_TRUE(a.span);
    EXPECT_EQ(text.substr(a.span->begin, a.span->end - a.span->begin), "d");
    EXPECT_EQ(a.value, "D");
}

TEST(ExtractFreeForm, Examples) {
    const auto tagged = extract_free_form("<answer>3.5 m/s</answer>");
    EXPECT_EQ(tagged.kind, AnswerKind::numeric);
    EXPECT_EQ(tagged.value, "3.5");
    EXPECT_EQ(tagged.unit, "m/s");

    const auto cued = extract_free_form("Therefore the answer is 12.");
    EXPECT_EQ(cued.kind, AnswerKind::numeric);
    EXPECT_EQ(cued.value, "12");

    EXPECT_EQ(extract_free_form("It is impossible to tell").kind, AnswerKind::none);
}

TEST(ExtractFreeForm, CueListIsConfigurable) {
    ExtractionOptions opts;
    opts.cue_phrases = {"result:"};
    EXPECT_EQ(extract_free_form("result: 9", opts).value, "9");
    EXPECT_EQ(extract_free_form("the answer is 9", opts).kind, AnswerKind::none);
}

TEST(ExtractFreeForm, NumericSpanCoversNumber) {
    const std::string text = "The answer is 3.25 kg.";
    const auto a = extract_free_form(text);
    ASSERT_TRUE(a.span);
    EXPECT_EQ(text.substr(a.span->begin, a.span->end - a.span->begin), "3.25");
}

TEST(ParseTags, Examples) {
    const auto ok = parse_tags("<think>a</think><answer>b</answer>");
    EXPECT_EQ(ok.think, "a");
    EXPECT_EQ(ok.answer, "b");
    EXPECT_TRUE(ok.well_formed);
    EXPECT_TRUE(ok.ordering_ok);
    EXPECT_FALSE(parse_tags("<answer>b</answer><think>a</think>").ordering_ok);
    EXPECT_FALSE(parse_tags("<think>a<think>b</think>").well_formed);
}

TEST(ParseTags, WellFormedInvariantUnderTagFreePadding) {
    const std::vector<std::string> bodies{"<think>a</think><answer>b</answer>", "<think>a<think>b</think>",
                                          "<answer>x</answer>", "<think>x", "plain"};
    const std::vector<std::string> pads{"", " ", "hello\n", "1 < 2 > 0", "<thin>"};
    for (const auto& body : bodies) {
        const bool base = parse_tags(body).well_formed;
        for (const auto& pre : pads) {
            for (const auto& post : pads) EXPECT_EQ(parse_tags(pre + body + post).well_formed, base) << pre + body + post;
        }
    }
}

TEST(AnswersMatch, Examples) {
    ExtractedAnswer with_unit{AnswerKind::numeric, "3.5", "m/s", std::nullopt};
    EXPECT_TRUE(answers_match(with_unit, numeric_gt("3.5")));

    ExtractedAnswer lower{AnswerKind::choice, "b", std::nullopt, std::nullopt};
    EXPECT_TRUE(answers_match(lower, GroundTruth{GroundTruthKind::choice, "B", std::nullopt, std::nullopt}));

    ExtractedAnswer third{AnswerKind::numeric, "0.3333333", std::nullopt, std::nullopt};
    EXPECT_TRUE(answers_match(third, numeric_gt("1/3", 1e-6)));
}

TEST(AnswersMatch, RationalGroundTruthAgainstRelativeErrorOracle) {
    // 1/3 evaluated exactly, then |x - 1/3| <= 1e-6 * 1/3 decides
    for (const char* x : {"0.333333", "0.3333333", "0.33333", "0.3334"}) {
        const double truth = 1.0 / 3.0;
        const bool expected = std::fabs(std::stod(x) - truth) <= 1e-6 * truth;
        EXPECT_EQ(answers_match({AnswerKind::numeric, x, std::nullopt, std::nullopt}, numeric_gt("1/3", 1e-6)),
                  expected)
            << x;
    }
}

TEST(AnswersMatch, UnitRestrictedByAcceptedUnits) {
    GroundTruth gt = numeric_gt("3.5");
    gt.accepted_units = std::vector<std::string>{"m/s"};
    EXPECT_TRUE(answers_match({AnswerKind::numeric, "3.5", "m/s", std::nullopt}, gt));
    EXPECT_FALSE(answers_match({AnswerKind::numeric, "3.5", "km/h", std::nullopt}, gt));
    EXPECT_TRUE(answers_match({AnswerKind::numeric, "3.5", std::nullopt, std::nullopt}, gt));
}

TEST(AnswersMatch, AbsoluteFloorNearZero) {
    EXPECT_TRUE(answers_match({AnswerKind::numeric, "1e-10", std::nullopt, std::nullopt}, numeric_gt("0")));
    EXPECT_FALSE(answers_match({AnswerKind::numeric, "1e-8", std::nullopt, std::nullopt}, numeric_gt("0")));
}

TEST(AnswersMatch, NoneNeverMatches) {
    EXPECT_FALSE(answers_match(ExtractedAnswer::none(), GroundTruth{GroundTruthKind::text, "", {}, {}}));
    EXPECT_FALSE(answers_match(ExtractedAnswer::none(), numeric_gt("0")));
}

TEST(AnswersMatch, MalformedNumericGroundTruthIsConfigError) {
    EXPECT_THROW(answers_match({AnswerKind::numeric, "1", std::nullopt, std::nullopt}, numeric_gt("banana")),
                 ConfigError);
    GroundTruth bad_tol{GroundTruthKind::text, "x", 0.1, std::nullopt};
    EXPECT_THROW(bad_tol.validate(), ConfigError);
}

TEST(AnswersMatch, TextSymmetricUnderNormalization) {
    const std::vector<std::string> values{"Paris", "  paris. ", "New   York", "new york!", "Rome"};
    for (const auto& a : values) {
        for (const auto& b : values) {
            const bool ab = answers_match({AnswerKind::text, a, std::nullopt, std::nullopt},
                                          GroundTruth{GroundTruthKind::text, b, {}, {}});
            const bool ba = answers_match({AnswerKind::text, b, std::nullopt, std::nullopt},
                                          GroundTruth{GroundTruthKind::text, a, {}, {}});
            EXPECT_EQ(ab, ba) << a << " / " << b;
        }
    }
}

TEST(NormalizeText, Idempotent) {
    for (const char* s : {"  a   b  ", "x.", "Hello, World!!", "", "\t\n", "3.5 m/s."}) {
        const auto once = normalize_text(s);
        EXPECT_EQ(normalize_text(once), once) << s;
    }
}

TEST(NumericExpression, ExactRationals) {
    EXPECT_EQ(evaluate_rational("1/3"), Rational(1, 3));
    EXPECT_EQ(evaluate_rational("2^3"), Rational(8));
    EXPECT_EQ(evaluate_rational("\\frac{1}{2}+\\frac{1}{3}"), Rational(5, 6));
    EXPECT_EQ(evaluate_rational("2^{-2}"), Rational(1, 4));
    EXPECT_EQ(evaluate_rational("1.5e2"), Rational(150));
    EXPECT_EQ(evaluate_rational("(1+2)\\times 3"), Rational(9));
    EXPECT_FALSE(evaluate_rational("1/0"));
    EXPECT_FALSE(evaluate_rational("x+1"));
    EXPECT_FALSE(evaluate_rational(""));
}

TEST(NumericExpression, NumberWithUnit) {
    const auto n = parse_number_with_unit("1,234.5 km");
    ASSERT_TRUE(n);
    EXPECT_EQ(n->number, "1234.5");
    EXPECT_EQ(n->unit, "km");
    EXPECT_FALSE(parse_number_with_unit("1/3"));
    EXPECT_FALSE(parse_number_with_unit("3 + 4"));
}

TEST(GoldenCorpus, AllItemsPassAndAreStable) {
    const auto items = golden_corpus();
    ASSERT_GE(items.size(), 60u);
    for (const auto& item : items) {
        const std::string op = item.at("op");
        const std::string text = item.at("text");
        const json& e = item.at("expect");
        SCOPED_TRACE(item.at("name").get<std::string>());
        if (op == "boxed") {
            const auto got = extract_boxed(text);
            if (e.at("value").is_null()) {
                EXPECT_FALSE(got.has_value());
            } else {
                EXPECT_EQ(got, e.at("value").get<std::string>());
            }
            EXPECT_EQ(got, oracle::last_box(text));
        } else if (op == "choice" || op == "free_form") {
            const auto got = op == "choice" ? extract_choice(text) : extract_free_form(text);
            EXPECT_EQ(to_string(got.kind), e.at("kind").get<std::string>());
            EXPECT_EQ(got.value, e.at("value").get<std::string>());
            EXPECT_EQ(got.unit.value_or(""), e.value("unit", ""));
            EXPECT_EQ(got, op == "choice" ? extract_choice(text) : extract_free_form(text));
        } else {
            const auto got = parse_tags(text);
            EXPECT_EQ(got.think.has_value(), !e.at("think").is_null());
            if (got.think && !e.at("think").is_null()) EXPECT_EQ(*got.think, e.at("think").get<std::string>());
            EXPECT_EQ(got.answer.has_value(), !e.at("answer").is_null());
            if (got.answer && !e.at("answer").is_null()) EXPECT_EQ(*got.answer, e.at("answer").get<std::string>());
            EXPECT_EQ(got.well_formed, e.at("well_formed").get<bool>());
            EXPECT_EQ(got.ordering_ok, e.at("ordering_ok").get<bool>());
        }
    }
}
