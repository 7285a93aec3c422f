#include "doctest.h"

#include <atomic>

#include "scribe/distill.hpp"
#include "scribe/errors.hpp"
#include "scribe/mock_backend.hpp"
#include "support/adversarial.hpp"

using namespace scribe;

namespace {

SourceText source_of(const std::string& text, const std::string& path = "pkg/sample.py") {
    SourceText st;
    st.path = path;
    st.text = text;
    return st;
}

std::unique_ptr<Gateway> gateway_with_rules(std::vector<MockRule> rules) {
    BackendConfig config;
    config.kind = BackendKind::mock;
    GatewayHooks hooks;
    hooks.sleep = [](std::chrono::milliseconds) {};
    return std::make_unique<Gateway>(config, std::make_unique<MockBackend>(std::move(rules)),
                                     hooks);
}

std::unique_ptr<Gateway> gateway_answering(const std::string& tag, const std::string& response) {
    return gateway_with_rules({{tag, "", response}, {"*", "", "fallback"}});
}

const std::string kFourFunctions =
    "def first(a):\n"
    "    return a\n"
    "\n"
    "def second(a, b):\n"
    "    return a + b\n"
    "\n"
    "def third():\n"
    "    return 3\n"
    "\n"
    "def fourth(x):\n"
    "    return x * 2\n";

class CountingBackend : public Backend {
public:
    SendOutcome send(const PromptRequest&) override {
        ++sends;
        SendOutcome o;
        o.text = "unused";
        return o;
    }
    std::string id() const override { return "counting"; }
    std::atomic<int> sends{0};
};

} // namespace

TEST_CASE("needs_augmentation uses a strict threshold") {
    CodeSummary dense;
    dense.comment_density = 0.4;
    CHECK_FALSE(needs_augmentation(dense, 0.15));
    CodeSummary bare;
    bare.comment_density = 0.0;
    CHECK(needs_augmentation(bare, 0.15));
    CodeSummary boundary;
    boundary.comment_density = 0.15;
    CHECK_FALSE(needs_augmentation(boundary, 0.15)); // equality does not fire
}

TEST_CASE("augmentation accepted when the response only adds comments") {
    SourceText text = source_of(scribe_test::kAugmentFixture);
    CodeSummary summary = parse_source(text, text.path);

    std::string augmented = scribe_test::adversarial_cases()[1].transform(text.text);
    // The extra newline keeps the fenced body byte-identical to `augmented`.
    auto gw = gateway_answering("augment", "```python\n" + augmented + "\n```");
    AugmentationOutcome outcome = augment_comments(text, summary, *gw, DistillConfig{});
    CHECK(outcome.action == AugmentationOutcome::Action::accepted);
    REQUIRE(outcome.augmented_text.has_value());
    CHECK(outcome.augmented_text->text == augmented);
    CHECK(outcome.reason.find("comment lines") != std::string::npos);
}

TEST_CASE("augmentation rejected when the response renames a function") {
    SourceText text = source_of(scribe_test::kAugmentFixture);
    CodeSummary summary = parse_source(text, text.path);
    std::string renamed = scribe_test::replace_first(text.text, "def beta(", "def delta(");
    auto gw = gateway_answering("augment", "```python\n" + renamed + "```");
    AugmentationOutcome outcome = augment_comments(text, summary, *gw, DistillConfig{});
    CHECK(outcome.action == AugmentationOutcome::Action::rejected);
    CHECK_FALSE(outcome.augmented_text.has_value()); // original flows downstream
}

TEST_CASE("verbatim echo is accepted and flagged as a no-op") {
    SourceText text = source_of(scribe_test::kAugmentFixture);
    CodeSummary summary = parse_source(text, text.path);
    auto gw = gateway_answering("augment", "```python\n{{code_block}}\n```");
    AugmentationOutcome outcome = augment_comments(text, summary, *gw, DistillConfig{});
    CHECK(outcome.action == AugmentationOutcome::Action::accepted);
    CHECK(outcome.reason.find("no-op") != std::string::npos);
}

TEST_CASE("augmentation safety across the adversarial corpus: zero false accepts") {
    SourceText text = source_of(scribe_test::kAugmentFixture);
    CodeSummary summary = parse_source(text, text.path);
    auto cases = scribe_test::adversarial_cases();
    REQUIRE(cases.size() >= 20);
    for (const auto& c : cases) {
        CAPTURE(c.name);
        std::string response = c.transform(text.text);
        auto gw = gateway_answering("augment", "```python\n" + response + "```");
        AugmentationOutcome outcome = augment_comments(text, summary, *gw, DistillConfig{});
        bool accepted = outcome.action == AugmentationOutcome::Action::accepted;
        CHECK(accepted == c.expect_accept);
        if (accepted) {
            // Consistency: what was accepted really is comment-equivalent.
            CHECK(strip_comments_normalized(outcome.augmented_text->text) ==
                  strip_comments_normalized(text.text));
        } else {
            CHECK_FALSE(outcome.augmented_text.has_value());
        }
    }
}

TEST_CASE("distill binds prompt to source and summary hashes") {
    SourceText text = source_of(kFourFunctions);
    CodeSummary summary = parse_source(text, text.path);
    auto gw = gateway_answering("distill", "Write the file back. TARGET: pkg/sample.py");
    ReconstructionPrompt prompt = distill(text, summary, *gw, DistillConfig{});
    CHECK(prompt.target_path == "pkg/sample.py");
    CHECK(prompt.prompt_text == "Write the file back. TARGET: pkg/sample.py");
    CHECK(prompt.source_hash == source_text_hash(text));
    CHECK(prompt.summary_digest == summary_digest_of(summary));
    CHECK_FALSE(prompt.verbatim_flagged);

    // Determinism: a second distillation of the identical file matches.
    ReconstructionPrompt again = distill(text, summary, *gw, DistillConfig{});
    CHECK(again.prompt_text == prompt.prompt_text);
    CHECK(again.source_hash == prompt.source_hash);
}

TEST_CASE("distill requests direct single-response regeneration") {
    SourceText text = source_of(kFourFunctions);
    CodeSummary summary = parse_source(text, text.path);
    // The template echoes through the mock so the request text is observable.
    auto gw = gateway_answering("distill", "{{user_text}}");
    ReconstructionPrompt prompt = distill(text, summary, *gw, DistillConfig{});
    CHECK(prompt.prompt_text.find("single") != std::string::npos);
    CHECK(prompt.prompt_text.find("File: pkg/sample.py") != std::string::npos);
}

TEST_CASE("blank distill responses are an empty_response error") {
    SourceText text = source_of(kFourFunctions);
    CodeSummary summary = parse_source(text, text.path);
    auto gw = gateway_answering("distill", "   \n  ");
    try {
        distill(text, summary, *gw, DistillConfig{});
        FAIL("expected empty_response");
    } catch (const Error& e) {
        CHECK(e.code() == "empty_response");
        CHECK(e.kind() == ErrorKind::gateway);
    }
}

TEST_CASE("a prompt that copies most source lines gets the verbatim flag") {
    SourceText text = source_of(kFourFunctions);
    CodeSummary summary = parse_source(text, text.path);
    auto gw = gateway_answering("distill", "Here is the file to copy:\n" + text.text);
    ReconstructionPrompt prompt = distill(text, summary, *gw, DistillConfig{});
    CHECK(prompt.verbatim_fraction > 0.9);
    CHECK(prompt.verbatim_flagged);
}

TEST_CASE("round trip identity scores 1.0 and passes") {
    SourceText text = source_of(kFourFunctions);
    CodeSummary summary = parse_source(text, text.path);
    auto gw = gateway_with_rules({
        {"distill", "", "Rebuild it. TARGET: pkg/sample.py"},
        {"reconstruct", "", "```python\n" + text.text + "```"},
        {"*", "", "fallback"},
    });
    ReconstructionPrompt prompt = distill(text, summary, *gw, DistillConfig{});
    RoundTripReport report = round_trip_verify(prompt, text, summary, *gw, DistillConfig{});
    CHECK(report.similarity == doctest::Approx(1.0));
    CHECK(report.passed);
    CHECK(report.missing_units.empty());
    CHECK(report.extra_units.empty());
}

TEST_CASE("round trip degradation: 3 of 4 functions reproduced -> F1 0.8571") {
    SourceText text = source_of(kFourFunctions);
    CodeSummary summary = parse_source(text, text.path);
    std::string three =
        "def first(a):\n"
        "    return a\n"
        "\n"
        "def second(a, b):\n"
        "    return a + b\n"
        "\n"
        "def third():\n"
        "    return 3\n";
    auto gw = gateway_with_rules({
        {"distill", "", "Rebuild it. TARGET: pkg/sample.py"},
        {"reconstruct", "", "```python\n" + three + "```"},
        {"*", "", "fallback"},
    });
    ReconstructionPrompt prompt = distill(text, summary, *gw, DistillConfig{});
    RoundTripReport report = round_trip_verify(prompt, text, summary, *gw, DistillConfig{});
    // Hand-computed: precision 1.0, recall 0.75, F1 = 2*0.75/1.75.
    CHECK(report.similarity == doctest::Approx(0.8571).epsilon(1e-3));
    CHECK(report.passed); // 0.857 >= default 0.8
    REQUIRE(report.missing_units.size() == 1);
    CHECK(report.missing_units[0] == "fourth");
    CHECK(report.extra_units.empty());
}

TEST_CASE("prose regeneration yields similarity 0 with opaque status") {
    SourceText text = source_of(kFourFunctions);
    CodeSummary summary = parse_source(text, text.path);
    auto gw = gateway_with_rules({
        {"distill", "", "Rebuild it."},
        {"reconstruct", "", "The file defines several helpful functions for numbers.\n"
                            "They add values and scale them nicely together.\n"},
        {"*", "", "fallback"},
    });
    ReconstructionPrompt prompt = distill(text, summary, *gw, DistillConfig{});
    RoundTripReport report = round_trip_verify(prompt, text, summary, *gw, DistillConfig{});
    CHECK(report.similarity == doctest::Approx(0.0));
    CHECK_FALSE(report.passed);
    CHECK(report.regenerated_status == ParseStatus::opaque);
    CHECK(report.missing_units.size() == 4);
}

TEST_CASE("stale prompts are refused before any LLM call") {
    SourceText text = source_of(kFourFunctions);
    CodeSummary summary = parse_source(text, text.path);
    ReconstructionPrompt stale;
    stale.target_path = text.path;
    stale.prompt_text = "anything";
    stale.source_hash = "sha256:0000";

    BackendConfig config;
    config.kind = BackendKind::mock;
    auto backend = std::make_unique<CountingBackend>();
    CountingBackend* raw = backend.get();
    Gateway gw(config, std::move(backend), GatewayHooks{});

    try {
        round_trip_verify(stale, text, summary, gw, DistillConfig{});
        FAIL("expected stale_prompt");
    } catch (const Error& e) {
        CHECK(e.code() == "stale_prompt");
    }
    CHECK(raw->sends.load() == 0);
}

TEST_CASE("opaque originals verify by normalized text equality") {
    SourceText prose = source_of(
        "These lines are deliberately not valid source code at all.\n"
        "They read like notes scribbled in a margin somewhere.\n",
        "notes.py");
    CodeSummary summary = parse_source(prose, prose.path);
    REQUIRE(summary.parse_status == ParseStatus::opaque);

    auto equal_gw = gateway_with_rules({
        {"distill", "", "Reproduce it. TARGET: notes.py"},
        {"reconstruct", "", prose.text},
        {"*", "", "fallback"},
    });
    ReconstructionPrompt prompt = distill(prose, summary, *equal_gw, DistillConfig{});
    RoundTripReport same = round_trip_verify(prompt, prose, summary, *equal_gw, DistillConfig{});
    CHECK(same.similarity == doctest::Approx(1.0));

    auto different_gw = gateway_with_rules({
        {"distill", "", "Reproduce it. TARGET: notes.py"},
        {"reconstruct", "", "Completely different text came back instead.\n"},
        {"*", "", "fallback"},
    });
    ReconstructionPrompt prompt2 = distill(prose, summary, *different_gw, DistillConfig{});
    RoundTripReport diff =
        round_trip_verify(prompt2, prose, summary, *different_gw, DistillConfig{});
    CHECK(diff.similarity == doctest::Approx(0.0));
}

TEST_CASE("structural F1 arithmetic and blame lists") {
    auto summarize = [](const std::string& text) {
        SourceText st;
        st.path = "x.py";
        st.text = text;
        return parse_source(st, st.path);
    };

    SUBCASE("both empty is perfect") {
        CodeSummary a = summarize("x = 1\n");
        CodeSummary b = summarize("y = 2\n");
        CHECK(structural_f1(a, b, nullptr, nullptr) == doctest::Approx(1.0));
    }
    SUBCASE("rename shows up in both blame lists") {
        CodeSummary a = summarize("def f(x):\n    return x\n");
        CodeSummary b = summarize("def g(x):\n    return x\n");
        std::vector<std::string> missing, extra;
        CHECK(structural_f1(a, b, &missing, &extra) == doctest::Approx(0.0));
        REQUIRE(missing.size() == 1);
        REQUIRE(extra.size() == 1);
        CHECK(missing[0] == "f");
        CHECK(extra[0] == "g");
        // Disjoint blame lists.
        CHECK(missing[0] != extra[0]);
    }
    SUBCASE("parameter count participates in the triple") {
        CodeSummary a = summarize("def f(x):\n    return x\n");
        CodeSummary b = summarize("def f(x, y):\n    return x\n");
        CHECK(structural_f1(a, b, nullptr, nullptr) == doctest::Approx(0.0));
    }
    SUBCASE("duplicate triples match as a multiset") {
        CodeSummary a = summarize("def f(x):\n    return x\ndef f(x):\n    return x\n");
        CodeSummary b = summarize("def f(x):\n    return x\n");
        std::vector<std::string> missing, extra;
        double f1 = structural_f1(a, b, &missing, &extra);
        // matched 1 of (orig 2, regen 1): P=1, R=0.5, F1=2/3.
        CHECK(f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        REQUIRE(missing.size() == 1);
        CHECK(extra.empty());
    }
    SUBCASE("methods and functions are distinct kinds") {
        CodeSummary a = summarize("class C:\n    def m(self):\n        return 1\n");
        CodeSummary b = summarize("def m(self):\n    return 1\n");
        // class C unmatched and method-vs-function m unmatched.
        CHECK(structural_f1(a, b, nullptr, nullptr) == doctest::Approx(0.0));
    }
}
