#include <gtest/gtest.h>

#include <functional>
#include <mutex>

#include "dyadlab/agents.hpp"
#include "dyadlab/extractor_accuracy.hpp"
#include "dyadlab/llm/fake_model.hpp"
#include "dyadlab/llm/pipeline.hpp"

using namespace dyadlab;
using namespace dyadlab::llm;

namespace {

Game st(Points s, Points t) { return Game{10, s, t, 5}; }

// Answers every request with a fixed function of the request; records requests.
class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::function<std::string(const CompletionRequest&)> fn) : fn_(std::move(fn)) {}
  CompletionResponse complete(const CompletionRequest& r) override {
    std::lock_guard lock(mu_);
    requests.push_back(r);
    return {fn_(r), "stop", {}};
  }
  std::vector<CompletionRequest> requests;

 private:
  std::function<std::string(const CompletionRequest&)> fn_;
  std::mutex mu_;
};

}  // namespace

TEST(ParseChoiceReply, Examples) {
  EXPECT_EQ(parse_choice_reply("The player chose A."), Extracted::A);
  EXPECT_EQ(parse_choice_reply("B"), Extracted::B);
  EXPECT_EQ(parse_choice_reply("neither option was selected"), Extracted::Invalid);
  EXPECT_EQ(parse_choice_reply(" b. "), Extracted::B);
  EXPECT_EQ(parse_choice_reply("'A'"), Extracted::A);
  EXPECT_EQ(parse_choice_reply("A or B"), Extracted::Invalid);
  EXPECT_EQ(parse_choice_reply("Option B, as a rule"), Extracted::B);
  EXPECT_EQ(parse_choice_reply(""), Extracted::Invalid);
  EXPECT_EQ(parse_choice_reply("AB"), Extracted::Invalid);
}

TEST(ParseVerdict, Examples) {
  EXPECT_EQ(parse_verdict("good"), Verdict::Good);
  EXPECT_EQ(parse_verdict(" Bad.\n"), Verdict::Bad);
  EXPECT_EQ(parse_verdict("GOOD"), Verdict::Good);
  EXPECT_EQ(parse_verdict("maybe"), Verdict::Unparseable);
  EXPECT_EQ(parse_verdict("good bad"), Verdict::Unparseable);
}

TEST(Pipeline, CallParametersPerRole) {
  ScriptedClient c([](const CompletionRequest&) { return std::string("good"); });
  const ModelHandle h{&c, "m"};
  std::vector<CallRecord> log;
  generate_long_answer(h, build_prompt(st(1, 6), LabelMapping::identity(), Stage::Verified), 5, &log);
  extract_choice("I choose A.", h, 5, &log);
  verify_logic("I choose A.", st(1, 6), LabelMapping::identity(), h, 5, &log);
  ASSERT_EQ(c.requests.size(), 3u);
  EXPECT_EQ(c.requests[0].temperature, 0.8);
  EXPECT_EQ(c.requests[0].max_tokens, 1000);
  EXPECT_EQ(c.requests[1].temperature, 0.3);
  EXPECT_EQ(c.requests[1].max_tokens, 50);
  EXPECT_EQ(c.requests[2].temperature, 0.0);
  EXPECT_EQ(c.requests[2].max_tokens, 5);
  for (const auto& r : c.requests) {
    EXPECT_EQ(r.model, "m");
    EXPECT_EQ(r.seed, 5u);
    EXPECT_EQ(r.messages.front().role, "system");
    EXPECT_EQ(r.messages.back().role, "user");
  }
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log[0].role, "generate");
  EXPECT_EQ(log[1].role, "extract");
  EXPECT_EQ(log[2].role, "verify");
  EXPECT_EQ(log[2].response["choices"][0]["message"]["content"], "good");
}

TEST(Pipeline, EmptyAnswersShortCircuit) {
  ScriptedClient c([](const CompletionRequest&) { return std::string("A"); });
  const ModelHandle h{&c, "m"};
  EXPECT_EQ(extract_choice("  \n", h), Extracted::Invalid);
  EXPECT_EQ(verify_logic("", st(1, 6), LabelMapping::identity(), h), Verdict::Bad);
  EXPECT_TRUE(c.requests.empty());
}

TEST(FakeModel, VerifierAcceptsCorrectAndRejectsSkewedPayoffs) {
  FakeChatModel honest(FakePolicy::Cooperate), liar(FakePolicy::FailVerification);
  for (Label c : {Label::A, Label::B}) {
    const LabelMapping m{c};
    const Game g = st(3, 12);
    const auto prompt = build_prompt(g, m, Stage::Verified);
    const std::string good = generate_long_answer({&honest, "t"}, prompt);
    const std::string bad = generate_long_answer({&liar, "t"}, prompt);
    EXPECT_EQ(verify_logic(good, g, m, {&honest, "v"}), Verdict::Good) << good;
    EXPECT_EQ(verify_logic(bad, g, m, {&honest, "v"}), Verdict::Bad) << bad;
    EXPECT_EQ(m.decode(*as_label(extract_choice(good, {&honest, "x"}))), Choice::Cooperate);
  }
}

TEST(FakeModel, SimpleStageAnswersWithOneLetter) {
  FakeChatModel defect(FakePolicy::Defect);
  const LabelMapping m{Label::B};
  const auto text = generate_long_answer({&defect, "t"}, build_prompt(st(3, 12), m, Stage::Simple));
  EXPECT_EQ(text, "A");
}

TEST(LlmAgent, VerifiedFlowAndRelaxation) {
  auto fake = std::make_shared<FakeChatModel>(FakePolicy::FailVerification);
  LlmAgent agent({fake, "t", fake, "x", fake, "v"}, Stage::Verified);
  PlayContext ctx{st(8, 12), PlaySeed{1, 8, 12, 0, 0}, false};
  const auto strict = agent.play(ctx);
  EXPECT_EQ(strict.verdict, Verdict::Bad);
  EXPECT_FALSE(strict.valid());
  EXPECT_EQ(strict.invalid_reason, InvalidReason::Verifier);
  EXPECT_EQ(strict.calls.size(), 2u);  // no extraction after a rejection

  ctx.relaxed = true;
  const auto relaxed = agent.play(ctx);
  EXPECT_TRUE(relaxed.verifier_bypassed);
  EXPECT_FALSE(relaxed.verdict.has_value());
  ASSERT_TRUE(relaxed.valid());
  EXPECT_EQ(*relaxed.choice(), Choice::Cooperate);
  EXPECT_EQ(relaxed.calls.size(), 2u);
}

TEST(LlmAgent, StagesRequireEndpoints) {
  auto fake = std::make_shared<FakeChatModel>();
  EXPECT_THROW(LlmAgent({fake, "t", fake, "x", nullptr, ""}, Stage::Verified), Error);
  EXPECT_THROW(LlmAgent({fake, "t", nullptr, "", nullptr, ""}, Stage::Double), Error);
  EXPECT_NO_THROW(LlmAgent({fake, "t", nullptr, "", nullptr, ""}, Stage::Simple));
}

TEST(LlmAgent, AnyMappingDecodesToTheSameChoice) {
  auto fake = std::make_shared<FakeChatModel>(FakePolicy::Cooperate);
  LlmAgent agent({fake, "t", fake, "x", fake, "v"}, Stage::Verified);
  int b_is_cooperate = 0;
  for (std::uint64_t slot = 0; slot < 40; ++slot) {
    const auto o = agent.play({st(2, 12), PlaySeed{9, 2, 12, slot, 0}, false});
    ASSERT_TRUE(o.valid());
    EXPECT_EQ(*o.choice(), Choice::Cooperate);
    b_is_cooperate += o.mapping.cooperate == Label::B;
  }
  EXPECT_GT(b_is_cooperate, 0);
  EXPECT_LT(b_is_cooperate, 40);
}

TEST(LlmAgent, FlakyAnswersFailExtraction) {
  auto fake = std::make_shared<FakeChatModel>(FakePolicy::Flaky);
  LlmAgent agent({fake, "t", fake, "x", nullptr, ""}, Stage::Double);
  int invalid = 0;
  for (std::uint64_t slot = 0; slot < 60; ++slot) {
    const auto o = agent.play({st(2, 12), PlaySeed{9, 2, 12, slot, 0}, false});
    if (!o.valid()) {
      ++invalid;
      EXPECT_EQ(o.invalid_reason, InvalidReason::Extraction);
    }
  }
  EXPECT_GT(invalid, 5);
  EXPECT_LT(invalid, 40);
}

TEST(ExtractorAccuracy, PerfectAndMismatch) {
  FakeChatModel fake;
  const std::vector<AnnotatedAnswer> set{
      {"After weighing both options, I choose A.", Gold::A},
      {"Group A pays less. I choose B.", Gold::B},
      {"I cannot decide.", Gold::Neither},
  };
  const auto r = extractor_accuracy(set, {&fake, "x"});
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.correct, 3u);

  ScriptedClient never([](const CompletionRequest&) { return std::string("unclear"); });
  const auto miss = extractor_accuracy({{"I choose A.", Gold::A}}, {&never, "x"});
  EXPECT_EQ(miss.accuracy, 0.0);
  EXPECT_THROW(extractor_accuracy({}, {&fake, "x"}), Error);
}

TEST(ExtractorAccuracy, ReadsJsonl) {
  std::istringstream is("{\"long_answer\": \"I choose B.\", \"gold\": \"B\"}\n\n{\"long_answer\": \"x\", \"gold\": \"neither\"}\n");
  const auto set = read_annotations(is);
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set[0].gold, Gold::B);
  EXPECT_EQ(set[1].gold, Gold::Neither);
  std::istringstream bad("{\"gold\": \"B\"}\n");
  EXPECT_THROW(read_annotations(bad), Error);
}
