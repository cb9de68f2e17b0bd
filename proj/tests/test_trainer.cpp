#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "eaco/errors.hpp"
#include "eaco/mock_task.hpp"
#include "eaco/model_gateway.hpp"
#include "eaco/pair_builder.hpp"
#include "eaco/trainer.hpp"

using namespace eaco;

namespace {

// 20 contexts, 2 candidates each, every pair prefers candidate "win".
struct Separable {
  TabularPolicy policy;
  std::vector<PreferencePair> pairs;
};

PreferencePair make_pair(std::string image, std::string preferred, std::string rejected) {
  PreferencePair p;
  p.prompt = "q";
  p.image = std::move(image);
  p.preferred = std::move(preferred);
  p.rejected = std::move(rejected);
  p.score_w = 20;
  p.score_l = 10;
  return p;
}

Separable separable_dataset() {
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> cands;
  for (int i = 0; i < 20; ++i) {
    ids.push_back("ctx" + std::to_string(i));
    cands.push_back({"win " + std::to_string(i), "lose " + std::to_string(i)});
  }
  Separable s;
  s.policy = TabularPolicy::uniform(ids, cands, LengthUnit::tokens_whitespace);
  for (int i = 0; i < 20; ++i) {
    PreferencePair p;
    p.prompt = "q";
    p.image = ids[static_cast<std::size_t>(i)];
    p.preferred = "win " + std::to_string(i);
    p.rejected = "lose " + std::to_string(i);
    p.score_w = 20;
    p.score_l = 10;
    s.pairs.push_back(std::move(p));
  }
  return s;
}

}  // namespace

TEST_CASE("train configs default, validate, and round trip") {
  TrainConfig cfg;
  CHECK(cfg.learning_rate == 0.1);
  CHECK(cfg.epochs == 1);
  CHECK(cfg.batch_size == 1);
  CHECK(cfg.shuffle);
  cfg.validate();

  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.learning_rate = 0.05;
  cfg.epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.epochs = 3;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.batch_size = 4;
  cfg.seed = 9;
  cfg.shuffle = false;

  TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.epochs == 3);
  CHECK(back.batch_size == 4);
  CHECK(back.seed == 9);
  CHECK_FALSE(back.shuffle);
  CHECK_THROWS_AS(TrainConfig::from_json(json{{"lr", 0.1}}), SchemaError);
}

TEST_CASE("unresolvable pairs are rejected before any step") {
  Separable s = separable_dataset();
  PreferencePair ghost = s.pairs[0];
  ghost.image = "ctx99";
  s.pairs.push_back(ghost);
  PreferencePair wrong_text = s.pairs[1];
  wrong_text.preferred = "not a candidate";
  s.pairs.push_back(wrong_text);

  TrainConfig cfg;
  try {
    train_dpo(s.policy, s.pairs, cfg);
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    std::string what = e.what();
    CHECK(what.find("2 unresolvable pair(s)") != std::string::npos);
    CHECK(what.find("ctx99") != std::string::npos);
    CHECK(what.find("preferred text is not a candidate") != std::string::npos);
  }
}

TEST_CASE("zero epochs is a no-op") {
  Separable s = separable_dataset();
  TrainConfig cfg;
  cfg.epochs = 0;
  TrainOutcome out = train_dpo(s.policy, s.pairs, cfg);
  CHECK(out.policy == s.policy);
  CHECK(out.report.loss_curve.empty());
  CHECK(out.report.preference_accuracy_before == out.report.preference_accuracy_after);

  CHECK_THROWS_AS(train_dpo(s.policy, {}, cfg), ValidationError);
}

TEST_CASE("a separable dataset trains to perfect accuracy in 200 steps") {
  Separable s = separable_dataset();
  TrainConfig cfg;
  cfg.epochs = 10;  // 10 epochs x 20 pairs, batch 1
  cfg.seed = 3;

  const TabularPolicy input_snapshot = s.policy;
  TrainOutcome out = train_dpo(s.policy, s.pairs, cfg);
  CHECK(s.policy == input_snapshot);  // caller's policy untouched
  CHECK(out.report.loss_curve.size() == 200);
  CHECK(out.report.loss_curve.front().first == 1);
  CHECK(out.report.loss_curve.back().first == 200);
  CHECK(out.report.preference_accuracy_before == 0.0);  // uniform rows tie
  CHECK(out.report.preference_accuracy_after == 1.0);
  CHECK(out.report.margin_before == 0.0);
  CHECK(out.report.margin_after > 0.5);
  CHECK(out.report.wallclock_seconds >= 0.0);

  // Margins are visible in the trained table directly.
  for (const auto& pair : s.pairs) {
    auto ctx = out.policy.require_context(pair.image);
    CHECK(out.policy.logp(ctx, 0) > out.policy.logp(ctx, 1));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  Separable s = separable_dataset();
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 11;
  TrainOutcome a = train_dpo(s.policy, s.pairs, cfg);
  TrainOutcome b = train_dpo(s.policy, s.pairs, cfg);
  CHECK(a.policy == b.policy);
  REQUIRE(a.report.loss_curve.size() == b.report.loss_curve.size());
  for (std::size_t i = 0; i < a.report.loss_curve.size(); ++i) {
    CHECK(a.report.loss_curve[i].first == b.report.loss_curve[i].first);
    CHECK(a.report.loss_curve[i].second == b.report.loss_curve[i].second);
  }

  // Updates to one context do not commute, so on a dataset with repeated
  // contexts the shuffle seed changes the trained table.
  TabularPolicy crowded = TabularPolicy::uniform(
      {"shared"}, {{"alpha", "bravo", "charlie"}}, LengthUnit::tokens_whitespace);
  std::vector<PreferencePair> repeats = {make_pair("shared", "alpha", "bravo"),
                                         make_pair("shared", "bravo", "charlie"),
                                         make_pair("shared", "charlie", "alpha")};
  cfg.epochs = 1;
  cfg.learning_rate = 0.9;
  cfg.seed = 11;
  TrainOutcome c = train_dpo(crowded, repeats, cfg);
  cfg.seed = 12;
  TrainOutcome d = train_dpo(crowded, repeats, cfg);
  CHECK_FALSE(c.policy == d.policy);  // different shuffle order, different table
}

TEST_CASE("with alpha zero the first batch reproduces the plain dpo loss") {
  Separable s = separable_dataset();
  TrainConfig cfg;
  cfg.dpo.alpha = 0.0;
  cfg.shuffle = false;
  cfg.batch_size = 4;
  cfg.epochs = 1;

  TrainOutcome out = train_dpo(s.policy, s.pairs, cfg);
  REQUIRE_FALSE(out.report.loss_curve.empty());

  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    auto ctx = s.policy.require_context(s.pairs[i].image);
    PairRef pr{ctx, 0, 1};
    expect += standard_dpo_loss(pair_logps(s.policy, s.policy, pr), cfg.dpo.beta);
  }
  expect /= 4.0;
  CHECK(out.report.loss_curve[0].second == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("full-batch loss is non-increasing at a small learning rate") {
  Separable s = separable_dataset();
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 30;
  cfg.batch_size = static_cast<int>(s.pairs.size());
  cfg.shuffle = false;

  TrainOutcome out = train_dpo(s.policy, s.pairs, cfg);
  REQUIRE(out.report.loss_curve.size() == 30);
  for (std::size_t i = 1; i < out.report.loss_curve.size(); ++i)
    CHECK(out.report.loss_curve[i].second <= out.report.loss_curve[i - 1].second + 1e-12);
}

TEST_CASE("an explicit reference pins regularization to its table") {
  Separable s = separable_dataset();
  TrainConfig cfg;
  cfg.epochs = 3;
  TrainOutcome first = train_dpo(s.policy, s.pairs, cfg);

  // Continuing from the trained policy with the original reference differs
  // from continuing with a per-run snapshot.
  TrainOutcome pinned = train_dpo(first.policy, s.policy, s.pairs, cfg);
  TrainOutcome rolling = train_dpo(first.policy, s.pairs, cfg);
  CHECK_FALSE(pinned.policy == rolling.policy);

  // A reference with different tables is rejected.
  TabularPolicy other = TabularPolicy::uniform(
      {"ctx0"}, {{"win 0", "lose 0"}}, LengthUnit::tokens_whitespace);
  CHECK_THROWS_AS(train_dpo(s.policy, other, s.pairs, cfg), Error);
}

TEST_CASE("oversized batches collapse to one step per epoch") {
  Separable s = separable_dataset();
  TrainConfig cfg;
  cfg.batch_size = 1000;
  cfg.epochs = 2;
  TrainOutcome out = train_dpo(s.policy, s.pairs, cfg);
  CHECK(out.report.loss_curve.size() == 2);
  json j = out.report.to_json();
  CHECK(j["loss_curve"].size() == 2);
  CHECK(j.contains("wallclock_seconds"));
}

TEST_CASE("sft examples validate and round trip") {
  EnhancedSftExample e{"img.png", "Describe.", "a boat"};
  e.validate();
  CHECK(EnhancedSftExample::from_json(e.to_json()) == e);

  EnhancedSftExample bad = e;
  bad.target.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK_THROWS_AS(EnhancedSftExample::from_json(bad.to_json()), SchemaError);
  bad = e;
  bad.instruction = "   ";
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  json j = e.to_json();
  j.erase("target");
  CHECK_THROWS_AS(EnhancedSftExample::from_json(j), SchemaError);
  j = e.to_json();
  j["extra"] = 1;
  CHECK_THROWS_AS(EnhancedSftExample::from_json(j), SchemaError);
}

TEST_CASE("enhanced sft drafts one example per image from the generator") {
  MockTask task = generate_mock_task(5, 10, 61);
  ScriptedBackend generator("planted", task);
  PromptPool pool;
  pool.prompts = {"Describe the image.", "What happens here?"};
  pool.sampler_seed = 21;

  std::vector<std::string> sft_images = task.images("sft");
  std::vector<std::string> reserved = task.images("pref");

  auto examples = build_enhanced_sft(sft_images, pool, generator, reserved);
  REQUIRE(examples.size() == 10);
  std::set<std::string> instructions;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    CHECK(examples[i].image == sft_images[i]);
    instructions.insert(examples[i].instruction);
    const auto& cands = task.require(examples[i].image).candidates;
    CHECK(std::find(cands.begin(), cands.end(), examples[i].target) != cands.end());
  }
  CHECK(instructions.size() == 2);  // both pool prompts get drawn across 10 images

  auto again = build_enhanced_sft(sft_images, pool, generator, reserved);
  CHECK(again == examples);
}

TEST_CASE("an image shared with the reserved corpora is an error naming it") {
  MockTask task = generate_mock_task(3, 3, 71);
  ScriptedBackend generator("planted", task);
  PromptPool pool;
  pool.prompts = {"Describe."};

  std::vector<std::string> images = task.images("sft");
  images.push_back(task.images("pref")[1]);
  CHECK_THROWS_WITH_AS(
      build_enhanced_sft(images, pool, generator, task.images("pref")),
      doctest::Contains(task.images("pref")[1].c_str()), ValidationError);
}

TEST_CASE("sft files round trip and reject empty targets") {
  std::vector<EnhancedSftExample> examples = {{"a.png", "Describe.", "a dog"},
                                              {"b.png", "Describe.", "a cat"}};
  auto path = std::filesystem::temp_directory_path() / "eaco_sft_rt.jsonl";
  write_enhanced_sft(path, examples);
  CHECK(read_enhanced_sft(path) == examples);

  {
    std::ofstream out(path, std::ios::app);
    out << R"({"image":"c.png","instruction":"Describe.","target":""})" << "\n";
  }
  CHECK_THROWS_WITH_AS(read_enhanced_sft(path), doctest::Contains("line 3"), SchemaError);
  std::filesystem::remove(path);
}

TEST_CASE("tabular sft fitting concentrates rows on their targets") {
  MockTask task = generate_mock_task(0, 6, 81);
  TabularPolicy policy = uniform_policy(task, LengthUnit::tokens_whitespace);

  std::vector<EnhancedSftExample> examples;
  for (const auto& entry : task.entries)
    examples.push_back({entry.image, "Describe.", entry.candidates[1]});

  SftTrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 0.5;
  TabularPolicy fitted = fit_sft_tabular(policy, examples, cfg);
  for (const auto& entry : task.entries) {
    auto ctx = fitted.require_context(entry.image);
    for (std::size_t i = 0; i < 4; ++i)
      if (i != 1) CHECK(fitted.logp(ctx, 1) > fitted.logp(ctx, i));
    CHECK(fitted.logp(ctx, 1) > policy.logp(ctx, 1));
  }

  std::vector<EnhancedSftExample> ghost = {{"nope.png", "Describe.", "x"}};
  CHECK_THROWS_AS(fit_sft_tabular(policy, ghost, cfg), LookupError);
  CHECK_THROWS_AS(fit_sft_tabular(policy, {}, cfg), ValidationError);
}

TEST_CASE("one round of iteration is one build, train, and eval cycle") {
  MockTask task = generate_mock_task(20, 0, 101);
  RubricBackend judge("oracle", task);
  auto gt = ground_truth_pairs(task, "Describe the image in detail.");

  IterateConfig cfg;
  cfg.rounds = 1;
  cfg.build.images = task.images("pref");
  cfg.build.pool.prompts = {"Describe the image in detail."};
  cfg.build.pool.sampler_seed = 7;
  cfg.build.tie_break = TieBreak::lexicographic;
  cfg.train.epochs = 4;
  cfg.train.seed = 7;

  TabularPolicy policy = uniform_policy(task, cfg.train.dpo.length_unit);
  IterateOutcome out = iterate_alignment(policy, cfg, judge, gt);
  CHECK(out.baseline.preference_accuracy == 0.0);
  REQUIRE(out.rounds.size() == 1);
  CHECK(out.rounds[0].round == 1);
  CHECK(out.rounds[0].build_stats.images == 20);
  CHECK(out.rounds[0].eval.preference_accuracy > out.baseline.preference_accuracy);
  CHECK(out.rounds[0].eval.n_pairs == gt.size());

  json j = out.rounds[0].to_json();
  CHECK(j["round"] == 1);
  CHECK(j.contains("build_stats"));
  CHECK(j.contains("eval"));
}

TEST_CASE("three rounds improve monotonically and rerun identically") {
  MockTask task = generate_mock_task(30, 0, 111);
  RubricBackend judge("oracle", task);
  auto gt = ground_truth_pairs(task, "Describe the image in detail.");

  IterateConfig cfg;
  cfg.rounds = 3;
  cfg.build.images = task.images("pref");
  cfg.build.pool.prompts = {"Describe the image in detail."};
  cfg.build.pool.sampler_seed = 19;
  cfg.build.tie_break = TieBreak::lexicographic;
  cfg.train.epochs = 3;
  cfg.train.seed = 19;

  TabularPolicy policy = uniform_policy(task, cfg.train.dpo.length_unit);
  IterateOutcome out = iterate_alignment(policy, cfg, judge, gt);
  REQUIRE(out.rounds.size() == 3);
  double prev = out.baseline.preference_accuracy;
  for (const auto& round : out.rounds) {
    CHECK(round.eval.preference_accuracy >= prev);
    prev = round.eval.preference_accuracy;
  }

  IterateOutcome rerun = iterate_alignment(policy, cfg, judge, gt);
  CHECK(rerun.policy == out.policy);
  REQUIRE(rerun.rounds.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(rerun.rounds[i].eval == out.rounds[i].eval);

  // The fixed-reference variant also runs and reports all rounds.
  cfg.reference_reset = ReferenceReset::fixed_initial;
  IterateOutcome pinned = iterate_alignment(policy, cfg, judge, gt);
  CHECK(pinned.rounds.size() == 3);
}

TEST_CASE("round failures carry the round index") {
  struct BrokenJudge : Backend {
    std::string id() const override { return "broken:judge"; }
    std::string generate(const GenerationRequest&) override { return "x"; }
    std::string judge(const std::string&, const std::string&) override {
      throw TerminalBackendError("judge endpoint is down", 0, 3);
    }
  };
  MockTask task = generate_mock_task(4, 0, 121);
  BrokenJudge judge;
  auto gt = ground_truth_pairs(task, "p");

  IterateConfig cfg;
  cfg.rounds = 2;
  cfg.build.images = task.images("pref");
  cfg.build.pool.prompts = {"p"};

  TabularPolicy policy = uniform_policy(task, cfg.train.dpo.length_unit);
  // Every image fails, so the round's build aborts; the error names round 1.
  CHECK_THROWS_WITH_AS(iterate_alignment(policy, cfg, judge, gt),
                       doctest::Contains("round 1"), Error);

  CHECK(to_string(reference_reset_from_string("per_round")) == "per_round");
  CHECK(to_string(reference_reset_from_string("fixed_initial")) == "fixed_initial");
  CHECK_THROWS_AS(reference_reset_from_string("sometimes"), LookupError);

  IterateConfig bad = cfg;
  bad.rounds = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  IterateConfig back = IterateConfig::from_json(cfg.to_json());
  CHECK(back.rounds == 2);
  CHECK(back.build.pool.prompts == cfg.build.pool.prompts);
}
