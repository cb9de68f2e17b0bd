#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "eaco/eval_harness.hpp"
#include "eaco/mock_task.hpp"
#include "eaco/trainer.hpp"

namespace eaco {

enum class AblationAxis { dataset_size, prompt_style, iterations, judge_kind };
std::string to_string(AblationAxis a);
AblationAxis ablation_axis_from_string(std::string_view s);

// One self-contained build/train/eval run on a planted task. Generation comes
// from the planted candidates; judging from the task rubric, or from the
// generator itself when judge_kind is self. Evaluation scores the trained
// policy against the task's ground-truth pairs.
struct PipelineSpec {
  MockTask task;
  int n = 4;
  PromptStyle style = PromptStyle::rating;
  std::vector<std::string> prompts = {"Describe the image in detail."};
  int rounds = 1;
  BackendKind judge_kind = BackendKind::rubric_mock;  // rubric_mock or self
  std::size_t dataset_size = 0;  // 0 keeps every built pair; else resample
  TieBreak tie_break = TieBreak::lexicographic;
  int min_pair_gap = 1;
  TrainConfig train;
  std::int64_t seed = 0;
  std::string eval_prompt = "Describe the image in detail.";

  void validate() const;
};

struct PipelineOutcome {
  TabularPolicy policy;
  EvalSummary baseline;
  EvalSummary final_eval;
  std::vector<RoundSummary> rounds;
};

PipelineOutcome run_pipeline(const PipelineSpec& spec);

// count draws with replacement; a longer draw under the same seed extends a
// shorter one, so nested dataset sizes see nested training sets.
std::vector<PreferencePair> subsample_pairs(const std::vector<PreferencePair>& pairs,
                                            std::size_t count, std::uint64_t seed);

struct AblationSpec {
  AblationAxis axis = AblationAxis::dataset_size;
  std::vector<std::string> values;
  PipelineSpec base;

  void validate() const;  // at least 2 values
};

// One pipeline run per value under the shared base seed. A failing value is
// recorded in its row and the sweep continues.
std::vector<AblationRow> run_ablation(const AblationSpec& spec);

}  // namespace eaco
