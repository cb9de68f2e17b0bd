#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eaco/eaco_loss.hpp"
#include "eaco/eval_harness.hpp"
#include "eaco/model_gateway.hpp"
#include "eaco/pair_builder.hpp"
#include "eaco/tabular_policy.hpp"

namespace eaco {

struct TrainConfig {
  DPOConfig dpo;
  double learning_rate = 0.1;
  int epochs = 1;  // 0 is an explicit no-op
  int batch_size = 1;
  std::int64_t seed = 0;
  bool shuffle = true;

  void validate() const;
  static TrainConfig from_json(const json& j);
  json to_json() const;
};

struct TrainReport {
  std::vector<std::pair<std::size_t, double>> loss_curve;  // (step, mean batch loss)
  double preference_accuracy_before = 0.0;
  double preference_accuracy_after = 0.0;
  double margin_before = 0.0;
  double margin_after = 0.0;
  double wallclock_seconds = 0.0;

  json to_json() const;
};

struct TrainOutcome {
  TabularPolicy policy;
  TrainReport report;
};

// Gradient descent on per_example_loss over shuffled batches. The reference
// is a frozen deep snapshot taken before the first step; the input policy is
// never mutated. Deterministic for a fixed config.
TrainOutcome train_dpo(const TabularPolicy& policy,
                       const std::vector<PreferencePair>& dataset,
                       const TrainConfig& cfg);
// Same, with an explicit reference policy (must share the input's tables).
TrainOutcome train_dpo(const TabularPolicy& policy, const TabularPolicy& reference,
                       const std::vector<PreferencePair>& dataset,
                       const TrainConfig& cfg);

struct EnhancedSftExample {
  std::string image;
  std::string instruction;
  std::string target;

  void validate() const;
  static EnhancedSftExample from_json(const json& j);
  json to_json() const;
  bool operator==(const EnhancedSftExample&) const = default;
};

// One example per image: instruction drawn from the pool's per-image seed
// stream, target generated by the post-tuning generator. Refuses any image
// found in reserved_images (the preference and critic corpora), listing the
// offenders.
std::vector<EnhancedSftExample> build_enhanced_sft(
    const std::vector<std::string>& images, const PromptPool& instruction_source,
    Backend& generator, const std::vector<std::string>& reserved_images);

void write_enhanced_sft(const std::filesystem::path& path,
                        const std::vector<EnhancedSftExample>& examples);
std::vector<EnhancedSftExample> read_enhanced_sft(const std::filesystem::path& path);

struct SftTrainConfig {
  double learning_rate = 0.1;
  int epochs = 1;
  std::int64_t seed = 0;
  bool shuffle = true;

  void validate() const;
  static SftTrainConfig from_json(const json& j);
  json to_json() const;
};

// Supervised fit on the tabular stand-in: per example, one negative
// log-likelihood descent step toward the target candidate. Every target must
// be a stored candidate of its image's context row.
TabularPolicy fit_sft_tabular(const TabularPolicy& policy,
                              const std::vector<EnhancedSftExample>& examples,
                              const SftTrainConfig& cfg);

// Whether each round's reference resets to that round's starting policy or
// stays pinned to the initial one.
enum class ReferenceReset { per_round, fixed_initial };
std::string to_string(ReferenceReset r);
ReferenceReset reference_reset_from_string(std::string_view s);

struct IterateConfig {
  int rounds = 3;
  BuildConfig build;  // generator descriptor is ignored: the policy generates
  TrainConfig train;
  ReferenceReset reference_reset = ReferenceReset::per_round;
  std::string generator_name = "policy";

  void validate() const;
  static IterateConfig from_json(const json& j);
  json to_json() const;
};

struct RoundSummary {
  int round = 0;
  BuildStats build_stats;
  TrainReport train_report;
  EvalSummary eval;

  json to_json() const;
};

struct IterateOutcome {
  TabularPolicy policy;
  EvalSummary baseline;  // eval_pairs scored before any round
  std::vector<RoundSummary> rounds;
};

// Round t: sample a fresh preference dataset with the current policy as the
// generator (pool seed re-derived per round), train, evaluate. Errors carry
// the round index.
IterateOutcome iterate_alignment(const TabularPolicy& start, const IterateConfig& cfg,
                                 Backend& judge,
                                 const std::vector<PreferencePair>& eval_pairs);
// Convenience overload constructing the judge from cfg.build.judge.
IterateOutcome iterate_alignment(const TabularPolicy& start, const IterateConfig& cfg,
                                 const std::vector<PreferencePair>& eval_pairs);

}  // namespace eaco
