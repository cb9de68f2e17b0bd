#include "eaco/ablation.hpp"

#include <charconv>
#include <random>

#include "eaco/errors.hpp"
#include "eaco/text.hpp"

namespace eaco {

std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::dataset_size: return "dataset_size";
    case AblationAxis::prompt_style: return "prompt_style";
    case AblationAxis::iterations: return "iterations";
    case AblationAxis::judge_kind: return "judge_kind";
  }
  throw LookupError("unknown ablation axis");
}

AblationAxis ablation_axis_from_string(std::string_view s) {
  if (s == "dataset_size") return AblationAxis::dataset_size;
  if (s == "prompt_style") return AblationAxis::prompt_style;
  if (s == "iterations") return AblationAxis::iterations;
  if (s == "judge_kind") return AblationAxis::judge_kind;
  throw LookupError("unknown ablation axis '" + std::string(s) +
                    "' (known: dataset_size, prompt_style, iterations, judge_kind)");
}

void PipelineSpec::validate() const {
  if (task.entries.empty()) throw ValidationError("pipeline task is empty");
  if (task.images("pref").empty())
    throw ValidationError("pipeline task has no preference-split entries");
  if (n < 2) throw ValidationError("responses per image must be at least 2");
  if (prompts.empty()) throw ValidationError("pipeline prompt list is empty");
  if (rounds < 1) throw ValidationError("rounds must be at least 1");
  if (min_pair_gap < 0) throw ValidationError("min_pair_gap must be non-negative");
  if (judge_kind != BackendKind::rubric_mock && judge_kind != BackendKind::self)
    throw ValidationError("judge_kind must be rubric_mock or self");
  if (judge_kind == BackendKind::self && rounds > 1)
    throw ValidationError("self judging is a single-round configuration");
  if (dataset_size > 0 && rounds > 1)
    throw ValidationError("dataset resampling is a single-round configuration");
  if (trim(eval_prompt).empty()) throw ValidationError("eval prompt is blank");
  train.validate();
}

std::vector<PreferencePair> subsample_pairs(const std::vector<PreferencePair>& pairs,
                                            std::size_t count, std::uint64_t seed) {
  if (pairs.empty()) throw ValidationError("cannot subsample an empty pair list");
  std::mt19937_64 rng(seed);
  std::vector<PreferencePair> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k)
    out.push_back(pairs[rng() % pairs.size()]);
  return out;
}

PipelineOutcome run_pipeline(const PipelineSpec& spec) {
  spec.validate();

  BuildConfig build;
  build.n = spec.n;
  build.images = spec.task.images("pref");
  build.pool.prompts = spec.prompts;
  build.pool.sampler_seed =
      static_cast<std::int64_t>(mix64(static_cast<std::uint64_t>(spec.seed), 1));
  build.style = spec.style;
  build.tie_break = spec.tie_break;
  build.min_pair_gap = spec.min_pair_gap;

  const TabularPolicy policy0 = uniform_policy(spec.task, spec.train.dpo.length_unit);
  const std::vector<PreferencePair> gt =
      ground_truth_pairs(spec.task, spec.eval_prompt, "pref");

  PipelineOutcome out;
  out.baseline = evaluate(policy0, gt);

  if (spec.rounds == 1) {
    ScriptedBackend generator("planted", spec.task);
    RubricBackend rubric("rubric", spec.task);
    Backend& judge = spec.judge_kind == BackendKind::self
                         ? static_cast<Backend&>(generator)
                         : static_cast<Backend&>(rubric);

    BuildResult built = build_preference_dataset(build, generator, judge);
    if (built.pairs.empty())
      throw ValidationError("the build produced no training pairs");
    std::vector<PreferencePair> pairs = std::move(built.pairs);
    if (spec.dataset_size > 0)
      pairs = subsample_pairs(pairs, spec.dataset_size,
                              mix64(static_cast<std::uint64_t>(spec.seed), 2));

    TrainOutcome trained = train_dpo(policy0, pairs, spec.train);
    out.policy = std::move(trained.policy);
    out.final_eval = evaluate(out.policy, gt);

    RoundSummary round;
    round.round = 1;
    round.build_stats = built.stats;
    round.train_report = std::move(trained.report);
    round.eval = out.final_eval;
    out.rounds.push_back(std::move(round));
    return out;
  }

  IterateConfig iterate;
  iterate.rounds = spec.rounds;
  iterate.build = build;
  iterate.train = spec.train;
  RubricBackend judge("rubric", spec.task);
  IterateOutcome iterated = iterate_alignment(policy0, iterate, judge, gt);
  out.policy = std::move(iterated.policy);
  out.rounds = std::move(iterated.rounds);
  out.final_eval = out.rounds.back().eval;
  return out;
}

void AblationSpec::validate() const {
  if (values.size() < 2) throw ValidationError("an ablation needs at least 2 values");
  base.validate();
}

namespace {

int parse_int_value(const std::string& value, const char* axis) {
  int parsed = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw SchemaError(std::string(axis) + " value '" + value + "' is not an integer");
  return parsed;
}

PipelineSpec apply_axis(const PipelineSpec& base, AblationAxis axis,
                        const std::string& value) {
  PipelineSpec spec = base;
  switch (axis) {
    case AblationAxis::dataset_size:
      spec.dataset_size = static_cast<std::size_t>(parse_int_value(value, "dataset_size"));
      break;
    case AblationAxis::prompt_style:
      spec.style = prompt_style_from_string(value);
      break;
    case AblationAxis::iterations:
      spec.rounds = parse_int_value(value, "iterations");
      break;
    case AblationAxis::judge_kind: {
      BackendKind kind = backend_kind_from_string(value);
      if (kind != BackendKind::rubric_mock && kind != BackendKind::self)
        throw SchemaError("judge_kind value must be rubric_mock or self");
      spec.judge_kind = kind;
      break;
    }
  }
  return spec;
}

}  // namespace

std::vector<AblationRow> run_ablation(const AblationSpec& spec) {
  spec.validate();
  std::vector<AblationRow> rows;
  rows.reserve(spec.values.size());
  for (const auto& value : spec.values) {
    AblationRow row;
    row.value = value;
    try {
      row.summary = run_pipeline(apply_axis(spec.base, spec.axis, value)).final_eval;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace eaco
