#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eaco/jsonl.hpp"
#include "eaco/mock_task.hpp"
#include "eaco/model_gateway.hpp"
#include "eaco/prompt_kit.hpp"

namespace eaco {

struct PromptPool {
  std::vector<std::string> prompts;
  std::int64_t sampler_seed = 0;

  void validate() const;  // at least one nonempty prompt
  static PromptPool from_json(const json& j);
  json to_json() const;
};

struct GeneratedResponse {
  std::string prompt;
  std::string text;
  int gen_index = 0;
  std::int64_t seed = 0;
};

struct ScoredResponse {
  std::string text;
  CriticVerdict verdict;
  std::string prompt_used;
  int gen_index = 0;
};

struct DroppedResponse {
  int gen_index = 0;
  std::string reason;
};

struct ScoreOutcome {
  std::vector<ScoredResponse> scored;
  std::vector<DroppedResponse> dropped;
};

// What a tied best or worst score does to an image: no pair at all, or the
// smallest generation index wins.
enum class TieBreak { skip, lexicographic };
std::string to_string(TieBreak t);
TieBreak tie_break_from_string(std::string_view s);

struct PairProvenance {
  std::string generator;
  std::string judge;
  std::int64_t sampler_seed = 0;
  int n = 0;

  static PairProvenance from_json(const json& j);
  json to_json() const;
  bool operator==(const PairProvenance&) const = default;
};

struct PreferencePair {
  std::string prompt;
  std::string image;
  std::string preferred;
  std::string rejected;
  int score_w = 0;
  int score_l = 0;
  PairProvenance provenance;

  // score_w > score_l, preferred != rejected, nonempty texts and image.
  void validate() const;
  static PreferencePair from_json(const json& j);
  json to_json() const;
  bool operator==(const PreferencePair&) const = default;
};

struct BuildConfig {
  int n = 4;
  std::vector<std::string> images;
  PromptPool pool;
  PromptStyle style = PromptStyle::rating;
  BackendDescriptor generator;
  BackendDescriptor judge;
  TieBreak tie_break = TieBreak::skip;
  int min_pair_gap = 1;

  void validate() const;  // n >= 2, min_pair_gap >= 0, pool and backends valid
  static BuildConfig from_json(const json& j);
  json to_json() const;
};

struct BuildStats {
  std::size_t images = 0;
  std::size_t pairs = 0;
  std::size_t skipped_ties = 0;  // images that yielded no pair for score reasons
  std::size_t dropped_responses = 0;
  std::size_t failed_images = 0;

  json to_json() const;
  bool operator==(const BuildStats&) const = default;
};

struct ImageFailure {
  std::string image;
  std::string reason;
};

struct BuildResult {
  std::vector<PreferencePair> pairs;
  BuildStats stats;
  std::vector<ImageFailure> failures;
};

// Draws n prompts for one image from the pool's per-image seed stream and
// asks the generator for a response to each. Seeds are consecutive per image,
// so deterministic backends reproduce runs exactly.
std::vector<GeneratedResponse> generate_responses(const BuildConfig& cfg,
                                                  std::size_t image_index,
                                                  Backend& generator);

// Renders the critic prompt per response, asks the judge, and parses the
// verdict. A verdict that fails to parse is re-requested once, then the
// response is dropped with the reason kept.
ScoreOutcome score_responses(const BuildConfig& cfg, const std::string& image,
                             const std::vector<GeneratedResponse>& responses,
                             Backend& judge);

// Picks best and worst by verdict total. Returns nothing when best and worst
// coincide, when the tie policy forbids a tied extreme, when the texts are
// identical, or when the score gap is below min_pair_gap.
std::optional<PreferencePair> select_pair(const std::string& image,
                                          const std::vector<ScoredResponse>& scored,
                                          TieBreak tie_break, int min_pair_gap,
                                          const PairProvenance& provenance);

// One pass over cfg.images: generate, score, select. At most one pair per
// image, output follows input image order, failed images are reported in
// stats. Aborts when more than half the images fail.
BuildResult build_preference_dataset(const BuildConfig& cfg, Backend& generator,
                                     Backend& judge);

// Convenience overload constructing both backends from their descriptors.
BuildResult build_preference_dataset(const BuildConfig& cfg);

void write_pairs(const std::filesystem::path& path,
                 const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);

// The pairs a perfect judge would emit for a planted task: per entry, the
// candidates with the highest and lowest rubric totals against the entry's
// reference. Entries whose candidates all tie are skipped.
std::vector<PreferencePair> ground_truth_pairs(const MockTask& task,
                                               const std::string& prompt,
                                               std::string_view split = "pref");

}  // namespace eaco
