#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eaco/jsonl.hpp"
#include "eaco/prompt_kit.hpp"

namespace eaco {

// Three 1-to-5 judgments of one response; the total is their sum, in [3,15].
struct ScoreTriple {
  int helpfulness = 1;
  int visual_faithfulness = 1;
  int ethics = 1;

  void validate() const;
  int total() const;
  static ScoreTriple from_json(const json& j);
  json to_json() const;
  bool operator==(const ScoreTriple&) const = default;
};

int total_score(const ScoreTriple& s);

struct FeedbackResponse {
  std::string text;
  ScoreTriple scores;
  std::string source_model;

  static FeedbackResponse from_json(const json& j);
  json to_json() const;
  bool operator==(const FeedbackResponse&) const = default;
};

// One prompt/image with several scored responses. The image field is an
// opaque locator (path or URI); payloads are never embedded.
struct FeedbackRecord {
  std::string id;
  std::string prompt;
  std::string image;
  std::vector<FeedbackResponse> responses;

  void validate() const;
  static FeedbackRecord from_json(const json& j);
  json to_json() const;
  bool operator==(const FeedbackRecord&) const = default;
};

// One response lifted into a scoring-tuning example, rendering as
//   Id: ...
//   Prompt: ...
//   Response: ...
//   Score: [H, VF, EC]
//   Total Score: N
struct CriticInstruction {
  std::string id;
  std::string prompt;
  std::string image;
  std::string response;
  ScoreTriple scores;
  int total = 0;

  std::string render() const;
  json to_json() const;
  bool operator==(const CriticInstruction&) const = default;
};

struct FilterConfig {
  // Minimum |total_a - total_b| for a pair to survive, in total-score units.
  int min_gap = 3;
  // Emit every response of a record that keeps at least one pair, instead of
  // only the responses that appear in pairs.
  bool keep_all_responses = false;

  void validate() const;
  static FilterConfig from_json(const json& j);
  json to_json() const;
};

// Reads line-delimited records; blank lines are skipped, any malformed line
// raises SchemaError naming the line and the offending field. An empty
// stream yields an empty list.
std::vector<FeedbackRecord> parse_feedback_records(std::istream& in,
                                                   std::string_view where = "<stream>");
std::vector<FeedbackRecord> read_feedback_file(const std::filesystem::path& path);
void write_feedback_file(const std::filesystem::path& path,
                         const std::vector<FeedbackRecord>& records);

using InstructionPair = std::pair<CriticInstruction, CriticInstruction>;

struct FilterOutcome {
  std::vector<InstructionPair> pairs;
  // Indices into the input record list of records that kept at least one pair.
  std::vector<std::size_t> retained_records;
  std::size_t records_skipped = 0;
};

// All within-record response pairs whose total-score gap is at least
// cfg.min_gap. Pair order: record order, then descending gap, then response
// index; each pair puts the higher-scored response first (earlier index
// first on equal totals).
FilterOutcome filter_by_score_gap(const std::vector<FeedbackRecord>& records,
                                  const FilterConfig& cfg);

// One line of the scoring-tuning dataset: input is the rendered critic
// prompt, target the canonical verdict text (re-parses to the same scores).
struct SftExample {
  std::string id;
  std::string image;
  std::string input;
  std::string target;

  static SftExample from_json(const json& j);
  json to_json() const;
  bool operator==(const SftExample&) const = default;
};

// One example per distinct (id, response text) across the pair members,
// first-appearance order.
std::vector<SftExample> build_critic_sft_examples(const std::vector<InstructionPair>& pairs,
                                                  PromptStyle style);

void write_sft_examples(const std::filesystem::path& path,
                        const std::vector<SftExample>& examples);
std::vector<SftExample> read_sft_examples(const std::filesystem::path& path);

struct RefineStats {
  std::size_t records_in = 0;
  std::size_t records_skipped = 0;
  std::size_t pairs_out = 0;
  std::size_t examples_out = 0;

  json to_json() const;
};

struct RefineResult {
  std::vector<InstructionPair> pairs;
  std::vector<SftExample> examples;
  RefineStats stats;
};

// Full refinement pass: filter pairs, lift responses into examples
// (keep_all_responses widens to every response of retained records).
RefineResult refine_feedback(const std::vector<FeedbackRecord>& records,
                             const FilterConfig& cfg, PromptStyle style);

}  // namespace eaco
