#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "eaco/jsonl.hpp"

namespace eaco {

// The three bundled critic prompt styles. Templates live as data files so new
// styles can be dropped in without code changes (see TemplateStore).
enum class PromptStyle { rating, additive, subtractive };

std::string to_string(PromptStyle s);
PromptStyle prompt_style_from_string(std::string_view s);

// Which scoring rubric a verdict text follows. rating_five is the five
// 1-to-5 criteria used by the critic prompts (total in [5,25]);
// feedback_triple is the helpfulness / visual faithfulness / ethics triple
// (total in [3,15]).
enum class VerdictRubric { rating_five, feedback_triple, unknown };

std::string to_string(VerdictRubric r);

struct CriticVerdict {
  // Insertion-ordered (name, score) pairs; names are canonical snake_case
  // keys (relevance, substantial_coverage, basic_elements,
  // clarity_organization, high_quality / helpfulness, visual_faithfulness,
  // ethics).
  std::vector<std::pair<std::string, int>> criterion_scores;
  int total = 0;
  // What the text itself reported before any sum correction.
  int reported_total = 0;
  bool total_corrected = false;
  VerdictRubric rubric = VerdictRubric::unknown;
  std::string raw_text;

  const int* criterion(std::string_view name) const;
  int criteria_sum() const;
  json to_json() const;
};

struct Violation {
  std::string code;
  std::string detail;
};

// Loads prompt templates from a directory of <name>.txt files containing
// the literal placeholders U+27E8/U+27E9 angle brackets around Instruction
// and Response.
class TemplateStore {
 public:
  explicit TemplateStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::string raw(PromptStyle style) const;
  std::string raw_named(const std::string& name) const;
  std::string render(PromptStyle style, std::string_view instruction,
                     std::string_view response) const;
  std::string render_named(const std::string& name, std::string_view instruction,
                           std::string_view response) const;

  // Resolution order: EACO_PROMPT_DIR environment variable, then the
  // compiled-in default directory.
  static const TemplateStore& builtin();

 private:
  std::filesystem::path dir_;
};

// Renders with the builtin store. Empty instruction or response is a
// validation error.
std::string render_critic_prompt(PromptStyle style, std::string_view instruction,
                                 std::string_view response);

// Extracts the total from the last occurrence of any accepted pattern
// ("score: N" in any casing, which also covers "Total score: N", or a
// leading bare line of 5-6 integers whose last element is the total), and
// per-criterion scores from "<Name>: ... Score: N" / "Rating: N" spans.
// When every criterion of the detected rubric is present and the sum
// disagrees with the reported total, the sum wins and the verdict is marked
// corrected. Throws VerdictParseError when no total can be extracted and
// VerdictRangeError when the total falls outside the rubric's range.
CriticVerdict parse_verdict(std::string_view raw, PromptStyle style);

// Range and consistency checks as data instead of exceptions.
std::vector<Violation> validate_verdict(const CriticVerdict& v, PromptStyle style);

// Canonical machine-written verdict texts; both re-parse exactly.
std::string render_rating_verdict(const std::array<int, 5>& scores);
std::string render_triple_verdict(int helpfulness, int visual_faithfulness, int ethics);

}  // namespace eaco
