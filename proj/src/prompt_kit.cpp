#include "eaco/prompt_kit.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "eaco/errors.hpp"
#include "eaco/text.hpp"

#ifndef EACO_DEFAULT_PROMPT_DIR
#define EACO_DEFAULT_PROMPT_DIR ""
#endif

namespace eaco {

namespace {

constexpr std::string_view kInstructionPlaceholder = "⟨Instruction⟩";
constexpr std::string_view kResponsePlaceholder = "⟨Response⟩";

struct CriterionDef {
  const char* key;
  std::vector<std::string_view> aliases;
};

const std::vector<CriterionDef>& rating_criteria() {
  static const std::vector<CriterionDef> defs = {
      {"relevance", {"Relevance"}},
      {"substantial_coverage", {"Substantial Coverage"}},
      {"basic_elements", {"Basic Elements"}},
      {"clarity_organization", {"Clarity and Organization"}},
      {"high_quality", {"High Quality"}},
  };
  return defs;
}

const std::vector<CriterionDef>& triple_criteria() {
  static const std::vector<CriterionDef> defs = {
      {"helpfulness", {"Helpfulness"}},
      {"visual_faithfulness", {"Visual Faithfulness"}},
      {"ethics", {"Ethical Considerations", "Ethics"}},
  };
  return defs;
}

// Parses an integer right after `pos` allowing "<spaces> : <spaces> digits".
// Returns the value and the offset just past the digits, or nullopt.
struct NumberMatch {
  long value = 0;
  std::size_t end = 0;
};

std::optional<NumberMatch> match_colon_number(std::string_view text, std::size_t pos) {
  std::size_t i = pos;
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  if (i >= text.size() || text[i] != ':') return std::nullopt;
  ++i;
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  std::size_t start = i;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  if (i == start || i - start > 9) return std::nullopt;
  long value = 0;
  auto res = std::from_chars(text.data() + start, text.data() + i, value);
  if (res.ec != std::errc()) return std::nullopt;
  return NumberMatch{value, i};
}

// All "<keyword> : N" matches, case-insensitive, as (digit offset, value).
std::vector<std::pair<std::size_t, long>> keyword_numbers(std::string_view text,
                                                          std::string_view keyword) {
  std::vector<std::pair<std::size_t, long>> out;
  std::size_t pos = 0;
  while ((pos = ifind(text, keyword, pos)) != std::string_view::npos) {
    if (auto m = match_colon_number(text, pos + keyword.size()))
      out.emplace_back(m->end, m->value);
    ++pos;
  }
  return out;
}

// The first nonempty line, when it is just 5-6 integers, is a bare score
// line; the last integer is the total.
std::optional<std::vector<long>> leading_bare_scores(std::string_view text) {
  std::size_t begin = 0;
  while (begin < text.size() && (text[begin] == '\n' || text[begin] == '\r')) ++begin;
  std::size_t end = text.find('\n', begin);
  std::string line(text.substr(begin, end == std::string_view::npos ? end : end - begin));
  std::istringstream in(line);
  std::vector<long> values;
  std::string tok;
  while (in >> tok) {
    if (tok.size() > 9 ||
        !std::all_of(tok.begin(), tok.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; }))
      return std::nullopt;
    values.push_back(std::strtol(tok.c_str(), nullptr, 10));
  }
  if (values.size() < 5 || values.size() > 6) return std::nullopt;
  return values;
}

struct Occurrence {
  std::size_t pos = 0;
  int rubric = 0;  // 0 rating, 1 triple
  std::size_t crit = 0;
};

std::vector<Occurrence> name_occurrences(std::string_view text) {
  std::vector<Occurrence> out;
  for (int rubric = 0; rubric < 2; ++rubric) {
    const auto& defs = rubric == 0 ? rating_criteria() : triple_criteria();
    for (std::size_t c = 0; c < defs.size(); ++c) {
      for (std::string_view alias : defs[c].aliases) {
        std::size_t pos = 0;
        while ((pos = ifind(text, alias, pos)) != std::string_view::npos) {
          out.push_back(Occurrence{pos, rubric, c});
          pos += alias.size();
        }
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Occurrence& a, const Occurrence& b) { return a.pos < b.pos; });
  return out;
}

void check_score_range(int v, const char* what) {
  if (v < 1 || v > 5)
    throw ValidationError(std::string(what) + " must be within [1, 5]");
}

}  // namespace

std::string to_string(PromptStyle s) {
  switch (s) {
    case PromptStyle::rating: return "rating";
    case PromptStyle::additive: return "additive";
    case PromptStyle::subtractive: return "subtractive";
  }
  return "rating";
}

PromptStyle prompt_style_from_string(std::string_view s) {
  if (s == "rating") return PromptStyle::rating;
  if (s == "additive") return PromptStyle::additive;
  if (s == "subtractive") return PromptStyle::subtractive;
  throw SchemaError("unknown prompt style \"" + std::string(s) +
                    "\" (expected rating, additive, or subtractive)");
}

std::string to_string(VerdictRubric r) {
  switch (r) {
    case VerdictRubric::rating_five: return "rating_five";
    case VerdictRubric::feedback_triple: return "feedback_triple";
    case VerdictRubric::unknown: return "unknown";
  }
  return "unknown";
}

const int* CriticVerdict::criterion(std::string_view name) const {
  for (const auto& [key, value] : criterion_scores)
    if (key == name) return &value;
  return nullptr;
}

int CriticVerdict::criteria_sum() const {
  int sum = 0;
  for (const auto& [key, value] : criterion_scores) sum += value;
  return sum;
}

json CriticVerdict::to_json() const {
  json criteria = json::object();
  for (const auto& [key, value] : criterion_scores) criteria[key] = value;
  return json{{"criteria", std::move(criteria)},
              {"total", total},
              {"reported_total", reported_total},
              {"total_corrected", total_corrected},
              {"rubric", to_string(rubric)},
              {"raw_text", raw_text}};
}

TemplateStore::TemplateStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string TemplateStore::raw(PromptStyle style) const {
  return raw_named(to_string(style));
}

std::string TemplateStore::raw_named(const std::string& name) const {
  auto file = dir_ / (name + ".txt");
  std::ifstream in(file);
  if (!in) {
    std::string known;
    if (std::filesystem::is_directory(dir_)) {
      for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() == ".txt") {
          if (!known.empty()) known += ", ";
          known += entry.path().stem().string();
        }
      }
    }
    throw LookupError("unknown prompt style \"" + name + "\" (known styles: " +
                      (known.empty() ? "none" : known) + ") in " + dir_.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string TemplateStore::render(PromptStyle style, std::string_view instruction,
                                  std::string_view response) const {
  return render_named(to_string(style), instruction, response);
}

std::string TemplateStore::render_named(const std::string& name,
                                        std::string_view instruction,
                                        std::string_view response) const {
  if (trim(instruction).empty())
    throw ValidationError("render_critic_prompt: empty instruction");
  if (trim(response).empty())
    throw ValidationError("render_critic_prompt: empty response");
  std::string text = raw_named(name);
  if (text.find(kInstructionPlaceholder) == std::string::npos ||
      text.find(kResponsePlaceholder) == std::string::npos)
    throw SchemaError("template \"" + name + "\" lacks instruction/response placeholders");
  text = replace_all(std::move(text), kInstructionPlaceholder, instruction);
  text = replace_all(std::move(text), kResponsePlaceholder, response);
  return text;
}

const TemplateStore& TemplateStore::builtin() {
  static const TemplateStore store = [] {
    const char* env = std::getenv("EACO_PROMPT_DIR");
    if (env && *env) return TemplateStore(env);
    return TemplateStore(EACO_DEFAULT_PROMPT_DIR);
  }();
  return store;
}

std::string render_critic_prompt(PromptStyle style, std::string_view instruction,
                                 std::string_view response) {
  return TemplateStore::builtin().render(style, instruction, response);
}

CriticVerdict parse_verdict(std::string_view raw, PromptStyle style) {
  (void)style;  // all bundled styles share the rating_five rubric/range
  CriticVerdict v;
  v.raw_text = std::string(raw);

  // Candidate totals, keyed by position so the last mention wins.
  std::optional<std::pair<std::size_t, long>> best_total;
  auto consider = [&](std::size_t pos, long value) {
    if (!best_total || pos >= best_total->first) best_total = {pos, value};
  };
  for (auto [pos, value] : keyword_numbers(raw, "score")) consider(pos, value);

  auto header = leading_bare_scores(raw);
  if (header) {
    std::size_t line_end = raw.find('\n');
    consider(line_end == std::string_view::npos ? raw.size() : line_end,
             header->back());
  }

  // Criterion spans: first occurrence of each name, value taken from the
  // first Score:/Rating: number before the next different criterion name.
  auto occurrences = name_occurrences(raw);
  int mentions[2] = {0, 0};
  std::map<std::pair<int, std::size_t>, int> extracted;
  std::set<std::pair<int, std::size_t>> seen;
  for (std::size_t i = 0; i < occurrences.size(); ++i) {
    const Occurrence& occ = occurrences[i];
    if (!seen.insert({occ.rubric, occ.crit}).second) continue;
    ++mentions[occ.rubric];
    std::size_t window_end = raw.size();
    for (std::size_t j = i + 1; j < occurrences.size(); ++j) {
      if (occurrences[j].rubric != occ.rubric || occurrences[j].crit != occ.crit) {
        window_end = occurrences[j].pos;
        break;
      }
    }
    std::string_view window = raw.substr(occ.pos, window_end - occ.pos);
    std::vector<std::pair<std::size_t, long>> hits;
    for (const char* kw : {"score", "rating"})
      for (auto h : keyword_numbers(window, kw)) hits.push_back(h);
    if (hits.empty()) continue;
    auto first = *std::min_element(hits.begin(), hits.end());
    if (first.second >= 1 && first.second <= 5)
      extracted[{occ.rubric, occ.crit}] = static_cast<int>(first.second);
  }

  int scored[2] = {0, 0};
  for (const auto& [key, value] : extracted) ++scored[key.first];

  int rubric_idx;
  if (scored[0] != scored[1])
    rubric_idx = scored[1] > scored[0] ? 1 : 0;
  else if (mentions[0] != mentions[1])
    rubric_idx = mentions[1] > mentions[0] ? 1 : 0;
  else
    rubric_idx = 0;
  bool any_names = mentions[0] + mentions[1] > 0;
  v.rubric = !any_names ? VerdictRubric::unknown
             : rubric_idx == 1 ? VerdictRubric::feedback_triple
                               : VerdictRubric::rating_five;

  const auto& defs = rubric_idx == 1 ? triple_criteria() : rating_criteria();
  for (std::size_t c = 0; c < defs.size(); ++c) {
    auto it = extracted.find({rubric_idx, c});
    if (it != extracted.end()) v.criterion_scores.emplace_back(defs[c].key, it->second);
  }

  // A rating-shaped header fills criteria the spans did not provide.
  if (header && rubric_idx == 0 && v.criterion_scores.size() < defs.size()) {
    for (std::size_t c = 0; c + 1 < header->size() && c < defs.size(); ++c) {
      long value = (*header)[c];
      if (value < 1 || value > 5) continue;
      if (!v.criterion(defs[c].key))
        v.criterion_scores.emplace_back(defs[c].key, static_cast<int>(value));
    }
    if (!v.criterion_scores.empty() && v.rubric == VerdictRubric::unknown)
      v.rubric = VerdictRubric::rating_five;
    // Keep canonical criterion order after mixing spans and header values.
    std::stable_sort(v.criterion_scores.begin(), v.criterion_scores.end(),
                     [&](const auto& a, const auto& b) {
                       auto rank = [&](std::string_view key) {
                         for (std::size_t c = 0; c < defs.size(); ++c)
                           if (key == defs[c].key) return c;
                         return defs.size();
                       };
                       return rank(a.first) < rank(b.first);
                     });
  }

  bool all_present = v.criterion_scores.size() ==
                     (rubric_idx == 1 ? triple_criteria().size() : rating_criteria().size());
  if (!best_total && !all_present)
    throw VerdictParseError("no total score found in verdict text", v.raw_text);

  long reported = best_total ? best_total->second : v.criteria_sum();
  v.reported_total = static_cast<int>(reported);
  v.total = v.reported_total;

  if (all_present && v.criteria_sum() != v.total) {
    v.total = v.criteria_sum();
    v.total_corrected = true;
  }

  int lo = v.rubric == VerdictRubric::feedback_triple ? 3 : 5;
  int hi = v.rubric == VerdictRubric::feedback_triple ? 15 : 25;
  if (v.total < lo || v.total > hi)
    throw VerdictRangeError("verdict total " + std::to_string(v.total) +
                                " outside [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]",
                            v.raw_text, v.total);
  return v;
}

std::vector<Violation> validate_verdict(const CriticVerdict& v, PromptStyle style) {
  (void)style;
  std::vector<Violation> out;
  int lo = v.rubric == VerdictRubric::feedback_triple ? 3 : 5;
  int hi = v.rubric == VerdictRubric::feedback_triple ? 15 : 25;
  if (v.total < lo || v.total > hi)
    out.push_back({"total_range", "total " + std::to_string(v.total) + " outside [" +
                                      std::to_string(lo) + ", " + std::to_string(hi) +
                                      "]"});
  for (const auto& [key, value] : v.criterion_scores)
    if (value < 1 || value > 5)
      out.push_back({"criterion_range",
                     key + " score " + std::to_string(value) + " outside [1, 5]"});
  std::size_t expected = v.rubric == VerdictRubric::feedback_triple
                             ? triple_criteria().size()
                             : rating_criteria().size();
  if (v.criterion_scores.size() == expected && v.criteria_sum() != v.total)
    out.push_back({"total_mismatch", "criteria sum " + std::to_string(v.criteria_sum()) +
                                         " != total " + std::to_string(v.total)});
  if (v.total_corrected)
    out.push_back({"total_corrected", "reported " + std::to_string(v.reported_total) +
                                          ", criteria sum " + std::to_string(v.total)});
  return out;
}

std::string render_rating_verdict(const std::array<int, 5>& scores) {
  const auto& defs = rating_criteria();
  int total = 0;
  for (int s : scores) {
    check_score_range(s, "rating criterion score");
    total += s;
  }
  std::string out;
  for (std::size_t c = 0; c < defs.size(); ++c) {
    out += defs[c].aliases.front();
    out += ": Score: ";
    out += std::to_string(scores[c]);
    out += '\n';
  }
  out += "score: " + std::to_string(total);
  return out;
}

std::string render_triple_verdict(int helpfulness, int visual_faithfulness, int ethics) {
  check_score_range(helpfulness, "helpfulness");
  check_score_range(visual_faithfulness, "visual_faithfulness");
  check_score_range(ethics, "ethics");
  int total = helpfulness + visual_faithfulness + ethics;
  std::string out;
  out += "Helpfulness: Rating: " + std::to_string(helpfulness) + "\n";
  out += "Visual Faithfulness: Rating: " + std::to_string(visual_faithfulness) + "\n";
  out += "Ethical Considerations: Rating: " + std::to_string(ethics) + "\n";
  out += "score: " + std::to_string(total);
  return out;
}

}  // namespace eaco
