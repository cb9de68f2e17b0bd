#include "eaco/feedback_ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>

#include "eaco/errors.hpp"
#include "eaco/text.hpp"

namespace eaco {

namespace {

void check_component(int value, const char* name) {
  if (value < 1 || value > 5)
    throw ValidationError(std::string(name) + " score " + std::to_string(value) +
                          " outside [1, 5]");
}

int get_component(const json& j, const char* name) {
  if (!j.contains(name))
    throw SchemaError("missing required field \"" + std::string(name) + "\"");
  const json& v = j.at(name);
  if (!v.is_number_integer())
    throw SchemaError("field \"" + std::string(name) + "\" must be an integer");
  int value = v.get<int>();
  if (value < 1 || value > 5)
    throw SchemaError("field \"" + std::string(name) + "\" value " +
                      std::to_string(value) + " outside [1, 5]");
  return value;
}

std::string get_string(const json& j, const char* name) {
  if (!j.contains(name))
    throw SchemaError("missing required field \"" + std::string(name) + "\"");
  const json& v = j.at(name);
  if (!v.is_string())
    throw SchemaError("field \"" + std::string(name) + "\" must be a string");
  return v.get<std::string>();
}

}  // namespace

void ScoreTriple::validate() const {
  check_component(helpfulness, "helpfulness");
  check_component(visual_faithfulness, "visual_faithfulness");
  check_component(ethics, "ethics");
}

int ScoreTriple::total() const {
  validate();
  return helpfulness + visual_faithfulness + ethics;
}

ScoreTriple ScoreTriple::from_json(const json& j) {
  require_keys(j, {"helpfulness", "visual_faithfulness", "ethics"}, "scores");
  ScoreTriple s;
  s.helpfulness = get_component(j, "helpfulness");
  s.visual_faithfulness = get_component(j, "visual_faithfulness");
  s.ethics = get_component(j, "ethics");
  return s;
}

json ScoreTriple::to_json() const {
  return json{{"helpfulness", helpfulness},
              {"visual_faithfulness", visual_faithfulness},
              {"ethics", ethics}};
}

int total_score(const ScoreTriple& s) { return s.total(); }

FeedbackResponse FeedbackResponse::from_json(const json& j) {
  require_keys(j, {"text", "scores", "source_model"}, "response");
  FeedbackResponse r;
  r.text = get_string(j, "text");
  if (!j.contains("scores"))
    throw SchemaError("missing required field \"scores\"");
  r.scores = ScoreTriple::from_json(j.at("scores"));
  r.source_model = get_string(j, "source_model");
  return r;
}

json FeedbackResponse::to_json() const {
  return json{{"text", text}, {"scores", scores.to_json()}, {"source_model", source_model}};
}

void FeedbackRecord::validate() const {
  if (id.empty()) throw SchemaError("record id must be nonempty");
  if (image.empty()) throw SchemaError("record image locator must be nonempty");
  if (responses.size() < 2)
    throw SchemaError("record \"" + id + "\" needs at least 2 responses, has " +
                      std::to_string(responses.size()));
  for (const auto& r : responses) {
    if (r.text.empty())
      throw SchemaError("record \"" + id + "\" has an empty response text");
    r.scores.validate();
  }
}

FeedbackRecord FeedbackRecord::from_json(const json& j) {
  require_keys(j, {"id", "prompt", "image", "responses"}, "record");
  FeedbackRecord rec;
  rec.id = get_string(j, "id");
  rec.prompt = get_string(j, "prompt");
  rec.image = get_string(j, "image");
  if (!j.contains("responses"))
    throw SchemaError("missing required field \"responses\"");
  const json& resp = j.at("responses");
  if (!resp.is_array())
    throw SchemaError("field \"responses\" must be an array");
  for (const json& r : resp) rec.responses.push_back(FeedbackResponse::from_json(r));
  rec.validate();
  return rec;
}

json FeedbackRecord::to_json() const {
  json resp = json::array();
  for (const auto& r : responses) resp.push_back(r.to_json());
  return json{{"id", id}, {"prompt", prompt}, {"image", image}, {"responses", std::move(resp)}};
}

std::string CriticInstruction::render() const {
  std::string out;
  out += "Id: " + id + "\n";
  out += "Prompt: " + prompt + "\n";
  out += "Response: " + response + "\n";
  out += "Score: [" + std::to_string(scores.helpfulness) + ", " +
         std::to_string(scores.visual_faithfulness) + ", " +
         std::to_string(scores.ethics) + "]\n";
  out += "Total Score: " + std::to_string(total);
  return out;
}

json CriticInstruction::to_json() const {
  return json{{"id", id},           {"prompt", prompt}, {"image", image},
              {"response", response}, {"scores", scores.to_json()}, {"total", total}};
}

void FilterConfig::validate() const {
  if (min_gap < 0)
    throw ValidationError("min_gap must be >= 0, got " + std::to_string(min_gap));
}

FilterConfig FilterConfig::from_json(const json& j) {
  require_keys(j, {"min_gap", "keep_all_responses"}, "filter config");
  FilterConfig cfg;
  if (j.contains("min_gap")) cfg.min_gap = j.at("min_gap").get<int>();
  if (j.contains("keep_all_responses"))
    cfg.keep_all_responses = j.at("keep_all_responses").get<bool>();
  cfg.validate();
  return cfg;
}

json FilterConfig::to_json() const {
  return json{{"min_gap", min_gap}, {"keep_all_responses", keep_all_responses}};
}

std::vector<FeedbackRecord> parse_feedback_records(std::istream& in, std::string_view where) {
  std::vector<FeedbackRecord> records;
  for_each_line(in, [&](std::size_t line_no, const std::string& line) {
    try {
      records.push_back(FeedbackRecord::from_json(parse_object_line(line_no, line)));
    } catch (const SchemaError& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) != 0) msg = "line " + std::to_string(line_no) + ": " + msg;
      throw SchemaError(std::string(where) + " " + msg);
    }
  });
  return records;
}

std::vector<FeedbackRecord> read_feedback_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feedback file " + path.string());
  return parse_feedback_records(in, path.string());
}

void write_feedback_file(const std::filesystem::path& path,
                         const std::vector<FeedbackRecord>& records) {
  JsonlWriter out(path);
  for (const auto& r : records) {
    r.validate();
    out.write(r.to_json());
  }
}

namespace {

CriticInstruction lift(const FeedbackRecord& rec, const FeedbackResponse& resp) {
  CriticInstruction ins;
  ins.id = rec.id;
  ins.prompt = rec.prompt;
  ins.image = rec.image;
  ins.response = resp.text;
  ins.scores = resp.scores;
  ins.total = resp.scores.total();
  return ins;
}

}  // namespace

FilterOutcome filter_by_score_gap(const std::vector<FeedbackRecord>& records,
                                  const FilterConfig& cfg) {
  cfg.validate();
  FilterOutcome out;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const FeedbackRecord& rec = records[r];
    rec.validate();
    std::vector<int> totals(rec.responses.size());
    for (std::size_t i = 0; i < rec.responses.size(); ++i)
      totals[i] = rec.responses[i].scores.total();

    struct Candidate {
      int gap;
      std::size_t i, j;
    };
    std::vector<Candidate> kept;
    for (std::size_t i = 0; i < rec.responses.size(); ++i)
      for (std::size_t j = i + 1; j < rec.responses.size(); ++j) {
        int gap = std::abs(totals[i] - totals[j]);
        if (gap >= cfg.min_gap) kept.push_back({gap, i, j});
      }
    if (kept.empty()) {
      ++out.records_skipped;
      continue;
    }
    std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
      if (a.gap != b.gap) return a.gap > b.gap;
      if (a.i != b.i) return a.i < b.i;
      return a.j < b.j;
    });
    out.retained_records.push_back(r);
    for (const Candidate& c : kept) {
      // Higher total first; on a tie the earlier response leads.
      std::size_t hi = totals[c.j] > totals[c.i] ? c.j : c.i;
      std::size_t lo = hi == c.i ? c.j : c.i;
      out.pairs.emplace_back(lift(rec, rec.responses[hi]), lift(rec, rec.responses[lo]));
    }
  }
  return out;
}

SftExample SftExample::from_json(const json& j) {
  require_keys(j, {"id", "image", "input", "target"}, "sft example");
  SftExample e;
  e.id = get_string(j, "id");
  e.image = get_string(j, "image");
  e.input = get_string(j, "input");
  e.target = get_string(j, "target");
  return e;
}

json SftExample::to_json() const {
  return json{{"id", id}, {"image", image}, {"input", input}, {"target", target}};
}

namespace {

SftExample make_example(const CriticInstruction& ins, PromptStyle style) {
  SftExample e;
  e.id = ins.id;
  e.image = ins.image;
  e.input = render_critic_prompt(style, ins.prompt, ins.response);
  e.target = render_triple_verdict(ins.scores.helpfulness, ins.scores.visual_faithfulness,
                                   ins.scores.ethics);
  return e;
}

std::vector<SftExample> examples_from_instructions(const std::vector<CriticInstruction>& all,
                                                   PromptStyle style) {
  std::vector<SftExample> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& ins : all)
    if (seen.insert({ins.id, ins.response}).second) out.push_back(make_example(ins, style));
  return out;
}

}  // namespace

std::vector<SftExample> build_critic_sft_examples(const std::vector<InstructionPair>& pairs,
                                                  PromptStyle style) {
  std::vector<CriticInstruction> flat;
  for (const auto& [w, l] : pairs) {
    flat.push_back(w);
    flat.push_back(l);
  }
  return examples_from_instructions(flat, style);
}

void write_sft_examples(const std::filesystem::path& path,
                        const std::vector<SftExample>& examples) {
  JsonlWriter out(path);
  for (const auto& e : examples) out.write(e.to_json());
}

std::vector<SftExample> read_sft_examples(const std::filesystem::path& path) {
  std::vector<SftExample> out;
  for_each_line(path, [&](std::size_t line_no, const std::string& line) {
    try {
      out.push_back(SftExample::from_json(parse_object_line(line_no, line)));
    } catch (const SchemaError& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) != 0) msg = "line " + std::to_string(line_no) + ": " + msg;
      throw SchemaError(path.string() + " " + msg);
    }
  });
  return out;
}

json RefineStats::to_json() const {
  return json{{"records_in", records_in},
              {"records_skipped", records_skipped},
              {"pairs_out", pairs_out},
              {"examples_out", examples_out}};
}

RefineResult refine_feedback(const std::vector<FeedbackRecord>& records,
                             const FilterConfig& cfg, PromptStyle style) {
  RefineResult result;
  FilterOutcome filtered = filter_by_score_gap(records, cfg);
  result.pairs = std::move(filtered.pairs);

  std::vector<CriticInstruction> flat;
  if (cfg.keep_all_responses) {
    for (std::size_t r : filtered.retained_records)
      for (const auto& resp : records[r].responses) flat.push_back(lift(records[r], resp));
  } else {
    for (const auto& [w, l] : result.pairs) {
      flat.push_back(w);
      flat.push_back(l);
    }
  }
  result.examples = examples_from_instructions(flat, style);

  result.stats.records_in = records.size();
  result.stats.records_skipped = filtered.records_skipped;
  result.stats.pairs_out = result.pairs.size();
  result.stats.examples_out = result.examples.size();
  return result;
}

}  // namespace eaco
