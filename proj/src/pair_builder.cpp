#include "eaco/pair_builder.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "eaco/errors.hpp"
#include "eaco/text.hpp"

namespace eaco {

void PromptPool::validate() const {
  if (prompts.empty()) throw ValidationError("prompt pool is empty");
  for (const auto& p : prompts)
    if (trim(p).empty()) throw ValidationError("prompt pool contains a blank prompt");
}

PromptPool PromptPool::from_json(const json& j) {
  require_keys(j, {"prompts", "sampler_seed"}, "prompt pool");
  PromptPool pool;
  if (j.contains("prompts")) pool.prompts = j["prompts"].get<std::vector<std::string>>();
  if (j.contains("sampler_seed")) pool.sampler_seed = j["sampler_seed"].get<std::int64_t>();
  return pool;
}

json PromptPool::to_json() const {
  return json{{"prompts", prompts}, {"sampler_seed", sampler_seed}};
}

std::string to_string(TieBreak t) {
  switch (t) {
    case TieBreak::skip: return "skip";
    case TieBreak::lexicographic: return "lexicographic";
  }
  throw LookupError("unknown tie break");
}

TieBreak tie_break_from_string(std::string_view s) {
  if (s == "skip") return TieBreak::skip;
  if (s == "lexicographic") return TieBreak::lexicographic;
  throw LookupError("unknown tie break '" + std::string(s) +
                    "' (known: skip, lexicographic)");
}

PairProvenance PairProvenance::from_json(const json& j) {
  require_keys(j, {"generator", "judge", "sampler_seed", "n"}, "pair provenance");
  PairProvenance p;
  if (j.contains("generator")) p.generator = j["generator"].get<std::string>();
  if (j.contains("judge")) p.judge = j["judge"].get<std::string>();
  if (j.contains("sampler_seed")) p.sampler_seed = j["sampler_seed"].get<std::int64_t>();
  if (j.contains("n")) p.n = j["n"].get<int>();
  return p;
}

json PairProvenance::to_json() const {
  return json{{"generator", generator},
              {"judge", judge},
              {"sampler_seed", sampler_seed},
              {"n", n}};
}

void PreferencePair::validate() const {
  if (image.empty()) throw ValidationError("preference pair has an empty image");
  if (preferred.empty() || rejected.empty())
    throw ValidationError("preference pair has an empty response text");
  if (preferred == rejected)
    throw ValidationError("preference pair has identical responses");
  if (score_w <= score_l)
    throw ValidationError("preference pair scores are not strictly ordered (" +
                          std::to_string(score_w) + " vs " + std::to_string(score_l) + ")");
}

PreferencePair PreferencePair::from_json(const json& j) {
  require_keys(j,
               {"prompt", "image", "preferred", "rejected", "score_w", "score_l",
                "provenance"},
               "preference pair");
  for (const char* key : {"image", "preferred", "rejected", "score_w", "score_l"})
    if (!j.contains(key))
      throw SchemaError("preference pair: missing key '" + std::string(key) + "'");
  PreferencePair p;
  if (j.contains("prompt")) p.prompt = j["prompt"].get<std::string>();
  p.image = j["image"].get<std::string>();
  p.preferred = j["preferred"].get<std::string>();
  p.rejected = j["rejected"].get<std::string>();
  p.score_w = j["score_w"].get<int>();
  p.score_l = j["score_l"].get<int>();
  if (j.contains("provenance")) p.provenance = PairProvenance::from_json(j["provenance"]);
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("preference pair: ") + e.what());
  }
  return p;
}

json PreferencePair::to_json() const {
  return json{{"prompt", prompt},     {"image", image},
              {"preferred", preferred}, {"rejected", rejected},
              {"score_w", score_w},   {"score_l", score_l},
              {"provenance", provenance.to_json()}};
}

void BuildConfig::validate() const {
  if (n < 2) throw ValidationError("responses per image must be at least 2");
  if (min_pair_gap < 0) throw ValidationError("min_pair_gap must be non-negative");
  pool.validate();
  generator.validate();
  judge.validate();
}

BuildConfig BuildConfig::from_json(const json& j) {
  require_keys(j,
               {"n", "images", "pool", "style", "generator", "judge", "tie_break",
                "min_pair_gap"},
               "build config");
  BuildConfig cfg;
  if (j.contains("n")) cfg.n = j["n"].get<int>();
  if (j.contains("images")) cfg.images = j["images"].get<std::vector<std::string>>();
  if (j.contains("pool")) cfg.pool = PromptPool::from_json(j["pool"]);
  if (j.contains("style")) cfg.style = prompt_style_from_string(j["style"].get<std::string>());
  if (j.contains("generator")) cfg.generator = BackendDescriptor::from_json(j["generator"]);
  if (j.contains("judge")) cfg.judge = BackendDescriptor::from_json(j["judge"]);
  if (j.contains("tie_break"))
    cfg.tie_break = tie_break_from_string(j["tie_break"].get<std::string>());
  if (j.contains("min_pair_gap")) cfg.min_pair_gap = j["min_pair_gap"].get<int>();
  return cfg;
}

json BuildConfig::to_json() const {
  return json{{"n", n},
              {"images", images},
              {"pool", pool.to_json()},
              {"style", to_string(style)},
              {"generator", generator.to_json()},
              {"judge", judge.to_json()},
              {"tie_break", to_string(tie_break)},
              {"min_pair_gap", min_pair_gap}};
}

json BuildStats::to_json() const {
  return json{{"images", images},
              {"pairs", pairs},
              {"skipped_ties", skipped_ties},
              {"dropped_responses", dropped_responses},
              {"failed_images", failed_images}};
}

std::vector<GeneratedResponse> generate_responses(const BuildConfig& cfg,
                                                  std::size_t image_index,
                                                  Backend& generator) {
  if (image_index >= cfg.images.size())
    throw ValidationError("image index out of range");
  const std::uint64_t stream =
      mix64(static_cast<std::uint64_t>(cfg.pool.sampler_seed), image_index);
  std::mt19937_64 prompt_rng(stream);

  std::vector<GeneratedResponse> out;
  out.reserve(static_cast<std::size_t>(cfg.n));
  for (int j = 0; j < cfg.n; ++j) {
    GeneratedResponse r;
    r.gen_index = j;
    r.prompt = cfg.pool.prompts[prompt_rng() % cfg.pool.prompts.size()];
    r.seed = static_cast<std::int64_t>(stream + static_cast<std::uint64_t>(j));

    GenerationRequest req;
    req.image = cfg.images[image_index];
    req.prompt = r.prompt;
    req.params.seed = r.seed;
    r.text = generator.generate(req);
    out.push_back(std::move(r));
  }
  return out;
}

ScoreOutcome score_responses(const BuildConfig& cfg, const std::string& image,
                             const std::vector<GeneratedResponse>& responses,
                             Backend& judge) {
  if (responses.empty()) throw ValidationError("no responses to score");
  ScoreOutcome out;
  for (const auto& r : responses) {
    const std::string critic_prompt = render_critic_prompt(cfg.style, r.prompt, r.text);
    std::string reason;
    bool scored = false;
    for (int attempt = 0; attempt < 2 && !scored; ++attempt) {
      const std::string raw = judge.judge(image, critic_prompt);
      try {
        ScoredResponse s;
        s.text = r.text;
        s.verdict = parse_verdict(raw, cfg.style);
        s.prompt_used = r.prompt;
        s.gen_index = r.gen_index;
        out.scored.push_back(std::move(s));
        scored = true;
      } catch (const VerdictParseError& e) {
        reason = e.what();
      } catch (const VerdictRangeError& e) {
        reason = e.what();
      }
    }
    if (!scored)
      out.dropped.push_back({r.gen_index, "verdict rejected twice: " + reason});
  }
  return out;
}

std::optional<PreferencePair> select_pair(const std::string& image,
                                          const std::vector<ScoredResponse>& scored,
                                          TieBreak tie_break, int min_pair_gap,
                                          const PairProvenance& provenance) {
  if (scored.size() < 2)
    throw ValidationError("pair selection needs at least 2 scored responses");

  // Extremes resolved by total, then by smallest gen_index, with tie flags
  // tracking whether another entry shares the extreme total.
  std::size_t w = 0, l = 0;
  for (std::size_t i = 1; i < scored.size(); ++i) {
    const int t = scored[i].verdict.total;
    if (t > scored[w].verdict.total ||
        (t == scored[w].verdict.total && scored[i].gen_index < scored[w].gen_index))
      w = i;
    if (t < scored[l].verdict.total ||
        (t == scored[l].verdict.total && scored[i].gen_index < scored[l].gen_index))
      l = i;
  }
  if (scored[w].verdict.total == scored[l].verdict.total) return std::nullopt;

  if (tie_break == TieBreak::skip) {
    std::size_t at_max = 0, at_min = 0;
    for (const auto& s : scored) {
      if (s.verdict.total == scored[w].verdict.total) ++at_max;
      if (s.verdict.total == scored[l].verdict.total) ++at_min;
    }
    if (at_max > 1 || at_min > 1) return std::nullopt;
  }

  if (scored[w].verdict.total - scored[l].verdict.total < min_pair_gap)
    return std::nullopt;
  if (scored[w].text == scored[l].text) return std::nullopt;

  PreferencePair pair;
  pair.prompt = scored[w].prompt_used;
  pair.image = image;
  pair.preferred = scored[w].text;
  pair.rejected = scored[l].text;
  pair.score_w = scored[w].verdict.total;
  pair.score_l = scored[l].verdict.total;
  pair.provenance = provenance;
  pair.validate();
  return pair;
}

namespace {

struct ImageOutcome {
  std::optional<PreferencePair> pair;
  std::size_t dropped = 0;
  bool skipped = false;
  bool failed = false;
  bool backend_failure = false;
  std::string failure_reason;
};

ImageOutcome process_image(const BuildConfig& cfg, std::size_t index,
                           Backend& generator, Backend& judge,
                           const PairProvenance& provenance) {
  ImageOutcome outcome;
  try {
    auto responses = generate_responses(cfg, index, generator);
    auto scores = score_responses(cfg, cfg.images[index], responses, judge);
    outcome.dropped = scores.dropped.size();
    if (scores.scored.size() < 2) {
      outcome.skipped = true;
      return outcome;
    }
    outcome.pair = select_pair(cfg.images[index], scores.scored, cfg.tie_break,
                               cfg.min_pair_gap, provenance);
    if (!outcome.pair) outcome.skipped = true;
  } catch (const BackendError& e) {
    outcome.failed = true;
    outcome.backend_failure = true;
    outcome.failure_reason = e.what();
  } catch (const LookupError& e) {
    outcome.failed = true;
    outcome.failure_reason = e.what();
  }
  return outcome;
}

}  // namespace

BuildResult build_preference_dataset(const BuildConfig& cfg, Backend& generator,
                                     Backend& judge) {
  cfg.validate();

  PairProvenance provenance;
  provenance.generator = generator.id();
  provenance.judge = judge.id();
  provenance.sampler_seed = cfg.pool.sampler_seed;
  provenance.n = cfg.n;

  std::vector<ImageOutcome> slots(cfg.images.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= slots.size()) return;
      try {
        slots[i] = process_image(cfg, i, generator, judge, provenance);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  int bound = std::min(cfg.generator.max_concurrency, cfg.judge.max_concurrency);
  if (bound < 1) bound = 1;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(bound), slots.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < workers; ++t) threads.emplace_back(worker);
  if (workers > 0) worker();
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);

  // Slots are merged in image order, so scheduling never changes the output.
  BuildResult result;
  result.stats.images = cfg.images.size();
  std::size_t backend_failures = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& slot = slots[i];
    result.stats.dropped_responses += slot.dropped;
    if (slot.failed) {
      ++result.stats.failed_images;
      if (slot.backend_failure) ++backend_failures;
      result.failures.push_back({cfg.images[i], slot.failure_reason});
    } else if (slot.pair) {
      ++result.stats.pairs;
      result.pairs.push_back(std::move(*slot.pair));
    } else if (slot.skipped) {
      ++result.stats.skipped_ties;
    }
  }

  if (result.stats.failed_images * 2 > result.stats.images) {
    std::string detail = "pair build aborted: " +
                         std::to_string(result.stats.failed_images) + " of " +
                         std::to_string(result.stats.images) + " images failed";
    for (std::size_t i = 0; i < result.failures.size() && i < 3; ++i)
      detail += "; " + result.failures[i].image + ": " + result.failures[i].reason;
    // A build sunk purely by transport keeps its backend typing so callers
    // can tell a dead endpoint from bad data.
    if (backend_failures == result.stats.failed_images) throw BackendError(detail);
    throw Error(detail);
  }
  return result;
}

BuildResult build_preference_dataset(const BuildConfig& cfg) {
  cfg.validate();
  auto generator = make_backend(cfg.generator);
  auto judge = make_backend(cfg.judge);
  return build_preference_dataset(cfg, *generator, *judge);
}

void write_pairs(const std::filesystem::path& path,
                 const std::vector<PreferencePair>& pairs) {
  JsonlWriter writer(path);
  for (const auto& p : pairs) writer.write(p.to_json());
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  std::vector<PreferencePair> pairs;
  for_each_line(path, [&](std::size_t line_no, const std::string& line) {
    try {
      pairs.push_back(PreferencePair::from_json(parse_object_line(line_no, line)));
    } catch (const SchemaError& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw SchemaError(path.string() + " " + msg);
      throw SchemaError(path.string() + " line " + std::to_string(line_no) + ": " + msg);
    }
  });
  return pairs;
}

std::vector<PreferencePair> ground_truth_pairs(const MockTask& task,
                                               const std::string& prompt,
                                               std::string_view split) {
  std::vector<PreferencePair> pairs;
  for (const auto& entry : task.entries) {
    if (!split.empty() && entry.split != split) continue;
    std::size_t w = 0, l = 0;
    std::vector<int> totals(entry.candidates.size());
    for (std::size_t i = 0; i < entry.candidates.size(); ++i) {
      totals[i] = rubric_mock_score(entry.reference, entry.candidates[i]).total;
      if (totals[i] > totals[w]) w = i;
      if (totals[i] < totals[l]) l = i;
    }
    if (totals[w] == totals[l]) continue;

    PreferencePair pair;
    pair.prompt = prompt;
    pair.image = entry.image;
    pair.preferred = entry.candidates[w];
    pair.rejected = entry.candidates[l];
    pair.score_w = totals[w];
    pair.score_l = totals[l];
    pair.provenance.generator = "planted";
    pair.provenance.judge = "ground_truth";
    pair.provenance.n = static_cast<int>(entry.candidates.size());
    pair.validate();
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace eaco
