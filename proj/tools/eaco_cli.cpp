// Single command-line entry point for the alignment pipeline. Subcommands
// are thin wrappers over the library modules; every run writes its artifacts
// into a fresh per-run directory with a manifest, and prior run directories
// are never touched again.
//
// Exit codes: 0 success, 1 runtime failure, 2 input or schema problem,
// 3 backend failure. check-overlap additionally exits 1 when the two files
// share image locators.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "eaco/ablation.hpp"
#include "eaco/errors.hpp"
#include "eaco/eval_harness.hpp"
#include "eaco/feedback_ingest.hpp"
#include "eaco/jsonl.hpp"
#include "eaco/mock_task.hpp"
#include "eaco/model_gateway.hpp"
#include "eaco/pair_builder.hpp"
#include "eaco/prompt_kit.hpp"
#include "eaco/tabular_policy.hpp"
#include "eaco/text.hpp"
#include "eaco/trainer.hpp"

namespace {

using namespace eaco;
namespace fs = std::filesystem;

constexpr const char* kToolVersion = "0.1.0";
constexpr const char* kDefaultPrompt = "Describe the image in detail.";

// A parsed, strictly validated config document plus the directory its
// relative paths resolve against.
struct ConfigDoc {
  json raw;
  fs::path dir;
  std::int64_t seed = 0;
  std::string output_dir = "runs";
};

const json& section(const ConfigDoc& doc, const char* name) {
  static const json empty = json::object();
  if (!doc.raw.contains(name)) return empty;
  return doc.raw.at(name);
}

fs::path resolve_config_path(const ConfigDoc& doc, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path;
  return doc.dir / path;
}

void require_object(const json& j, const char* name) {
  if (!j.is_object())
    throw SchemaError(std::string("config: section \"") + name + "\" must be an object");
}

ConfigDoc load_config(const std::string& config_path) {
  fs::path path(config_path);
  json j = read_json_file(path);
  if (!j.is_object()) throw SchemaError("config: top level must be an object");
  require_keys(j,
               {"version", "seed", "output_dir", "feedback", "filter", "prompts",
                "backends", "build", "dpo", "train", "sft", "eval", "ablation"},
               "config");
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != 1)
    throw SchemaError("config: missing or unsupported \"version\" (this tool reads version 1)");

  // Strict per-section schemas, checked up front regardless of which
  // command runs.
  if (j.contains("feedback")) {
    require_object(j["feedback"], "feedback");
    require_keys(j["feedback"], {"file"}, "feedback");
  }
  if (j.contains("filter")) {
    require_object(j["filter"], "filter");
    require_keys(j["filter"], {"min_gap", "keep_all_responses"}, "filter");
  }
  if (j.contains("prompts")) {
    require_object(j["prompts"], "prompts");
    require_keys(j["prompts"], {"prompts", "sampler_seed"}, "prompts");
  }
  if (j.contains("backends")) {
    require_object(j["backends"], "backends");
    require_keys(j["backends"], {"generator", "judge"}, "backends");
  }
  if (j.contains("build")) {
    require_object(j["build"], "build");
    require_keys(j["build"],
                 {"task_file", "split", "images", "n", "style", "tie_break", "min_pair_gap"},
                 "build");
  }
  if (j.contains("dpo")) {
    require_object(j["dpo"], "dpo");
    DPOConfig::from_json(j["dpo"]);
  }
  if (j.contains("train")) {
    require_object(j["train"], "train");
    require_keys(j["train"],
                 {"learning_rate", "epochs", "batch_size", "seed", "shuffle", "rounds",
                  "reference_reset", "pairs_file"},
                 "train");
  }
  if (j.contains("sft")) {
    require_object(j["sft"], "sft");
    require_keys(j["sft"], {"instructions", "sampler_seed"}, "sft");
  }
  if (j.contains("eval")) {
    require_object(j["eval"], "eval");
    require_keys(j["eval"], {"policy_file", "pairs_file", "use_ground_truth", "prompt"},
                 "eval");
  }
  if (j.contains("ablation")) {
    require_object(j["ablation"], "ablation");
    require_keys(j["ablation"], {"axis", "values", "rounds", "judge_kind", "dataset_size"},
                 "ablation");
  }

  ConfigDoc doc;
  doc.raw = std::move(j);
  doc.dir = fs::absolute(path).parent_path();
  if (doc.raw.contains("seed")) doc.seed = doc.raw["seed"].get<std::int64_t>();
  if (doc.raw.contains("output_dir"))
    doc.output_dir = doc.raw["output_dir"].get<std::string>();
  return doc;
}

void require_inputs(const std::vector<fs::path>& files) {
  std::string missing;
  for (const auto& f : files) {
    if (fs::exists(f)) continue;
    if (!missing.empty()) missing += ", ";
    missing += f.string();
  }
  if (!missing.empty()) throw IoError("missing input file(s): " + missing);
}

std::string utc_stamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string iso_utc() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Default names are auto-uniqued; an explicit --run-name that already exists
// is refused so earlier artifacts stay immutable.
fs::path make_run_dir(const fs::path& output_dir, const std::string& command,
                      const std::string& run_name, std::int64_t seed) {
  fs::create_directories(output_dir);
  if (!run_name.empty()) {
    fs::path dir = output_dir / run_name;
    if (fs::exists(dir))
      throw ValidationError("run directory already exists: " + dir.string() +
                            "; prior runs are never overwritten");
    fs::create_directories(dir);
    return dir;
  }
  std::string base = command + "_" + utc_stamp() + "_s" + std::to_string(seed);
  fs::path dir = output_dir / base;
  for (int k = 2; fs::exists(dir); ++k)
    dir = output_dir / (base + "_" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& run_dir, const char* command, const ConfigDoc& doc) {
  char fp[24];
  std::snprintf(fp, sizeof fp, "%016llx",
                static_cast<unsigned long long>(json_fingerprint(doc.raw)));
  json manifest{{"tool_version", kToolVersion},
                {"command", command},
                {"created_utc", iso_utc()},
                {"seed", doc.seed},
                {"config_fingerprint", std::string(fp)}};
  write_json_file(run_dir / "manifest.json", manifest);
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

PromptPool pool_from(const ConfigDoc& doc) {
  const json& p = section(doc, "prompts");
  PromptPool pool;
  if (p.contains("prompts")) pool.prompts = p["prompts"].get<std::vector<std::string>>();
  if (pool.prompts.empty()) pool.prompts = {kDefaultPrompt};
  pool.sampler_seed =
      p.contains("sampler_seed") ? p["sampler_seed"].get<std::int64_t>() : doc.seed;
  pool.validate();
  return pool;
}

fs::path task_path_from(const ConfigDoc& doc) {
  const json& b = section(doc, "build");
  if (!b.contains("task_file"))
    throw SchemaError("config: build.task_file is required by this command");
  return resolve_config_path(doc, b["task_file"].get<std::string>());
}

MockTask task_from(const ConfigDoc& doc) {
  fs::path path = task_path_from(doc);
  require_inputs({path});
  return load_mock_task(path);
}

// Relative task_file paths inside descriptors resolve against the config
// directory; mock kinds inherit build.task_file when they carry none.
BackendDescriptor backend_from(const ConfigDoc& doc, const char* which) {
  const json& b = section(doc, "backends");
  if (!b.contains(which))
    throw SchemaError(std::string("config: backends.") + which +
                      " is required by this command");
  BackendDescriptor desc = BackendDescriptor::from_json(b[which]);
  if (!desc.task_file.empty()) {
    desc.task_file = resolve_config_path(doc, desc.task_file).string();
  } else if (desc.kind == BackendKind::scripted_mock ||
             desc.kind == BackendKind::rubric_mock) {
    const json& build = section(doc, "build");
    if (build.contains("task_file"))
      desc.task_file = task_path_from(doc).string();
  }
  if (!desc.task_file.empty()) require_inputs({fs::path(desc.task_file)});
  return desc;
}

TrainConfig train_config_from(const ConfigDoc& doc) {
  TrainConfig cfg;
  if (doc.raw.contains("dpo")) cfg.dpo = DPOConfig::from_json(doc.raw["dpo"]);
  const json& t = section(doc, "train");
  cfg.learning_rate = t.value("learning_rate", cfg.learning_rate);
  cfg.epochs = t.value("epochs", cfg.epochs);
  cfg.batch_size = t.value("batch_size", cfg.batch_size);
  cfg.seed = t.contains("seed") ? t["seed"].get<std::int64_t>() : doc.seed;
  cfg.shuffle = t.value("shuffle", cfg.shuffle);
  cfg.validate();
  return cfg;
}

BuildConfig build_config_from(const ConfigDoc& doc, bool need_generator) {
  const json& b = section(doc, "build");
  BuildConfig cfg;
  cfg.n = b.value("n", cfg.n);
  if (b.contains("style"))
    cfg.style = prompt_style_from_string(b["style"].get<std::string>());
  if (b.contains("tie_break"))
    cfg.tie_break = tie_break_from_string(b["tie_break"].get<std::string>());
  cfg.min_pair_gap = b.value("min_pair_gap", cfg.min_pair_gap);
  cfg.pool = pool_from(doc);
  if (need_generator || section(doc, "backends").contains("generator"))
    cfg.generator = backend_from(doc, "generator");
  cfg.judge = backend_from(doc, "judge");

  if (b.contains("images")) {
    cfg.images = b["images"].get<std::vector<std::string>>();
  } else if (b.contains("task_file")) {
    cfg.images = task_from(doc).images(b.value("split", "pref"));
  } else {
    throw SchemaError("config: build needs either an images list or a task_file");
  }
  cfg.validate();
  return cfg;
}

std::string eval_prompt_from(const ConfigDoc& doc) {
  const json& ev = section(doc, "eval");
  return ev.value("prompt", std::string(kDefaultPrompt));
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit code.

struct RefineArgs {
  std::string in;
  std::string out;
  int min_gap = 3;
  std::string style = "rating";
  bool keep_all = false;
};

int cmd_refine_data(const RefineArgs& args) {
  fs::path in(args.in);
  require_inputs({in});
  FilterConfig fc;
  fc.min_gap = args.min_gap;
  fc.keep_all_responses = args.keep_all;
  fc.validate();
  auto records = read_feedback_file(in);
  RefineResult result = refine_feedback(records, fc, prompt_style_from_string(args.style));
  json summary = result.stats.to_json();
  if (!args.out.empty()) {
    fs::path out(args.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_sft_examples(out, result.examples);
    summary["out_file"] = out.string();
  }
  emit(summary);
  return 0;
}

struct RunArgs {
  std::string config;
  std::string run_name;
  std::string output_dir;
};

fs::path open_run_dir(const ConfigDoc& doc, const RunArgs& args, const char* command) {
  fs::path out_dir(args.output_dir.empty() ? doc.output_dir : args.output_dir);
  fs::path run = make_run_dir(out_dir, command, args.run_name, doc.seed);
  write_manifest(run, command, doc);
  return run;
}

int cmd_build_pairs(const RunArgs& args) {
  ConfigDoc doc = load_config(args.config);
  BuildConfig cfg = build_config_from(doc, true);
  fs::path run = open_run_dir(doc, args, "build-pairs");

  BuildResult result = build_preference_dataset(cfg);
  fs::path pairs_file = run / "pairs.jsonl";
  write_pairs(pairs_file, result.pairs);
  json failures = json::array();
  for (const auto& f : result.failures)
    failures.push_back({{"image", f.image}, {"reason", f.reason}});
  write_json_file(run / "build_stats.json",
                  {{"stats", result.stats.to_json()}, {"failures", failures}});
  emit({{"run_dir", run.string()},
        {"pairs_file", pairs_file.string()},
        {"stats", result.stats.to_json()}});
  return 0;
}

struct TrainArgs : RunArgs {
  std::string pairs;
};

int cmd_train_dpo(const TrainArgs& args) {
  ConfigDoc doc = load_config(args.config);
  const json& t = section(doc, "train");
  fs::path pairs_path;
  if (!args.pairs.empty())
    pairs_path = args.pairs;
  else if (t.contains("pairs_file"))
    pairs_path = resolve_config_path(doc, t["pairs_file"].get<std::string>());
  else
    throw SchemaError("config: train.pairs_file or --pairs is required");
  fs::path task_path = task_path_from(doc);
  require_inputs({pairs_path, task_path});

  TrainConfig cfg = train_config_from(doc);
  MockTask task = load_mock_task(task_path);
  TabularPolicy start = uniform_policy(task, cfg.dpo.length_unit);
  auto pairs = read_pairs(pairs_path);
  fs::path run = open_run_dir(doc, args, "train-dpo");

  TrainOutcome out = train_dpo(start, pairs, cfg);
  fs::path policy_file = run / "policy.json";
  out.policy.save(policy_file);
  write_json_file(run / "train_report.json", out.report.to_json());
  emit({{"run_dir", run.string()},
        {"policy_file", policy_file.string()},
        {"report", out.report.to_json()}});
  return 0;
}

int cmd_build_sft(const RunArgs& args) {
  ConfigDoc doc = load_config(args.config);
  MockTask task = task_from(doc);
  std::vector<std::string> images = task.images("sft");
  std::vector<std::string> reserved = task.images("pref");
  const json& fb = section(doc, "feedback");
  if (fb.contains("file")) {
    fs::path feedback_path = resolve_config_path(doc, fb["file"].get<std::string>());
    require_inputs({feedback_path});
    for (const auto& record : read_feedback_file(feedback_path))
      reserved.push_back(record.image);
  }

  const json& sft = section(doc, "sft");
  PromptPool pool = pool_from(doc);
  if (sft.contains("instructions"))
    pool.prompts = sft["instructions"].get<std::vector<std::string>>();
  if (sft.contains("sampler_seed"))
    pool.sampler_seed = sft["sampler_seed"].get<std::int64_t>();
  pool.validate();

  auto generator = make_backend(backend_from(doc, "generator"));
  fs::path run = open_run_dir(doc, args, "build-sft");
  auto examples = build_enhanced_sft(images, pool, *generator, reserved);
  fs::path sft_file = run / "enhanced_sft.jsonl";
  write_enhanced_sft(sft_file, examples);
  emit({{"run_dir", run.string()},
        {"sft_file", sft_file.string()},
        {"examples", examples.size()}});
  return 0;
}

struct EvalArgs : RunArgs {
  std::string policy;
  std::string pairs;
};

int cmd_eval(const EvalArgs& args) {
  ConfigDoc doc = load_config(args.config);
  const json& ev = section(doc, "eval");

  fs::path policy_path;
  if (!args.policy.empty())
    policy_path = args.policy;
  else if (ev.contains("policy_file"))
    policy_path = resolve_config_path(doc, ev["policy_file"].get<std::string>());
  else
    throw SchemaError("config: eval.policy_file or --policy is required");
  require_inputs({policy_path});

  std::vector<PreferencePair> pairs;
  if (!args.pairs.empty()) {
    require_inputs({fs::path(args.pairs)});
    pairs = read_pairs(args.pairs);
  } else if (ev.contains("pairs_file")) {
    fs::path p = resolve_config_path(doc, ev["pairs_file"].get<std::string>());
    require_inputs({p});
    pairs = read_pairs(p);
  } else if (ev.value("use_ground_truth", false)) {
    pairs = ground_truth_pairs(task_from(doc), eval_prompt_from(doc));
  } else {
    throw SchemaError(
        "config: eval needs pairs_file, use_ground_truth, or --pairs");
  }

  TabularPolicy policy = TabularPolicy::load(policy_path);
  EvalSummary summary = evaluate(policy, pairs);
  fs::path run = open_run_dir(doc, args, "eval");
  write_json_file(run / "eval.json", summary.to_json());
  emit({{"run_dir", run.string()}, {"summary", summary.to_json()}});
  return 0;
}

int cmd_ablate(const RunArgs& args) {
  ConfigDoc doc = load_config(args.config);
  const json& ab = section(doc, "ablation");
  if (!ab.contains("axis") || !ab.contains("values"))
    throw SchemaError("config: ablation.axis and ablation.values are required");

  AblationSpec spec;
  spec.axis = ablation_axis_from_string(ab["axis"].get<std::string>());
  for (const auto& v : ab["values"])
    spec.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());

  const json& b = section(doc, "build");
  spec.base.task = task_from(doc);
  spec.base.n = b.value("n", spec.base.n);
  if (b.contains("style"))
    spec.base.style = prompt_style_from_string(b["style"].get<std::string>());
  if (b.contains("tie_break"))
    spec.base.tie_break = tie_break_from_string(b["tie_break"].get<std::string>());
  spec.base.min_pair_gap = b.value("min_pair_gap", spec.base.min_pair_gap);
  spec.base.prompts = pool_from(doc).prompts;
  spec.base.rounds = ab.value("rounds", spec.base.rounds);
  if (ab.contains("judge_kind"))
    spec.base.judge_kind = backend_kind_from_string(ab["judge_kind"].get<std::string>());
  spec.base.dataset_size = ab.value("dataset_size", spec.base.dataset_size);
  spec.base.train = train_config_from(doc);
  spec.base.seed = doc.seed;
  spec.base.eval_prompt = eval_prompt_from(doc);
  spec.validate();

  fs::path run = open_run_dir(doc, args, "ablate");
  auto rows = run_ablation(spec);
  fs::path table_file = run / "ablation.csv";
  write_ablation_table(table_file, rows);
  json rows_json = json::array();
  for (const auto& row : rows) {
    json r{{"value", row.value}};
    if (row.error.empty())
      r["summary"] = row.summary.to_json();
    else
      r["error"] = row.error;
    rows_json.push_back(std::move(r));
  }
  write_json_file(run / "ablation.json", rows_json);
  emit({{"run_dir", run.string()},
        {"table_file", table_file.string()},
        {"rows", rows_json}});
  return 0;
}

struct IterateArgs : RunArgs {
  int rounds = 0;  // 0 defers to the config
};

int cmd_iterate(const IterateArgs& args) {
  ConfigDoc doc = load_config(args.config);
  const json& t = section(doc, "train");

  IterateConfig cfg;
  cfg.build = build_config_from(doc, false);
  cfg.train = train_config_from(doc);
  cfg.rounds = args.rounds > 0 ? args.rounds : t.value("rounds", cfg.rounds);
  if (t.contains("reference_reset"))
    cfg.reference_reset =
        reference_reset_from_string(t["reference_reset"].get<std::string>());
  cfg.validate();

  MockTask task = task_from(doc);
  TabularPolicy start = uniform_policy(task, cfg.train.dpo.length_unit);
  auto eval_pairs = ground_truth_pairs(task, eval_prompt_from(doc));

  fs::path run = open_run_dir(doc, args, "iterate");
  IterateOutcome out = iterate_alignment(start, cfg, eval_pairs);
  fs::path policy_file = run / "policy.json";
  out.policy.save(policy_file);
  json rounds_json = json::array();
  for (const auto& r : out.rounds) rounds_json.push_back(r.to_json());
  write_json_file(run / "rounds.json",
                  {{"baseline", out.baseline.to_json()}, {"rounds", rounds_json}});
  emit({{"run_dir", run.string()},
        {"policy_file", policy_file.string()},
        {"baseline", out.baseline.to_json()},
        {"final", out.rounds.back().eval.to_json()},
        {"rounds", rounds_json}});
  return 0;
}

// Accepts line-delimited JSON records carrying an "image" field, or plain
// text files with one locator per line.
std::set<std::string> read_locators(const fs::path& path) {
  std::set<std::string> out;
  for_each_line(path, [&](std::size_t line_no, const std::string& line) {
    std::string t = trim(line);
    if (t.empty()) return;
    if (t.front() == '{') {
      json j = parse_object_line(line_no, t);
      if (!j.contains("image") || !j["image"].is_string())
        throw SchemaError(path.string() + " line " + std::to_string(line_no) +
                          ": record has no \"image\" string field");
      out.insert(j["image"].get<std::string>());
    } else {
      out.insert(t);
    }
  });
  return out;
}

int cmd_check_overlap(const std::string& a, const std::string& b) {
  require_inputs({fs::path(a), fs::path(b)});
  std::set<std::string> sa = read_locators(a);
  std::set<std::string> sb = read_locators(b);
  std::vector<std::string> shared;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                        std::back_inserter(shared));
  for (const auto& locator : shared) std::cout << locator << "\n";
  std::cerr << shared.size() << " shared image locator(s)\n";
  return shared.empty() ? 0 : 1;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 3;
  } catch (const SchemaError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const LookupError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const VerdictParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const VerdictRangeError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

void add_run_flags(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("--config", args.config, "Pipeline config file (JSON)")->required();
  cmd->add_option("--run-name", args.run_name,
                  "Run directory name (default: <command>_<timestamp>_s<seed>)");
  cmd->add_option("--output-dir", args.output_dir,
                  "Parent directory for run artifacts (overrides config output_dir)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critic-guided preference alignment pipeline"};
  app.set_version_flag("--version", std::string("eaco ") + kToolVersion);
  app.require_subcommand(1);

  int exit_code = 0;
  auto run = [&](const std::function<int()>& body) { exit_code = guarded(body); };

  RefineArgs refine;
  auto* refine_cmd =
      app.add_subcommand("refine-data", "Filter scored feedback into critic tuning data");
  refine_cmd->add_option("--in", refine.in, "Feedback corpus (JSONL)")->required();
  refine_cmd->add_option("--out", refine.out, "Output file for tuning examples (JSONL)");
  refine_cmd->add_option("--min-gap", refine.min_gap,
                         "Minimum total-score gap for a pair to survive");
  refine_cmd->add_option("--style", refine.style,
                         "Critic prompt style: rating, additive, subtractive");
  refine_cmd->add_flag("--keep-all", refine.keep_all,
                       "Keep every response of records that keep at least one pair");
  refine_cmd->callback([&] { run([&] { return cmd_refine_data(refine); }); });

  RunArgs build_args;
  auto* build_cmd =
      app.add_subcommand("build-pairs", "Generate, judge, and select preference pairs");
  add_run_flags(build_cmd, build_args);
  build_cmd->callback([&] { run([&] { return cmd_build_pairs(build_args); }); });

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train-dpo", "Preference-tune the tabular policy");
  add_run_flags(train_cmd, train_args);
  train_cmd->add_option("--pairs", train_args.pairs,
                        "Preference pair file (overrides config train.pairs_file)");
  train_cmd->callback([&] { run([&] { return cmd_train_dpo(train_args); }); });

  RunArgs sft_args;
  auto* sft_cmd =
      app.add_subcommand("build-sft", "Draft supervised examples on the held-back split");
  add_run_flags(sft_cmd, sft_args);
  sft_cmd->callback([&] { run([&] { return cmd_build_sft(sft_args); }); });

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score a policy on preference pairs");
  add_run_flags(eval_cmd, eval_args);
  eval_cmd->add_option("--policy", eval_args.policy,
                       "Policy checkpoint (overrides config eval.policy_file)");
  eval_cmd->add_option("--pairs", eval_args.pairs,
                       "Preference pair file (overrides config eval.pairs_file)");
  eval_cmd->callback([&] { run([&] { return cmd_eval(eval_args); }); });

  RunArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep one pipeline axis and tabulate");
  add_run_flags(ablate_cmd, ablate_args);
  ablate_cmd->callback([&] { run([&] { return cmd_ablate(ablate_args); }); });

  IterateArgs iterate_args;
  auto* iterate_cmd =
      app.add_subcommand("iterate", "Alternate dataset building and tuning for N rounds");
  add_run_flags(iterate_cmd, iterate_args);
  iterate_cmd->add_option("--rounds", iterate_args.rounds,
                          "Number of rounds (overrides config train.rounds)");
  iterate_cmd->callback([&] { run([&] { return cmd_iterate(iterate_args); }); });

  std::string overlap_a, overlap_b;
  auto* overlap_cmd =
      app.add_subcommand("check-overlap", "List image locators shared by two corpora");
  overlap_cmd->add_option("--a", overlap_a, "First corpus (JSONL or one locator per line)")
      ->required();
  overlap_cmd->add_option("--b", overlap_b, "Second corpus")->required();
  overlap_cmd->callback([&] { run([&] { return cmd_check_overlap(overlap_a, overlap_b); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return exit_code;
}
