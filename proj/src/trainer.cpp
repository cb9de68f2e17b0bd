#include "eaco/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>

#include "eaco/errors.hpp"
#include "eaco/text.hpp"

namespace eaco {

void TrainConfig::validate() const {
  dpo.validate();
  if (!(learning_rate > 0)) throw ValidationError("learning_rate must be positive");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
}

TrainConfig TrainConfig::from_json(const json& j) {
  require_keys(j, {"dpo", "learning_rate", "epochs", "batch_size", "seed", "shuffle"},
               "train config");
  TrainConfig cfg;
  if (j.contains("dpo")) cfg.dpo = DPOConfig::from_json(j["dpo"]);
  if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::int64_t>();
  if (j.contains("shuffle")) cfg.shuffle = j["shuffle"].get<bool>();
  return cfg;
}

json TrainConfig::to_json() const {
  return json{{"dpo", dpo.to_json()},   {"learning_rate", learning_rate},
              {"epochs", epochs},       {"batch_size", batch_size},
              {"seed", seed},           {"shuffle", shuffle}};
}

json TrainReport::to_json() const {
  json curve = json::array();
  for (const auto& [step, loss] : loss_curve)
    curve.push_back(json{{"step", step}, {"loss", loss}});
  return json{{"loss_curve", curve},
              {"preference_accuracy_before", preference_accuracy_before},
              {"preference_accuracy_after", preference_accuracy_after},
              {"margin_before", margin_before},
              {"margin_after", margin_after},
              {"wallclock_seconds", wallclock_seconds}};
}

TrainOutcome train_dpo(const TabularPolicy& policy,
                       const std::vector<PreferencePair>& dataset,
                       const TrainConfig& cfg) {
  return train_dpo(policy, policy, dataset, cfg);
}

TrainOutcome train_dpo(const TabularPolicy& start, const TabularPolicy& reference,
                       const std::vector<PreferencePair>& dataset,
                       const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw ValidationError("training dataset is empty");
  const auto t0 = std::chrono::steady_clock::now();

  const std::vector<PairRef> refs = resolve_pairs(start, dataset);
  if (resolve_pairs(reference, dataset) != refs)
    throw ValidationError("reference policy tables do not match the policy's");

  TabularPolicy policy = start;
  const TabularPolicy ref = reference;  // frozen snapshot for the whole run

  TrainOutcome out;
  {
    EvalSummary before = evaluate(policy, dataset);
    out.report.preference_accuracy_before = before.preference_accuracy;
    out.report.margin_before = before.mean_margin;
  }

  std::vector<std::size_t> order(refs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  std::size_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      std::mt19937_64 rng(mix64(static_cast<std::uint64_t>(cfg.seed),
                                static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(begin + batch, order.size());
      const double inv_n = 1.0 / static_cast<double>(end - begin);

      double batch_loss = 0.0;
      std::map<std::size_t, std::vector<double>> grads;
      for (std::size_t k = begin; k < end; ++k) {
        const PairRef& pr = refs[order[k]];
        batch_loss += per_example_loss(pair_logps(policy, ref, pr), cfg.dpo);
        std::vector<double> g = loss_gradient(policy, ref, pr, cfg.dpo);
        auto [it, fresh] = grads.try_emplace(pr.context, g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i] * inv_n;
      }
      for (const auto& [ctx, g] : grads)
        policy.add_scaled(ctx, g, -cfg.learning_rate);
      out.report.loss_curve.emplace_back(++step, batch_loss * inv_n);
    }
  }

  {
    EvalSummary after = evaluate(policy, dataset);
    out.report.preference_accuracy_after = after.preference_accuracy;
    out.report.margin_after = after.mean_margin;
  }
  out.report.wallclock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.policy = std::move(policy);
  return out;
}

void EnhancedSftExample::validate() const {
  if (image.empty()) throw ValidationError("sft example has an empty image");
  if (trim(instruction).empty())
    throw ValidationError("sft example has a blank instruction");
  if (target.empty()) throw ValidationError("sft example has an empty target");
}

EnhancedSftExample EnhancedSftExample::from_json(const json& j) {
  require_keys(j, {"image", "instruction", "target"}, "sft example");
  for (const char* key : {"image", "instruction", "target"})
    if (!j.contains(key))
      throw SchemaError("sft example: missing key '" + std::string(key) + "'");
  EnhancedSftExample e;
  e.image = j["image"].get<std::string>();
  e.instruction = j["instruction"].get<std::string>();
  e.target = j["target"].get<std::string>();
  try {
    e.validate();
  } catch (const ValidationError& err) {
    throw SchemaError(std::string("sft example: ") + err.what());
  }
  return e;
}

json EnhancedSftExample::to_json() const {
  return json{{"image", image}, {"instruction", instruction}, {"target", target}};
}

std::vector<EnhancedSftExample> build_enhanced_sft(
    const std::vector<std::string>& images, const PromptPool& instruction_source,
    Backend& generator, const std::vector<std::string>& reserved_images) {
  instruction_source.validate();

  const std::set<std::string> reserved(reserved_images.begin(), reserved_images.end());
  std::vector<std::string> offenders;
  for (const auto& image : images)
    if (reserved.count(image)) offenders.push_back(image);
  if (!offenders.empty()) {
    std::string msg = std::to_string(offenders.size()) +
                      " image(s) overlap the reserved corpora:";
    for (std::size_t i = 0; i < offenders.size() && i < 5; ++i) msg += " " + offenders[i];
    if (offenders.size() > 5)
      msg += " and " + std::to_string(offenders.size() - 5) + " more";
    throw ValidationError(msg);
  }

  std::vector<EnhancedSftExample> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::uint64_t stream =
        mix64(static_cast<std::uint64_t>(instruction_source.sampler_seed), i);
    std::mt19937_64 rng(stream);

    EnhancedSftExample e;
    e.image = images[i];
    e.instruction =
        instruction_source.prompts[rng() % instruction_source.prompts.size()];

    GenerationRequest req;
    req.image = e.image;
    req.prompt = e.instruction;
    req.params.seed = static_cast<std::int64_t>(stream);
    e.target = generator.generate(req);
    e.validate();
    out.push_back(std::move(e));
  }
  return out;
}

void write_enhanced_sft(const std::filesystem::path& path,
                        const std::vector<EnhancedSftExample>& examples) {
  JsonlWriter writer(path);
  for (const auto& e : examples) writer.write(e.to_json());
}

std::vector<EnhancedSftExample> read_enhanced_sft(const std::filesystem::path& path) {
  std::vector<EnhancedSftExample> out;
  for_each_line(path, [&](std::size_t line_no, const std::string& line) {
    try {
      out.push_back(EnhancedSftExample::from_json(parse_object_line(line_no, line)));
    } catch (const SchemaError& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw SchemaError(path.string() + " " + msg);
      throw SchemaError(path.string() + " line " + std::to_string(line_no) + ": " + msg);
    }
  });
  return out;
}

void SftTrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ValidationError("learning_rate must be positive");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
}

SftTrainConfig SftTrainConfig::from_json(const json& j) {
  require_keys(j, {"learning_rate", "epochs", "seed", "shuffle"}, "sft train config");
  SftTrainConfig cfg;
  if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::int64_t>();
  if (j.contains("shuffle")) cfg.shuffle = j["shuffle"].get<bool>();
  return cfg;
}

json SftTrainConfig::to_json() const {
  return json{{"learning_rate", learning_rate},
              {"epochs", epochs},
              {"seed", seed},
              {"shuffle", shuffle}};
}

TabularPolicy fit_sft_tabular(const TabularPolicy& start,
                              const std::vector<EnhancedSftExample>& examples,
                              const SftTrainConfig& cfg) {
  cfg.validate();
  if (examples.empty()) throw ValidationError("sft dataset is empty");

  struct Target {
    std::size_t ctx, cand;
  };
  std::vector<Target> targets;
  targets.reserve(examples.size());
  std::vector<std::string> offenders;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    auto ctx = start.find_context(e.image);
    if (!ctx) {
      offenders.push_back("example " + std::to_string(i) + ": unknown context " + e.image);
      continue;
    }
    auto cand = start.find_candidate(*ctx, e.target);
    if (!cand) {
      offenders.push_back("example " + std::to_string(i) +
                          ": target is not a candidate of " + e.image);
      continue;
    }
    targets.push_back({*ctx, *cand});
  }
  if (!offenders.empty()) {
    std::string msg = std::to_string(offenders.size()) + " unresolvable example(s)";
    for (std::size_t i = 0; i < offenders.size() && i < 5; ++i) msg += "; " + offenders[i];
    throw LookupError(msg);
  }

  TabularPolicy policy = start;
  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      std::mt19937_64 rng(mix64(static_cast<std::uint64_t>(cfg.seed),
                                static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t k : order) {
      const Target& t = targets[k];
      // d(-logp_target)/dlogits = probs - onehot(target)
      std::vector<double> g = policy.probs(t.ctx);
      g[t.cand] -= 1.0;
      policy.add_scaled(t.ctx, g, -cfg.learning_rate);
    }
  }
  return policy;
}

std::string to_string(ReferenceReset r) {
  switch (r) {
    case ReferenceReset::per_round: return "per_round";
    case ReferenceReset::fixed_initial: return "fixed_initial";
  }
  throw LookupError("unknown reference reset");
}

ReferenceReset reference_reset_from_string(std::string_view s) {
  if (s == "per_round") return ReferenceReset::per_round;
  if (s == "fixed_initial") return ReferenceReset::fixed_initial;
  throw LookupError("unknown reference reset '" + std::string(s) +
                    "' (known: per_round, fixed_initial)");
}

void IterateConfig::validate() const {
  if (rounds < 1) throw ValidationError("rounds must be at least 1");
  build.validate();
  train.validate();
  if (generator_name.empty()) throw ValidationError("generator_name is empty");
}

IterateConfig IterateConfig::from_json(const json& j) {
  require_keys(j, {"rounds", "build", "train", "reference_reset", "generator_name"},
               "iterate config");
  IterateConfig cfg;
  if (j.contains("rounds")) cfg.rounds = j["rounds"].get<int>();
  if (j.contains("build")) cfg.build = BuildConfig::from_json(j["build"]);
  if (j.contains("train")) cfg.train = TrainConfig::from_json(j["train"]);
  if (j.contains("reference_reset"))
    cfg.reference_reset =
        reference_reset_from_string(j["reference_reset"].get<std::string>());
  if (j.contains("generator_name"))
    cfg.generator_name = j["generator_name"].get<std::string>();
  return cfg;
}

json IterateConfig::to_json() const {
  return json{{"rounds", rounds},
              {"build", build.to_json()},
              {"train", train.to_json()},
              {"reference_reset", to_string(reference_reset)},
              {"generator_name", generator_name}};
}

json RoundSummary::to_json() const {
  return json{{"round", round},
              {"build_stats", build_stats.to_json()},
              {"train_report", train_report.to_json()},
              {"eval", eval.to_json()}};
}

IterateOutcome iterate_alignment(const TabularPolicy& start, const IterateConfig& cfg,
                                 Backend& judge,
                                 const std::vector<PreferencePair>& eval_pairs) {
  cfg.validate();
  IterateOutcome out;
  out.policy = start;
  const TabularPolicy initial = start;
  out.baseline = evaluate(out.policy, eval_pairs);

  for (int round = 1; round <= cfg.rounds; ++round) {
    auto with_round = [round](const std::string& what) {
      return "round " + std::to_string(round) + ": " + what;
    };
    try {
      BuildConfig round_cfg = cfg.build;
      round_cfg.pool.sampler_seed = static_cast<std::int64_t>(
          mix64(static_cast<std::uint64_t>(cfg.build.pool.sampler_seed),
                static_cast<std::uint64_t>(round)));

      auto snapshot = std::make_shared<const TabularPolicy>(out.policy);
      PolicyBackend generator(cfg.generator_name, snapshot);
      BuildResult built = build_preference_dataset(round_cfg, generator, judge);
      if (built.pairs.empty())
        throw ValidationError("the round produced no training pairs");

      TrainOutcome trained =
          cfg.reference_reset == ReferenceReset::per_round
              ? train_dpo(out.policy, built.pairs, cfg.train)
              : train_dpo(out.policy, initial, built.pairs, cfg.train);
      out.policy = std::move(trained.policy);

      RoundSummary summary;
      summary.round = round;
      summary.build_stats = built.stats;
      summary.train_report = std::move(trained.report);
      summary.eval = evaluate(out.policy, eval_pairs);
      out.rounds.push_back(std::move(summary));
    } catch (const BackendError& e) {
      throw BackendError(with_round(e.what()), e.status, e.retryable);
    } catch (const Error& e) {
      throw Error(with_round(e.what()));
    }
  }
  return out;
}

IterateOutcome iterate_alignment(const TabularPolicy& start, const IterateConfig& cfg,
                                 const std::vector<PreferencePair>& eval_pairs) {
  cfg.validate();
  auto judge = make_backend(cfg.build.judge);
  return iterate_alignment(start, cfg, *judge, eval_pairs);
}

}  // namespace eaco
