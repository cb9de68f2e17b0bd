#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eaco/eaco_loss.hpp"

namespace eaco {

// Desk-scale stand-in for a policy model: a finite set of contexts, each with
// a fixed candidate list and a learnable logit per candidate. Log
// probabilities are log-softmax rows over the candidate logits.
class TabularPolicy {
 public:
  struct Candidate {
    std::string text;
    long length = 0;
    bool operator==(const Candidate&) const = default;
  };

  TabularPolicy() = default;

  // Uniform logits (all zero). Context ids must be unique and nonempty;
  // candidate lists must be nonempty with distinct texts.
  static TabularPolicy uniform(std::vector<std::string> context_ids,
                               std::vector<std::vector<std::string>> candidates,
                               LengthUnit unit);

  std::size_t num_contexts() const { return ids_.size(); }
  std::size_t num_candidates(std::size_t ctx) const { return cands_.at(ctx).size(); }
  const std::string& context_id(std::size_t ctx) const { return ids_.at(ctx); }
  std::optional<std::size_t> find_context(std::string_view id) const;
  std::size_t require_context(std::string_view id) const;  // throws LookupError
  std::optional<std::size_t> find_candidate(std::size_t ctx, std::string_view text) const;
  const Candidate& candidate(std::size_t ctx, std::size_t i) const;

  const std::vector<double>& logits(std::size_t ctx) const { return logits_.at(ctx); }
  void set_logits(std::size_t ctx, std::vector<double> v);
  // logits[ctx] += scale * delta
  void add_scaled(std::size_t ctx, std::span<const double> delta, double scale);

  std::vector<double> log_probs(std::size_t ctx) const;
  double logp(std::size_t ctx, std::size_t cand) const;
  std::vector<double> probs(std::size_t ctx) const;
  std::size_t sample(std::size_t ctx, std::mt19937_64& rng) const;

  LengthUnit length_unit() const { return unit_; }

  // Self-describing versioned checkpoint (JSON).
  void save(const std::filesystem::path& file) const;
  static TabularPolicy load(const std::filesystem::path& file);

  bool operator==(const TabularPolicy& other) const;

 private:
  LengthUnit unit_ = LengthUnit::tokens_whitespace;
  std::vector<std::string> ids_;
  std::vector<std::vector<Candidate>> cands_;
  std::vector<std::vector<double>> logits_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Spec-level lookup by context id; candidate index must be in range.
double tabular_logp(const TabularPolicy& policy, std::string_view context_id,
                    std::size_t candidate_index);

// One preference pair resolved against a policy's tables: both completions
// live in the same context row.
struct PairRef {
  std::size_t context = 0;
  std::size_t preferred = 0;
  std::size_t rejected = 0;
  bool operator==(const PairRef&) const = default;
};

// Assembles PairLogps from a policy/reference pair of tables. Lengths come
// from the policy's stored candidate lengths.
PairLogps pair_logps(const TabularPolicy& policy, const TabularPolicy& ref,
                     const PairRef& pr);

// d per_example_loss / d policy.logits[pr.context]. Rows of other contexts
// have identically zero gradient and are not returned.
std::vector<double> loss_gradient(const TabularPolicy& policy, const TabularPolicy& ref,
                                  const PairRef& pr, const DPOConfig& cfg);

}  // namespace eaco
