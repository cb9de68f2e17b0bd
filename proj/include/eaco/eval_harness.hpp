#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "eaco/jsonl.hpp"
#include "eaco/pair_builder.hpp"
#include "eaco/tabular_policy.hpp"

namespace eaco {

struct EvalSummary {
  // Fraction of pairs with policy_logp(preferred) strictly above
  // policy_logp(rejected); ties count as incorrect.
  double preference_accuracy = 0.0;
  double mean_margin = 0.0;  // mean (logp_w - logp_l), nats
  double mean_len_w = 0.0;
  double mean_len_l = 0.0;
  std::size_t n_pairs = 0;

  json to_json() const;
  bool operator==(const EvalSummary&) const = default;
};

// Maps each pair onto the policy's tables (context = image locator). Throws
// LookupError listing every unresolvable pair before giving up.
std::vector<PairRef> resolve_pairs(const TabularPolicy& policy,
                                   const std::vector<PreferencePair>& pairs);

// Deterministic and invariant to dataset order (summation happens in a
// canonical pair order). Throws ValidationError on an empty dataset.
EvalSummary evaluate(const TabularPolicy& policy,
                     const std::vector<PreferencePair>& pairs);

struct AblationRow {
  std::string value;
  EvalSummary summary;
  std::string error;  // empty on success
};

// Plot-ready table: header axis_value,accuracy,margin,mean_len_w,mean_len_l,
// n_pairs; failed rows are skipped (their errors live in the row list).
void write_ablation_table(const std::filesystem::path& path,
                          const std::vector<AblationRow>& rows);

}  // namespace eaco
