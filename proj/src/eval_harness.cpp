#include "eaco/eval_harness.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include "eaco/errors.hpp"
#include "eaco/text.hpp"

namespace eaco {

json EvalSummary::to_json() const {
  return json{{"preference_accuracy", preference_accuracy},
              {"mean_margin", mean_margin},
              {"mean_len_w", mean_len_w},
              {"mean_len_l", mean_len_l},
              {"n_pairs", n_pairs}};
}

std::vector<PairRef> resolve_pairs(const TabularPolicy& policy,
                                   const std::vector<PreferencePair>& pairs) {
  std::vector<PairRef> refs;
  refs.reserve(pairs.size());
  std::vector<std::string> offenders;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    auto describe = [&](const char* what) {
      return "pair " + std::to_string(i) + " (image " + p.image + "): " + what;
    };
    auto ctx = policy.find_context(p.image);
    if (!ctx) {
      offenders.push_back(describe("unknown context"));
      continue;
    }
    auto w = policy.find_candidate(*ctx, p.preferred);
    auto l = policy.find_candidate(*ctx, p.rejected);
    if (!w) offenders.push_back(describe("preferred text is not a candidate"));
    if (!l) offenders.push_back(describe("rejected text is not a candidate"));
    if (w && l) refs.push_back({*ctx, *w, *l});
  }
  if (!offenders.empty()) {
    std::string msg = std::to_string(offenders.size()) + " unresolvable pair(s)";
    for (std::size_t i = 0; i < offenders.size() && i < 5; ++i)
      msg += "; " + offenders[i];
    if (offenders.size() > 5)
      msg += "; and " + std::to_string(offenders.size() - 5) + " more";
    throw LookupError(msg);
  }
  return refs;
}

EvalSummary evaluate(const TabularPolicy& policy,
                     const std::vector<PreferencePair>& pairs) {
  if (pairs.empty()) throw ValidationError("evaluation dataset is empty");
  auto refs = resolve_pairs(policy, pairs);

  struct Row {
    std::tuple<std::string_view, std::string_view, std::string_view> key;
    double margin, len_w, len_l;
    bool correct;
  };
  std::vector<Row> rows;
  rows.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const PairRef& r = refs[i];
    Row row;
    row.key = {pairs[i].image, pairs[i].preferred, pairs[i].rejected};
    const double lw = policy.logp(r.context, r.preferred);
    const double ll = policy.logp(r.context, r.rejected);
    row.margin = lw - ll;
    row.len_w = static_cast<double>(policy.candidate(r.context, r.preferred).length);
    row.len_l = static_cast<double>(policy.candidate(r.context, r.rejected).length);
    row.correct = lw > ll;
    rows.push_back(row);
  }
  // Canonical summation order makes the means exact under input permutation.
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.key < b.key; });

  EvalSummary summary;
  summary.n_pairs = rows.size();
  std::size_t correct = 0;
  double margin = 0, len_w = 0, len_l = 0;
  for (const Row& row : rows) {
    if (row.correct) ++correct;
    margin += row.margin;
    len_w += row.len_w;
    len_l += row.len_l;
  }
  const double n = static_cast<double>(rows.size());
  summary.preference_accuracy = static_cast<double>(correct) / n;
  summary.mean_margin = margin / n;
  summary.mean_len_w = len_w / n;
  summary.mean_len_l = len_l / n;
  return summary;
}

void write_ablation_table(const std::filesystem::path& path,
                          const std::vector<AblationRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "axis_value,accuracy,margin,mean_len_w,mean_len_l,n_pairs\n";
  for (const auto& row : rows) {
    if (!row.error.empty()) continue;
    out << row.value << ',' << format_double(row.summary.preference_accuracy) << ','
        << format_double(row.summary.mean_margin) << ','
        << format_double(row.summary.mean_len_w) << ','
        << format_double(row.summary.mean_len_l) << ',' << row.summary.n_pairs << '\n';
  }
}

}  // namespace eaco
