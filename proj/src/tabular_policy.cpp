#include "eaco/tabular_policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "eaco/errors.hpp"

namespace eaco {

namespace {

constexpr const char* kFormat = "eaco.tabular_policy";
constexpr int kFormatVersion = 1;

double logsumexp(const std::vector<double>& z) {
  double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

TabularPolicy TabularPolicy::uniform(std::vector<std::string> context_ids,
                                     std::vector<std::vector<std::string>> candidates,
                                     LengthUnit unit) {
  if (context_ids.size() != candidates.size())
    throw ValidationError("uniform: context and candidate counts differ");
  TabularPolicy p;
  p.unit_ = unit;
  p.ids_ = std::move(context_ids);
  p.cands_.reserve(p.ids_.size());
  p.logits_.reserve(p.ids_.size());
  for (std::size_t c = 0; c < p.ids_.size(); ++c) {
    if (p.ids_[c].empty()) throw ValidationError("uniform: empty context id");
    if (!p.index_.emplace(p.ids_[c], c).second)
      throw ValidationError("uniform: duplicate context id \"" + p.ids_[c] + "\"");
    auto& texts = candidates[c];
    if (texts.empty())
      throw ValidationError("uniform: context \"" + p.ids_[c] + "\" has no candidates");
    std::set<std::string_view> seen;
    std::vector<Candidate> row;
    row.reserve(texts.size());
    for (auto& t : texts) {
      if (!seen.insert(t).second)
        throw ValidationError("uniform: duplicate candidate text in context \"" +
                              p.ids_[c] + "\"");
      row.push_back(Candidate{t, measure_length(t, unit)});
    }
    p.cands_.push_back(std::move(row));
    p.logits_.emplace_back(texts.size(), 0.0);
  }
  return p;
}

std::optional<std::size_t> TabularPolicy::find_context(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t TabularPolicy::require_context(std::string_view id) const {
  auto found = find_context(id);
  if (!found) throw LookupError("unknown context \"" + std::string(id) + "\"");
  return *found;
}

std::optional<std::size_t> TabularPolicy::find_candidate(std::size_t ctx,
                                                         std::string_view text) const {
  const auto& row = cands_.at(ctx);
  for (std::size_t i = 0; i < row.size(); ++i)
    if (row[i].text == text) return i;
  return std::nullopt;
}

const TabularPolicy::Candidate& TabularPolicy::candidate(std::size_t ctx,
                                                         std::size_t i) const {
  return cands_.at(ctx).at(i);
}

void TabularPolicy::set_logits(std::size_t ctx, std::vector<double> v) {
  if (v.size() != cands_.at(ctx).size())
    throw ValidationError("set_logits: size mismatch");
  for (double x : v)
    if (!std::isfinite(x)) throw ValidationError("set_logits: non-finite logit");
  logits_.at(ctx) = std::move(v);
}

void TabularPolicy::add_scaled(std::size_t ctx, std::span<const double> delta,
                               double scale) {
  auto& row = logits_.at(ctx);
  if (delta.size() != row.size()) throw ValidationError("add_scaled: size mismatch");
  for (std::size_t i = 0; i < row.size(); ++i) row[i] += scale * delta[i];
}

std::vector<double> TabularPolicy::log_probs(std::size_t ctx) const {
  const auto& z = logits_.at(ctx);
  double lse = logsumexp(z);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

double TabularPolicy::logp(std::size_t ctx, std::size_t cand) const {
  const auto& z = logits_.at(ctx);
  if (cand >= z.size()) throw LookupError("candidate index out of range");
  return z[cand] - logsumexp(z);
}

std::vector<double> TabularPolicy::probs(std::size_t ctx) const {
  auto lp = log_probs(ctx);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

std::size_t TabularPolicy::sample(std::size_t ctx, std::mt19937_64& rng) const {
  auto p = probs(ctx);
  // Inverse-CDF with a code-defined uniform draw, so sampling stays
  // reproducible independent of stdlib distribution internals.
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

void TabularPolicy::save(const std::filesystem::path& file) const {
  json contexts = json::array();
  for (std::size_t c = 0; c < ids_.size(); ++c) {
    json cands = json::array();
    for (const auto& cand : cands_[c])
      cands.push_back(json{{"text", cand.text}, {"length", cand.length}});
    contexts.push_back(
        json{{"id", ids_[c]}, {"candidates", std::move(cands)}, {"logits", logits_[c]}});
  }
  json doc{{"format", kFormat},
           {"version", kFormatVersion},
           {"length_unit", to_string(unit_)},
           {"contexts", std::move(contexts)}};
  write_json_file(file, doc, 1);
}

TabularPolicy TabularPolicy::load(const std::filesystem::path& file) {
  json doc = read_json_file(file);
  if (!doc.is_object() || doc.value("format", "") != kFormat)
    throw SchemaError(file.string() + ": not a tabular policy checkpoint");
  if (doc.value("version", -1) != kFormatVersion)
    throw SchemaError(file.string() + ": unsupported checkpoint version");
  TabularPolicy p;
  p.unit_ = length_unit_from_string(doc.at("length_unit").get<std::string>());
  for (const json& ctx : doc.at("contexts")) {
    std::size_t idx = p.ids_.size();
    p.ids_.push_back(ctx.at("id").get<std::string>());
    if (!p.index_.emplace(p.ids_.back(), idx).second)
      throw SchemaError(file.string() + ": duplicate context id");
    std::vector<Candidate> row;
    for (const json& cand : ctx.at("candidates"))
      row.push_back(Candidate{cand.at("text").get<std::string>(),
                              cand.at("length").get<long>()});
    if (row.empty()) throw SchemaError(file.string() + ": context with no candidates");
    auto logits = ctx.at("logits").get<std::vector<double>>();
    if (logits.size() != row.size())
      throw SchemaError(file.string() + ": logits/candidates size mismatch");
    p.cands_.push_back(std::move(row));
    p.logits_.push_back(std::move(logits));
  }
  return p;
}

bool TabularPolicy::operator==(const TabularPolicy& other) const {
  return unit_ == other.unit_ && ids_ == other.ids_ && cands_ == other.cands_ &&
         logits_ == other.logits_;
}

double tabular_logp(const TabularPolicy& policy, std::string_view context_id,
                    std::size_t candidate_index) {
  return policy.logp(policy.require_context(context_id), candidate_index);
}

PairLogps pair_logps(const TabularPolicy& policy, const TabularPolicy& ref,
                     const PairRef& pr) {
  PairLogps lp;
  lp.policy_logp_w = policy.logp(pr.context, pr.preferred);
  lp.policy_logp_l = policy.logp(pr.context, pr.rejected);
  lp.ref_logp_w = ref.logp(pr.context, pr.preferred);
  lp.ref_logp_l = ref.logp(pr.context, pr.rejected);
  lp.len_w = policy.candidate(pr.context, pr.preferred).length;
  lp.len_l = policy.candidate(pr.context, pr.rejected).length;
  return lp;
}

std::vector<double> loss_gradient(const TabularPolicy& policy, const TabularPolicy& ref,
                                  const PairRef& pr, const DPOConfig& cfg) {
  cfg.validate();
  if (pr.preferred == pr.rejected)
    throw ValidationError("loss_gradient: preferred == rejected");
  PairLogps lp = pair_logps(policy, ref, pr);
  auto p = policy.probs(pr.context);
  std::vector<double> grad(p.size(), 0.0);
  double a = cfg.alpha, b = cfg.beta;
  if (cfg.placement == RegularizerPlacement::inside_sigmoid) {
    // u = (b-a)*logp_w - b*logp_l + theta-free terms;
    // du/dz_k = (b-a)*d_kw - b*d_kl + a*p_k, dloss/du = -sigmoid(-u).
    double s = stable_sigmoid(-sigmoid_argument(lp, cfg));
    for (std::size_t k = 0; k < p.size(); ++k) {
      double du = a * p[k];
      if (k == pr.preferred) du += b - a;
      if (k == pr.rejected) du -= b;
      grad[k] = -s * du;
    }
  } else {
    // loss = softplus(-b*bracket) - a*logp_w + const;
    // dloss/dz_k = -sigmoid(-b*bracket)*b*(d_kw - d_kl) - a*(d_kw - p_k).
    double s = stable_sigmoid(-sigmoid_argument(lp, cfg));
    for (std::size_t k = 0; k < p.size(); ++k) {
      double g = a * p[k];
      if (k == pr.preferred) g += -s * b - a;
      if (k == pr.rejected) g += s * b;
      grad[k] = g;
    }
  }
  return grad;
}

}  // namespace eaco
