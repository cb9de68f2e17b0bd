#include "eaco/eaco_loss.hpp"

#include <cmath>

#include "eaco/errors.hpp"
#include "eaco/text.hpp"

namespace eaco {

std::string to_string(RegularizerPlacement p) {
  return p == RegularizerPlacement::inside_sigmoid ? "inside_sigmoid" : "outside_sigmoid";
}

RegularizerPlacement placement_from_string(std::string_view s) {
  if (s == "inside_sigmoid") return RegularizerPlacement::inside_sigmoid;
  if (s == "outside_sigmoid") return RegularizerPlacement::outside_sigmoid;
  throw SchemaError("unknown regularizer placement \"" + std::string(s) +
                    "\" (expected inside_sigmoid or outside_sigmoid)");
}

std::string to_string(LengthUnit u) {
  return u == LengthUnit::tokens_whitespace ? "tokens_whitespace" : "characters";
}

LengthUnit length_unit_from_string(std::string_view s) {
  if (s == "tokens_whitespace") return LengthUnit::tokens_whitespace;
  if (s == "characters") return LengthUnit::characters;
  throw SchemaError("unknown length unit \"" + std::string(s) +
                    "\" (expected tokens_whitespace or characters)");
}

long measure_length(std::string_view text, LengthUnit unit) {
  return unit == LengthUnit::tokens_whitespace ? whitespace_token_count(text)
                                               : utf8_codepoint_count(text);
}

void DPOConfig::validate() const {
  if (!std::isfinite(beta) || beta <= 0.0)
    throw ValidationError("dpo.beta must be finite and > 0");
  if (!std::isfinite(alpha) || alpha < 0.0)
    throw ValidationError("dpo.alpha must be finite and >= 0");
}

json DPOConfig::to_json() const {
  return json{{"beta", beta},
              {"alpha", alpha},
              {"regularizer_placement", to_string(placement)},
              {"length_unit", to_string(length_unit)}};
}

DPOConfig DPOConfig::from_json(const json& j) {
  require_keys(j, {"beta", "alpha", "regularizer_placement", "length_unit"}, "dpo");
  DPOConfig cfg;
  cfg.beta = j.value("beta", cfg.beta);
  cfg.alpha = j.value("alpha", cfg.alpha);
  if (j.contains("regularizer_placement"))
    cfg.placement = placement_from_string(j["regularizer_placement"].get<std::string>());
  if (j.contains("length_unit"))
    cfg.length_unit = length_unit_from_string(j["length_unit"].get<std::string>());
  cfg.validate();
  return cfg;
}

double stable_sigmoid(double x) {
  // tanh form: bounded intermediates for any finite x.
  return 0.5 * (1.0 + std::tanh(0.5 * x));
}

double softplus(double x) {
  // max(x,0) + log1p(exp(-|x|)); the exponent is always <= 0.
  return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

namespace {

void check_finite(const PairLogps& lp) {
  if (!std::isfinite(lp.policy_logp_w) || !std::isfinite(lp.policy_logp_l) ||
      !std::isfinite(lp.ref_logp_w) || !std::isfinite(lp.ref_logp_l))
    throw ValidationError("pair log probabilities must be finite");
  if (lp.len_w < 0 || lp.len_l < 0)
    throw ValidationError("pair lengths must be nonnegative");
}

double beta_bracket(const PairLogps& lp, double beta) {
  return beta * ((lp.policy_logp_w - lp.ref_logp_w) - (lp.policy_logp_l - lp.ref_logp_l));
}

}  // namespace

double sigmoid_argument(const PairLogps& lp, const DPOConfig& cfg) {
  check_finite(lp);
  cfg.validate();
  double u = beta_bracket(lp, cfg.beta);
  if (cfg.placement == RegularizerPlacement::inside_sigmoid)
    u += -cfg.alpha * lp.policy_logp_w -
         cfg.alpha * static_cast<double>(lp.len_w - lp.len_l);
  return u;
}

double per_example_loss(const PairLogps& lp, const DPOConfig& cfg) {
  double u = sigmoid_argument(lp, cfg);
  double loss = softplus(-u);  // -log sigmoid(u)
  if (cfg.placement == RegularizerPlacement::outside_sigmoid)
    loss += -cfg.alpha * lp.policy_logp_w +
            cfg.alpha * static_cast<double>(lp.len_w - lp.len_l);
  return loss;
}

double batch_loss(std::span<const PairLogps> batch, const DPOConfig& cfg) {
  if (batch.empty()) throw ValidationError("batch_loss: empty batch");
  double sum = 0.0, comp = 0.0;  // Kahan
  for (const PairLogps& lp : batch) {
    double y = per_example_loss(lp, cfg) - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(batch.size());
}

double standard_dpo_loss(const PairLogps& lp, double beta) {
  check_finite(lp);
  if (!std::isfinite(beta) || beta <= 0.0)
    throw ValidationError("beta must be finite and > 0");
  return softplus(-beta_bracket(lp, beta));
}

json LossBreakdown::to_json() const {
  return json{{"beta_bracket", beta_bracket},
              {"alpha_logp_term", alpha_logp_term},
              {"alpha_length_term", alpha_length_term},
              {"u", u},
              {"loss", loss}};
}

LossBreakdown loss_breakdown(const PairLogps& lp, const DPOConfig& cfg) {
  LossBreakdown b;
  b.beta_bracket = beta_bracket(lp, cfg.beta);
  b.alpha_logp_term = cfg.alpha * lp.policy_logp_w;
  b.alpha_length_term = cfg.alpha * static_cast<double>(lp.len_w - lp.len_l);
  b.u = sigmoid_argument(lp, cfg);
  b.loss = per_example_loss(lp, cfg);
  return b;
}

}  // namespace eaco
