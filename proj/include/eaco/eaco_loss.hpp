#pragma once

#include <span>
#include <string>
#include <string_view>

#include "eaco/jsonl.hpp"

namespace eaco {

// Where the alpha regularizer lands. inside_sigmoid subtracts both alpha
// terms from the sigmoid argument, exactly as the preference loss is written;
// outside_sigmoid adds them to the loss after the -log sigmoid, which is the
// conventional NLL-regularized reading. The two disagree on the gradient
// direction of the alpha*logp term; the flag exists so both behaviors stay
// available and documented.
enum class RegularizerPlacement { inside_sigmoid, outside_sigmoid };

enum class LengthUnit { tokens_whitespace, characters };

std::string to_string(RegularizerPlacement p);
RegularizerPlacement placement_from_string(std::string_view s);
std::string to_string(LengthUnit u);
LengthUnit length_unit_from_string(std::string_view s);

// tokens_whitespace counts whitespace-separated tokens; characters counts
// Unicode code points.
long measure_length(std::string_view text, LengthUnit unit);

struct DPOConfig {
  double beta = 1.0;
  double alpha = 1e-3;
  RegularizerPlacement placement = RegularizerPlacement::inside_sigmoid;
  LengthUnit length_unit = LengthUnit::tokens_whitespace;

  void validate() const;  // beta > 0, alpha >= 0, both finite
  json to_json() const;
  static DPOConfig from_json(const json& j);
};

// Log probabilities are natural-log throughout. Lengths are measured in the
// config's length unit.
struct PairLogps {
  double policy_logp_w = 0.0;
  double policy_logp_l = 0.0;
  double ref_logp_w = 0.0;
  double ref_logp_l = 0.0;
  long len_w = 0;
  long len_l = 0;
};

// Numerically stable for any finite x; no branches on the data path.
double stable_sigmoid(double x);
double softplus(double x);

// The full argument handed to the sigmoid. For inside_sigmoid:
//   u = beta*[(policy_w - ref_w) - (policy_l - ref_l)]
//       - alpha*policy_w - alpha*(len_w - len_l)
// For outside_sigmoid only the beta bracket goes through the sigmoid.
double sigmoid_argument(const PairLogps& lp, const DPOConfig& cfg);

double per_example_loss(const PairLogps& lp, const DPOConfig& cfg);

// Mean over the batch, compensated summation. Empty batch is an error.
double batch_loss(std::span<const PairLogps> batch, const DPOConfig& cfg);

// Unregularized baseline: -log sigmoid(beta * margin-difference bracket).
double standard_dpo_loss(const PairLogps& lp, double beta);

// Per-pair term breakdown for audit logs.
struct LossBreakdown {
  double beta_bracket = 0.0;
  double alpha_logp_term = 0.0;    // alpha * policy_logp_w
  double alpha_length_term = 0.0;  // alpha * (len_w - len_l)
  double u = 0.0;
  double loss = 0.0;
  json to_json() const;
};

LossBreakdown loss_breakdown(const PairLogps& lp, const DPOConfig& cfg);

}  // namespace eaco
