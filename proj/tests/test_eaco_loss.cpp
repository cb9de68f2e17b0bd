#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "eaco/eaco_loss.hpp"
#include "eaco/errors.hpp"

using namespace eaco;

namespace {

constexpr double kLn2 = 0.6931471805599453;

PairLogps random_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> logp(-30.0, 0.0);
  std::uniform_int_distribution<long> len(0, 400);
  PairLogps lp;
  lp.policy_logp_w = logp(rng);
  lp.policy_logp_l = logp(rng);
  lp.ref_logp_w = logp(rng);
  lp.ref_logp_l = logp(rng);
  lp.len_w = len(rng);
  lp.len_l = len(rng);
  return lp;
}

// Moderate logps keep the sigmoid away from saturation so strict-ordering
// checks see representable differences.
PairLogps moderate_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> logp(-5.0, 0.0);
  std::uniform_int_distribution<long> len(0, 60);
  PairLogps lp;
  lp.policy_logp_w = logp(rng);
  lp.policy_logp_l = logp(rng);
  lp.ref_logp_w = logp(rng);
  lp.ref_logp_l = logp(rng);
  lp.len_w = len(rng);
  lp.len_l = len(rng);
  return lp;
}

}  // namespace

TEST_CASE("length measurement counts tokens or code points") {
  CHECK(measure_length("a b  c", LengthUnit::tokens_whitespace) == 3);
  CHECK(measure_length("", LengthUnit::tokens_whitespace) == 0);
  CHECK(measure_length("   ", LengthUnit::tokens_whitespace) == 0);
  CHECK(measure_length("one\ttwo\nthree four", LengthUnit::tokens_whitespace) == 4);
  CHECK(measure_length("abc", LengthUnit::characters) == 3);
  // Multi-byte code points count once.
  CHECK(measure_length("h\xc3\xa9llo", LengthUnit::characters) == 5);
  CHECK(measure_length("\xe2\x9f\xa8x\xe2\x9f\xa9", LengthUnit::characters) == 3);
  CHECK(measure_length("", LengthUnit::characters) == 0);
}

TEST_CASE("enum string conversions round trip and reject junk") {
  for (auto p : {RegularizerPlacement::inside_sigmoid, RegularizerPlacement::outside_sigmoid})
    CHECK(placement_from_string(to_string(p)) == p);
  for (auto u : {LengthUnit::tokens_whitespace, LengthUnit::characters})
    CHECK(length_unit_from_string(to_string(u)) == u);
  CHECK_THROWS_AS(placement_from_string("sideways"), SchemaError);
  CHECK_THROWS_AS(length_unit_from_string("bytes"), SchemaError);
}

TEST_CASE("config validation and json round trip") {
  DPOConfig cfg;
  CHECK(cfg.beta == 1.0);
  CHECK(cfg.alpha == 1e-3);
  CHECK(cfg.placement == RegularizerPlacement::inside_sigmoid);
  CHECK(cfg.length_unit == LengthUnit::tokens_whitespace);
  cfg.validate();

  DPOConfig back = DPOConfig::from_json(cfg.to_json());
  CHECK(back.beta == cfg.beta);
  CHECK(back.alpha == cfg.alpha);
  CHECK(back.placement == cfg.placement);
  CHECK(back.length_unit == cfg.length_unit);

  DPOConfig bad = cfg;
  bad.beta = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.beta = -1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.beta = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.alpha = -1e-9;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.alpha = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  json j = cfg.to_json();
  j["betta"] = 2.0;
  CHECK_THROWS_AS(DPOConfig::from_json(j), SchemaError);
}

TEST_CASE("sigmoid and softplus are stable at extremes") {
  CHECK(stable_sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(stable_sigmoid(800.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(stable_sigmoid(-800.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::isfinite(softplus(800.0)));
  CHECK(softplus(800.0) == doctest::Approx(800.0).epsilon(1e-12));
  CHECK(softplus(-800.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(softplus(0.0) == doctest::Approx(kLn2).epsilon(1e-15));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> x_dist(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    double x = x_dist(rng);
    CHECK(stable_sigmoid(x) + stable_sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-12));
    // softplus(x) - softplus(-x) == x.
    CHECK(softplus(x) - softplus(-x) == doctest::Approx(x).epsilon(1e-10));
  }
}

TEST_CASE("zero logps and equal lengths anchor the loss at ln 2") {
  PairLogps lp;
  lp.len_w = lp.len_l = 17;
  for (auto placement :
       {RegularizerPlacement::inside_sigmoid, RegularizerPlacement::outside_sigmoid}) {
    DPOConfig cfg;
    cfg.placement = placement;
    for (double alpha : {0.0, 1e-3, 0.1}) {
      cfg.alpha = alpha;
      CHECK(per_example_loss(lp, cfg) == doctest::Approx(kLn2).epsilon(1e-15));
    }
  }
  CHECK(standard_dpo_loss(lp, 1.0) == doctest::Approx(kLn2).epsilon(1e-15));
}

TEST_CASE("sigmoid argument and loss match hand-computed anchors") {
  DPOConfig cfg;
  cfg.beta = 1.0;
  cfg.alpha = 0.0;
  PairLogps lp;
  // Margins (policy - ref) of 1.0 for the preferred and 0.0 for the rejected.
  lp.policy_logp_w = -1.0;
  lp.ref_logp_w = -2.0;
  lp.policy_logp_l = -2.0;
  lp.ref_logp_l = -2.0;
  CHECK(sigmoid_argument(lp, cfg) == doctest::Approx(1.0).epsilon(1e-15));
  // softplus(-1) = ln(1 + e^-1), independently evaluated.
  CHECK(per_example_loss(lp, cfg) == doctest::Approx(0.31326168751822286).epsilon(1e-14));

  cfg.alpha = 1e-3;
  lp.policy_logp_w = -2.0;
  lp.ref_logp_w = -3.0;
  lp.len_w = 30;
  lp.len_l = 10;
  // u = 1*(1.0 - 0.0) - 1e-3*(-2) - 1e-3*(30-10) = 0.982.
  CHECK(sigmoid_argument(lp, cfg) == doctest::Approx(0.982).epsilon(1e-15));
}

TEST_CASE("with alpha zero both placements collapse to the standard loss") {
  std::mt19937_64 rng(0xa1fa0ull);
  std::uniform_real_distribution<double> beta_dist(0.05, 5.0);
  for (int i = 0; i < 1000; ++i) {
    PairLogps lp = random_pair(rng);
    DPOConfig cfg;
    cfg.beta = beta_dist(rng);
    cfg.alpha = 0.0;

    cfg.placement = RegularizerPlacement::inside_sigmoid;
    double inside = per_example_loss(lp, cfg);
    cfg.placement = RegularizerPlacement::outside_sigmoid;
    double outside = per_example_loss(lp, cfg);
    double standard = standard_dpo_loss(lp, cfg.beta);

    CHECK(std::abs(inside - outside) <= 1e-12);
    CHECK(std::abs(inside - standard) <= 1e-12);
  }
}

TEST_CASE("loss falls as the preferred completion gains probability") {
  std::mt19937_64 rng(0x90adull);
  for (auto placement :
       {RegularizerPlacement::inside_sigmoid, RegularizerPlacement::outside_sigmoid}) {
    DPOConfig cfg;
    cfg.placement = placement;
    for (int i = 0; i < 200; ++i) {
      PairLogps lp = moderate_pair(rng);
      PairLogps better = lp;
      better.policy_logp_w += 0.5;
      CHECK(per_example_loss(better, cfg) < per_example_loss(lp, cfg));
      PairLogps worse = lp;
      worse.policy_logp_l += 0.5;
      CHECK(per_example_loss(worse, cfg) > per_example_loss(lp, cfg));
    }
  }
}

TEST_CASE("a longer preferred completion costs more") {
  std::mt19937_64 rng(0x1e46ull);
  for (auto placement :
       {RegularizerPlacement::inside_sigmoid, RegularizerPlacement::outside_sigmoid}) {
    DPOConfig cfg;
    cfg.placement = placement;
    for (int i = 0; i < 200; ++i) {
      PairLogps lp = moderate_pair(rng);
      PairLogps longer = lp;
      longer.len_w += 50;
      CHECK(per_example_loss(longer, cfg) > per_example_loss(lp, cfg));
    }
  }
  // Outside placement shifts the loss by exactly alpha * delta-length.
  DPOConfig cfg;
  cfg.placement = RegularizerPlacement::outside_sigmoid;
  PairLogps lp = random_pair(rng);
  PairLogps longer = lp;
  longer.len_w += 50;
  CHECK(per_example_loss(longer, cfg) - per_example_loss(lp, cfg) ==
        doctest::Approx(cfg.alpha * 50).epsilon(1e-12));
}

TEST_CASE("inside placement losses are strictly positive") {
  std::mt19937_64 rng(0x905ull);
  DPOConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    PairLogps lp = random_pair(rng);
    CHECK(per_example_loss(lp, cfg) > 0.0);
  }
  // Outside placement stays positive whenever the preferred completion is
  // not shorter; a much longer rejected completion can push it negative.
  cfg.placement = RegularizerPlacement::outside_sigmoid;
  for (int i = 0; i < 1000; ++i) {
    PairLogps lp = random_pair(rng);
    if (lp.len_w < lp.len_l) lp.len_l = lp.len_w;
    CHECK(per_example_loss(lp, cfg) > 0.0);
  }
}

TEST_CASE("breakdown terms recompose the loss") {
  std::mt19937_64 rng(0xb4eacd0ull);
  for (auto placement :
       {RegularizerPlacement::inside_sigmoid, RegularizerPlacement::outside_sigmoid}) {
    DPOConfig cfg;
    cfg.placement = placement;
    for (int i = 0; i < 100; ++i) {
      PairLogps lp = random_pair(rng);
      LossBreakdown b = loss_breakdown(lp, cfg);
      CHECK(b.loss == doctest::Approx(per_example_loss(lp, cfg)).epsilon(1e-15));
      CHECK(b.alpha_logp_term == doctest::Approx(cfg.alpha * lp.policy_logp_w).epsilon(1e-15));
      CHECK(b.alpha_length_term ==
            doctest::Approx(cfg.alpha * (lp.len_w - lp.len_l)).epsilon(1e-15));
      if (placement == RegularizerPlacement::inside_sigmoid) {
        CHECK(b.u == doctest::Approx(b.beta_bracket - b.alpha_logp_term - b.alpha_length_term)
                         .epsilon(1e-12));
        CHECK(b.loss == doctest::Approx(softplus(-b.u)).epsilon(1e-12));
      } else {
        CHECK(b.u == doctest::Approx(b.beta_bracket).epsilon(1e-12));
        CHECK(b.loss == doctest::Approx(softplus(-b.beta_bracket) - b.alpha_logp_term +
                                        b.alpha_length_term)
                            .epsilon(1e-12));
      }
      json j = b.to_json();
      CHECK(j.contains("beta_bracket"));
      CHECK(j.contains("u"));
      CHECK(j.contains("loss"));
    }
  }
}

TEST_CASE("batch loss is the mean of per example losses") {
  std::mt19937_64 rng(0xbead11ull);
  DPOConfig cfg;
  std::vector<PairLogps> batch;
  double sum = 0.0;
  for (int i = 0; i < 257; ++i) {
    batch.push_back(random_pair(rng));
    sum += per_example_loss(batch.back(), cfg);
  }
  CHECK(batch_loss(batch, cfg) == doctest::Approx(sum / batch.size()).epsilon(1e-12));
  CHECK_THROWS_AS(batch_loss({}, cfg), ValidationError);

  std::vector<PairLogps> same(10000, batch[0]);
  CHECK(batch_loss(same, cfg) ==
        doctest::Approx(per_example_loss(batch[0], cfg)).epsilon(1e-14));
}

TEST_CASE("non finite logps and negative lengths are rejected") {
  DPOConfig cfg;
  PairLogps lp;
  lp.policy_logp_w = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(per_example_loss(lp, cfg), ValidationError);
  lp = PairLogps{};
  lp.ref_logp_l = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(per_example_loss(lp, cfg), ValidationError);
  lp = PairLogps{};
  lp.len_w = -1;
  CHECK_THROWS_AS(per_example_loss(lp, cfg), ValidationError);
}
