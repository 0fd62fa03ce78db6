#include <cmath>

#include "doctest.h"
#include "kpset/losses.hpp"

using namespace kpset;

namespace {

struct TwoSide {
  PaddedTargets targets;
  ReassignmentPlan plan;
  std::vector<SlotTeacherProbs> probs;
};

// N=4: slot 0 keyphrase, slot 1 null (present); slot 2 null, slot 3 keyphrase (absent)
TwoSide fixture() {
  TwoSide f;
  f.targets.present = {Phrase{6}, std::nullopt};
  f.targets.absent = {std::nullopt, Phrase{7, 8}};
  f.plan.target = {0, 1, 0, 1};
  f.plan.masked.assign(4, false);
  f.probs.resize(4);
  f.probs[0].target_probs = {0.5, 0.5};
  f.probs[1].target_probs = {0.25};
  f.probs[2].target_probs = {0.5};
  f.probs[3].target_probs = {0.8, 0.4, 0.9};
  return f;
}

}  // namespace

TEST_CASE("slot_nll examples") {
  const std::vector<double> null_half = {0.5};
  CHECK(slot_nll(null_half, 0.2) == doctest::Approx(0.2 * std::log(2.0)).epsilon(1e-14));
  CHECK(slot_nll(null_half, 0.2) == doctest::Approx(0.1386).epsilon(1e-3));
  const std::vector<double> halves = {0.5, 0.5};
  CHECK(slot_nll(halves, 1.0) == doctest::Approx(1.3863).epsilon(1e-4));
  const std::vector<double> ones = {1.0, 1.0, 1.0};
  CHECK(slot_nll(ones, 1.0) == 0.0);
  std::size_t clamped = 0;
  const std::vector<double> zero = {0.0, 0.5};
  CHECK(slot_nll(zero, 1.0, &clamped) == doctest::Approx(-std::log(1e-12) + std::log(2.0)));
  CHECK(clamped == 1);
}

TEST_CASE("set_loss hand sum and weighting") {
  TwoSide f = fixture();
  const LossBreakdown l = set_loss(f.probs, f.plan, f.targets, 0.2, 0.1, 1.0);
  const double s0 = -std::log(0.5) * 2;
  const double s1 = -0.2 * std::log(0.25);
  const double s2 = -0.1 * std::log(0.5);
  const double s3 = -(std::log(0.8) + std::log(0.4) + std::log(0.9));
  CHECK(l.total == doctest::Approx(s0 + s1 + s2 + s3).epsilon(1e-14));
  CHECK(l.per_slot[1] == doctest::Approx(s1));
  CHECK(l.null_terms == 2);
  CHECK(l.keyphrase_terms == 2);
  CHECK(l.masked == 0);
  CHECK(l.weights == std::vector<double>{1.0, 0.2, 0.1, 1.0});

  // scaling lambda_adp scales only null terms
  const LossBreakdown half = set_loss(f.probs, f.plan, f.targets, 0.2, 0.1, 0.5);
  CHECK(half.per_slot[0] == l.per_slot[0]);
  CHECK(half.per_slot[3] == l.per_slot[3]);
  CHECK(half.per_slot[1] == doctest::Approx(0.5 * l.per_slot[1]));
  CHECK(half.per_slot[2] == doctest::Approx(0.5 * l.per_slot[2]));
}

TEST_CASE("masked slots contribute nothing") {
  TwoSide f = fixture();
  f.plan.masked = {false, true, false, true};
  f.probs[1].masked = true;
  f.probs[3].masked = true;
  const LossBreakdown l = set_loss(f.probs, f.plan, f.targets, 0.2, 0.1, 1.0);
  CHECK(l.masked == 2);
  CHECK(l.per_slot[1] == 0.0);
  CHECK(l.per_slot[3] == 0.0);
  CHECK(l.weights[1] == 0.0);
  CHECK(l.total == doctest::Approx(l.per_slot[0] + l.per_slot[2]));

  f.plan.masked.assign(4, true);
  CHECK(set_loss(f.probs, f.plan, f.targets, 0.2, 0.1, 1.0).total == 0.0);
}

TEST_CASE("set_loss rejects inconsistent input") {
  TwoSide f = fixture();
  f.probs.pop_back();
  CHECK_THROWS(set_loss(f.probs, f.plan, f.targets, 0.2, 0.1, 1.0));
  f = fixture();
  f.probs[0].masked = true;
  CHECK_THROWS(set_loss(f.probs, f.plan, f.targets, 0.2, 0.1, 1.0));
}
