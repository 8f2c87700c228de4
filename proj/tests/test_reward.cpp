#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "viral/reward/reward.hpp"
#include "viral/sim/oracle.hpp"
#include "viral/sim/world.hpp"
#include "viral/task_env.hpp"

using namespace viral;
using namespace viral::reward;

TEST_CASE("walk shaping peaks at the standoff distance") {
  CHECK(r_walk(0.45) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r_walk(0.95) == doctest::Approx(0.36787944117144233).epsilon(1e-12));
  CHECK(r_walk(0.0) == doctest::Approx(0.4448580662229411).epsilon(1e-12));
}

TEST_CASE("place term penalizes grip force only near the tray") {
  CHECK(r_place(0.8, 0.2) == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(r_place(0.8, 0.4) == 0.0);
  CHECK(r_place(0.0, 0.05) == 0.0);
}

TEST_CASE("lift height term clamps at 15 cm") {
  CHECK(r_grasp_z(0.80, 0.65) == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(r_grasp_z(0.70, 0.65) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(r_grasp_z(0.60, 0.65) == doctest::Approx(-0.05).epsilon(1e-12));
}

TEST_CASE("lift goal term is a squared-distance exponential") {
  const Vec3 p{1.0, 2.0, 0.5};
  CHECK(r_grasp_goal(p, p) == 1.0);
  // ||delta||^2 = 0.1
  const Vec3 q{1.0 + std::sqrt(0.1), 2.0, 0.5};
  CHECK(r_grasp_goal(q, p) == doctest::Approx(0.36787944117144233).epsilon(1e-9));
  CHECK(r_grasp_goal({100.0, 0.0, 0.0}, p) < 1e-300);
}

TEST_CASE("turn term uses the shortest angular difference") {
  CHECK(r_turn(1.2, 1.2) == 0.0);
  CHECK(r_turn(1.0, 0.5) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(r_turn(-3.1, 3.1) == doctest::Approx(-0.08318530717958605).epsilon(1e-9));
}

TEST_CASE("turn term is symmetric in its arguments") {
  Rng rng(4, 0);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-kPi, kPi);
    const double b = rng.uniform(-kPi, kPi);
    CHECK(r_turn(a, b) == doctest::Approx(r_turn(b, a)).epsilon(1e-12));
  }
}

namespace {

sim::WorldState quiet_world(uint64_t seed) {
  sim::WorldState w = sim::reset_nominal(seed, 0, sim::SceneRanges{},
                                         sim::ObjectMode::kSingle);
  w.joints.dq_arm = {0.0, 0.0};
  w.joints.dg = 0.0;
  w.cmd.v_cmd = {0.0, 0.0};
  w.cmd.w_cmd = 0.0;
  return w;
}

}  // namespace

TEST_CASE("penalties vanish for a quiet world and zero deltas") {
  const sim::WorldState w = quiet_world(1);
  RewardBreakdown out{};
  r_penalties(w, sim::ActionDelta{}, sim::ActionDelta{}, w.cmd,
              w.grasp_obj.pos.xy(), out);
  CHECK(out.value[kPenDeltaRate] == 0.0);
  CHECK(out.value[kPenDofVel] == 0.0);
  CHECK(out.value[kPenSmoothness] == 0.0);
  CHECK(out.value[kPenCmdOverflow] == 0.0);
  CHECK(out.value[kPenZeroCmd] == 0.0);
  CHECK(out.value[kPenObjSlide] == 0.0);
}

TEST_CASE("command overflow is charged on the pre-clamp candidate") {
  const sim::WorldState w = quiet_world(2);
  sim::CommandState candidate = w.cmd;
  candidate.v_cmd[0] = 0.6;
  RewardBreakdown out{};
  r_penalties(w, sim::ActionDelta{}, sim::ActionDelta{}, candidate,
              w.grasp_obj.pos.xy(), out);
  CHECK(out.value[kPenCmdOverflow] == doctest::Approx(0.1).epsilon(1e-12));
  const auto weights = TermWeights::defaults();
  CHECK(weights.rows[kPenCmdOverflow].weight * out.value[kPenCmdOverflow] ==
        doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("zero-command penalty at stage 2 matches the table weight") {
  sim::WorldState w = quiet_world(3);
  w.stage = 2;
  w.cmd.v_cmd = {0.1, 0.1};
  w.cmd.w_cmd = 0.1;
  RewardBreakdown out{};
  r_penalties(w, sim::ActionDelta{}, sim::ActionDelta{}, w.cmd,
              w.grasp_obj.pos.xy(), out);
  CHECK(out.value[kPenZeroCmd] == doctest::Approx(0.3).epsilon(1e-12));
  const auto weights = TermWeights::defaults();
  CHECK(weights.rows[kPenZeroCmd].active(2));
  CHECK(weights.rows[kPenZeroCmd].weight * out.value[kPenZeroCmd] ==
        doctest::Approx(-3.6).epsilon(1e-12));
}

TEST_CASE("total reward is zero when every term is zero") {
  RewardBreakdown empty{};
  CHECK(total_reward(0, empty, TermWeights::defaults()) == 0.0);
}

TEST_CASE("stage 3 lift at the clamp is worth 30") {
  RewardBreakdown b{};
  b.value[kGraspZ] = 0.15;
  CHECK(total_reward(3, b, TermWeights::defaults()) ==
        doctest::Approx(30.0).epsilon(1e-12));
}

TEST_CASE("a violation step charges the termination weight") {
  const sim::WorldState w = quiet_world(5);
  const RewardBreakdown b = compute_breakdown(
      w, sim::ActionDelta{}, sim::ActionDelta{}, w.cmd, w.grasp_obj.pos.xy(),
      /*violation=*/true, TermWeights::defaults());
  const RewardBreakdown b0 = compute_breakdown(
      w, sim::ActionDelta{}, sim::ActionDelta{}, w.cmd, w.grasp_obj.pos.xy(),
      /*violation=*/false, TermWeights::defaults());
  CHECK(b.total - b0.total == doctest::Approx(-2000.0).epsilon(1e-12));
}

TEST_CASE("a term masked out of the stage contributes exactly zero") {
  RewardBreakdown b{};
  b.value[kTurn] = -0.7;  // turn is stage 4 only
  const auto weights = TermWeights::defaults();
  for (int s = 0; s < 4; ++s) CHECK(total_reward(s, b, weights) == 0.0);
  CHECK(total_reward(4, b, weights) ==
        doctest::Approx(15.0 * -0.7).epsilon(1e-12));
}

TEST_CASE("shaped exponentials stay in (0,1] and penalties never add reward") {
  Rng rng(6, 0);
  const auto weights = TermWeights::defaults();
  for (int i = 0; i < 1000; ++i) {
    sim::WorldState w = sim::reset_nominal(i, 0, sim::SceneRanges{},
                                           sim::ObjectMode::kMulti);
    w.stage = static_cast<int>(rng.uniform_index(5));
    w.base.x += rng.uniform(-0.5, 0.5);
    w.base.yaw = wrap_angle(rng.uniform(-kPi, kPi));
    w.joints.g = rng.uniform(0.0, 1.0);
    sim::ActionDelta d;
    d.dv = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    d.dw = rng.uniform(-0.1, 0.1);
    d.dg = rng.uniform(-0.1, 0.1);
    const RewardBreakdown b =
        compute_breakdown(w, d, sim::ActionDelta{}, w.cmd, w.grasp_obj.pos.xy(),
                          false, weights);
    for (Term t : {kWalk, kHold, kGraspDist, kGraspGoal, kKeepClosed,
                   kPoseTrackPlace, kPoseTrackGrasp}) {
      CHECK(b.value[t] > 0.0);
      CHECK(b.value[t] <= 1.0);
    }
    for (Term t : {kPenDeltaRate, kPenDofVel, kPenSmoothness, kPenCmdOverflow,
                   kPenZeroCmd, kPenObjSlide}) {
      CHECK(weights.rows[t].weight * b.value[t] <= 0.0);
    }
  }
}

TEST_CASE("total matches an independent gated dot product on random states") {
  Rng rng(7, 0);
  const auto weights = TermWeights::defaults();
  for (int i = 0; i < 1000; ++i) {
    sim::WorldState w = sim::reset_nominal(i + 5000, 0, sim::SceneRanges{},
                                           sim::ObjectMode::kMulti);
    w.stage = static_cast<int>(rng.uniform_index(5));
    w.base.yaw = wrap_angle(rng.uniform(-kPi, kPi));
    w.joints.g = rng.uniform(0.0, 1.0);
    sim::ActionDelta d;
    d.dv = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    d.dw = rng.uniform(-0.1, 0.1);
    d.dq_arm = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
    d.dg = rng.uniform(-0.1, 0.1);
    const bool violation = rng.bernoulli(0.1);
    const RewardBreakdown b = compute_breakdown(
        w, d, sim::ActionDelta{}, w.cmd, w.grasp_obj.pos.xy(), violation, weights);

    double expected = 0.0;
    for (int t = 0; t < kNumTerms; ++t) {
      const auto& row = weights.rows[t];
      const double gate = ((row.mask >> w.stage) & 1) ? 1.0 : 0.0;
      expected += row.weight * gate * b.value[t];
    }
    expected *= weights.stage_weight[w.stage];
    CHECK(b.total == doctest::Approx(expected).epsilon(1e-10));
  }
}
