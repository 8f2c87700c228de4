#pragma once

#include <optional>
#include <vector>

#include "viral/reward/reward.hpp"
#include "viral/sim/oracle.hpp"
#include "viral/sim/world.hpp"

namespace viral {

struct EnvConfig {
  sim::SceneRanges ranges{};
  sim::ObjectMode object_mode = sim::ObjectMode::kSingle;
  int horizon = sim::kDefaultHorizon;
  reward::TermWeights weights = reward::TermWeights::defaults();
  // per-shape evaluation: overrides both objects' shapes at nominal resets
  std::optional<sim::Shape> forced_shape;
};

struct StepOutcome {
  double reward = 0.0;
  sim::StepResult result = sim::StepResult::kRunning;
  bool stage_advanced = false;
  reward::RewardBreakdown breakdown{};
};

// one episode stream per environment: command accumulation, dynamics, stage
// machine, reward, and termination in a fixed order per control step
class TaskEnv {
 public:
  TaskEnv(const EnvConfig& cfg, uint64_t seed, uint64_t env_id)
      : cfg_(cfg), seed_(seed), env_id_(env_id), episode_rng_(seed, env_id) {
    reset_nominal();
  }

  const sim::WorldState& world() const { return world_; }
  sim::WorldState& world() { return world_; }
  const EnvConfig& config() const { return cfg_; }

  void reset_nominal() {
    const uint64_t sub_seed = episode_rng_.next_u64();
    world_ = sim::reset_nominal(sub_seed, env_id_, cfg_.ranges, cfg_.object_mode);
    if (cfg_.forced_shape) {
      for (sim::ObjectState* obj : {&world_.hold_obj, &world_.grasp_obj}) {
        obj->shape_id = *cfg_.forced_shape;
        obj->grasp_radius = sim::shape_grasp_radius(obj->shape_id);
      }
    }
  }

  void reset_from_buffer(const std::vector<sim::DemoSnapshot>& buffer) {
    world_ = sim::reset_from_snapshot(buffer, episode_rng_);
    world_.rng = Rng(episode_rng_.next_u64(), env_id_);
    world_.object_mode = cfg_.object_mode;
    if (cfg_.forced_shape) {
      for (sim::ObjectState* obj : {&world_.hold_obj, &world_.grasp_obj}) {
        obj->shape_id = *cfg_.forced_shape;
        obj->grasp_radius = sim::shape_grasp_radius(obj->shape_id);
      }
    }
  }

  // delta-action step: accumulate, integrate, advance stage, reward, terminate
  StepOutcome apply_delta(const sim::ActionDelta& delta) {
    const sim::CommandState candidate =
        sim::accumulate_command_unclamped(world_.cmd, delta);
    world_.cmd = sim::accumulate_command(world_.cmd, delta);
    return finish_step(delta, candidate);
  }

  // absolute-action ablation: the squashed policy output [-1,1]^6 is the full
  // command; the recorded delta is the actual command change
  StepOutcome apply_absolute(const std::array<double, 6>& squashed) {
    sim::CommandState target;
    target.v_cmd = {sim::kMaxCmdVel * squashed[0], sim::kMaxCmdVel * squashed[1]};
    target.w_cmd = sim::kMaxCmdVel * squashed[2];
    target.q_arm_tgt = {kPi * squashed[3], kPi * squashed[4]};
    target.g_tgt = 0.5 * (squashed[5] + 1.0);
    sim::ActionDelta delta;
    delta.dv = {target.v_cmd[0] - world_.cmd.v_cmd[0],
                target.v_cmd[1] - world_.cmd.v_cmd[1]};
    delta.dw = target.w_cmd - world_.cmd.w_cmd;
    delta.dq_arm = {target.q_arm_tgt[0] - world_.cmd.q_arm_tgt[0],
                    target.q_arm_tgt[1] - world_.cmd.q_arm_tgt[1]};
    delta.dg = target.g_tgt - world_.cmd.g_tgt;
    world_.cmd = target;
    return finish_step(delta, target);
  }

  Rng& episode_rng() { return episode_rng_; }

 private:
  StepOutcome finish_step(const sim::ActionDelta& delta,
                          const sim::CommandState& candidate) {
    const sim::ActionDelta prev_delta = world_.last_delta;
    const Vec2 prev_grasp_xy = world_.grasp_obj.pos.xy();
    world_.last_delta = delta;
    sim::step(world_);
    StepOutcome out;
    out.stage_advanced = sim::advance_stage(world_);
    out.result = sim::check_termination(world_, cfg_.horizon);
    out.breakdown = reward::compute_breakdown(
        world_, delta, prev_delta, candidate, prev_grasp_xy,
        out.result == sim::StepResult::kViolation, cfg_.weights);
    out.reward = out.breakdown.total;
    return out;
  }

  EnvConfig cfg_;
  sim::WorldState world_{};
  uint64_t seed_ = 0;
  uint64_t env_id_ = 0;
  Rng episode_rng_;
};

}  // namespace viral
