#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "viral/nn/adam.hpp"
#include "viral/nn/nets.hpp"
#include "viral/percept/obs.hpp"
#include "viral/runtime/config.hpp"
#include "viral/runtime/metrics.hpp"
#include "viral/runtime/pool.hpp"
#include "viral/task_env.hpp"

namespace viral::ppo {

using DemoBuffer = std::vector<sim::DemoSnapshot>;

struct TeacherNets {
  nn::ParamVector params;
  nn::GaussianPolicy policy;
  nn::MLP value;

  // running return normalizer: the value head regresses standardized returns
  // so Adam-sized steps can track the reward scale
  double ret_mean = 0.0;
  double ret_std = 1.0;
  double ret_count = 0.0;
  double ret_m2 = 0.0;

  void build(const std::vector<int>& hidden);
  void init(uint64_t seed, double init_std);

  // deterministic action: squashed, scaled mean
  std::array<double, 6> mean_delta(const percept::PrivilegedObs& obs) const;
  double state_value(const percept::PrivilegedObs& obs) const;
  void update_return_stats(const std::vector<double>& returns);
  double normalize_return(double ret) const { return (ret - ret_mean) / ret_std; }

  std::string descriptor() const;
  void save(const std::string& path) const;
  static TeacherNets load(const std::string& path);
};

struct RolloutBatch {
  int n_envs = 0;
  int steps = 0;
  // flattened [env * steps + t]
  std::vector<double> obs;       // x 50
  std::vector<double> pre_z;     // x 6 pre-squash actions
  std::vector<double> log_prob;
  std::vector<double> value;
  std::vector<double> reward;
  std::vector<uint8_t> done;
  std::vector<uint8_t> term_kind;
  std::vector<double> bootstrap_value;  // per env

  int size() const { return n_envs * steps; }
};

struct PpoLossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
};

// oracle demonstrations: state snapshot at every control step of successful
// episodes; aborts if the oracle succeeds on fewer than half the episodes
DemoBuffer record_demos(int n_episodes, uint64_t seed, const EnvConfig& cfg);

RolloutBatch collect_rollout(const TeacherNets& nets, std::vector<TaskEnv>& envs,
                             int steps, const DemoBuffer* demos, double rsi_prob,
                             bool absolute_actions, runtime::WorkerPool& pool);

// raw GAE advantages and returns (normalization happens inside ppo_update)
void compute_gae(const RolloutBatch& batch, double gamma, double lam,
                 std::vector<double>& advantages, std::vector<double>& returns);

PpoLossReport ppo_update(TeacherNets& nets, nn::AdamState& adam,
                         const RolloutBatch& batch,
                         const std::vector<double>& advantages,
                         const std::vector<double>& returns,
                         const runtime::PpoSection& cfg, uint64_t shuffle_seed,
                         runtime::WorkerPool& pool);

// full-batch mean gradient of the PPO loss without an update; the worker
// shards feed allreduce_mean, so this is the scaling-equivalence probe
nn::ParamVector ppo_batch_gradient(const TeacherNets& nets,
                                   const RolloutBatch& batch,
                                   const std::vector<double>& advantages,
                                   const std::vector<double>& returns,
                                   const runtime::PpoSection& cfg,
                                   runtime::WorkerPool& pool);

struct EvalReport {
  double success_rate = 0.0;
  double mean_cycle_steps = 0.0;  // over successful episodes
  int episodes = 0;
};

EvalReport evaluate_teacher(const TeacherNets& nets, const EnvConfig& cfg,
                            int episodes, uint64_t seed, bool absolute_actions,
                            runtime::WorkerPool& pool);

struct TrainTeacherResult {
  double final_success = 0.0;
  int64_t env_steps = 0;
  std::string checkpoint_path;
};

TrainTeacherResult train_teacher(const runtime::ExperimentConfig& cfg,
                                 uint64_t seed, const DemoBuffer* demos,
                                 runtime::WorkerPool& pool,
                                 runtime::MetricsWriter* metrics,
                                 const std::string& checkpoint_path);

}  // namespace viral::ppo
