#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "viral/errors.hpp"
#include "viral/nn/gradcheck.hpp"
#include "viral/ppo/teacher.hpp"

using namespace viral;
using namespace viral::ppo;

namespace {

// independent double-loop advantage oracle
void gae_brute_force(const RolloutBatch& batch, double gamma, double lam,
                     std::vector<double>& adv) {
  const int n = batch.size();
  adv.assign(n, 0.0);
  for (int e = 0; e < batch.n_envs; ++e) {
    for (int t = 0; t < batch.steps; ++t) {
      double acc = 0.0;
      double w = 1.0;
      for (int k = t; k < batch.steps; ++k) {
        const int idx = e * batch.steps + k;
        const double mask = batch.done[idx] ? 0.0 : 1.0;
        const double v_next = (k == batch.steps - 1) ? batch.bootstrap_value[e]
                                                     : batch.value[idx + 1];
        const double delta =
            batch.reward[idx] + gamma * v_next * mask - batch.value[idx];
        acc += w * delta;
        if (batch.done[idx]) break;
        w *= gamma * lam;
      }
      adv[e * batch.steps + t] = acc;
    }
  }
}

RolloutBatch synthetic_batch(int n_envs, int steps, uint64_t seed) {
  RolloutBatch b;
  b.n_envs = n_envs;
  b.steps = steps;
  const int n = n_envs * steps;
  b.obs.assign(static_cast<size_t>(n) * 50, 0.0);
  b.pre_z.assign(static_cast<size_t>(n) * 6, 0.0);
  b.log_prob.assign(n, 0.0);
  b.value.assign(n, 0.0);
  b.reward.assign(n, 0.0);
  b.done.assign(n, 0);
  b.term_kind.assign(n, 0);
  b.bootstrap_value.assign(n_envs, 0.0);
  Rng rng(seed, 0);
  for (int i = 0; i < n; ++i) {
    b.reward[i] = rng.uniform(-2.0, 2.0);
    b.value[i] = rng.uniform(-1.0, 1.0);
    b.done[i] = rng.bernoulli(0.15) ? 1 : 0;
  }
  for (int e = 0; e < n_envs; ++e) b.bootstrap_value[e] = rng.uniform(-1.0, 1.0);
  return b;
}

EnvConfig small_env() { return EnvConfig{}; }

TeacherNets small_nets(uint64_t seed) {
  TeacherNets nets;
  nets.build({32, 16});
  nets.init(seed, 0.5);
  return nets;
}

}  // namespace

TEST_CASE("undiscounted GAE with zero values is reward-to-go") {
  RolloutBatch b = synthetic_batch(1, 2, 1);
  b.reward = {1.0, 1.0};
  b.value = {0.0, 0.0};
  b.done = {0, 1};
  b.bootstrap_value = {0.0};
  std::vector<double> adv, ret;
  compute_gae(b, 1.0, 1.0, adv, ret);
  CHECK(adv[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(adv[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ret[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("a done step truncates the advantage recursion") {
  RolloutBatch b = synthetic_batch(1, 4, 2);
  b.done = {0, 1, 0, 0};
  std::vector<double> adv, ret;
  compute_gae(b, 0.99, 0.95, adv, ret);
  const double delta1 = b.reward[1] - b.value[1];  // masked bootstrap
  CHECK(adv[1] == doctest::Approx(delta1).epsilon(1e-12));
}

TEST_CASE("GAE matches the brute-force double loop on 1000 random sequences") {
  for (int trial = 0; trial < 1000; ++trial) {
    RolloutBatch b = synthetic_batch(2, 10, 100 + trial);
    std::vector<double> adv, ret, oracle;
    compute_gae(b, 0.998, 0.95, adv, ret);
    gae_brute_force(b, 0.998, 0.95, oracle);
    for (int i = 0; i < b.size(); ++i) {
      CHECK(std::abs(adv[i] - oracle[i]) <= 1e-10);
      CHECK(ret[i] == doctest::Approx(adv[i] + b.value[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("record_demos keeps one snapshot per control step of a good episode") {
  EnvConfig cfg = small_env();
  const DemoBuffer buffer = record_demos(1, 1234, cfg);
  REQUIRE(!buffer.empty());
  // replay the same episode: the snapshot count equals the episode length
  TaskEnv env(cfg, 1234, 2'000'000ULL);
  int steps = 0;
  sim::StepResult r = sim::StepResult::kRunning;
  while (r == sim::StepResult::kRunning) {
    r = env.apply_delta(sim::oracle_action(env.world())).result;
    ++steps;
  }
  REQUIRE(r == sim::StepResult::kSuccess);
  CHECK(static_cast<int>(buffer.size()) == steps);
  for (const auto& snap : buffer) CHECK(sim::world_invariants_hold(snap.state));
}

TEST_CASE("record_demos aborts when the oracle succeeds on under half the episodes") {
  EnvConfig cfg = small_env();
  cfg.horizon = 10;  // nothing can finish in ten steps
  CHECK_THROWS_AS((void)record_demos(4, 1, cfg), ConfigError);
}

TEST_CASE("collect_rollout batches are rectangular and reproducible") {
  runtime::WorkerPool pool(1);
  const TeacherNets nets = small_nets(5);
  auto make_envs = [&] {
    std::vector<TaskEnv> envs;
    for (int e = 0; e < 4; ++e) envs.emplace_back(small_env(), 99, e);
    return envs;
  };
  auto envs_a = make_envs();
  auto envs_b = make_envs();
  const RolloutBatch a = collect_rollout(nets, envs_a, 16, nullptr, 0.0, false, pool);
  const RolloutBatch b = collect_rollout(nets, envs_b, 16, nullptr, 0.0, false, pool);
  CHECK(a.size() == 4 * 16);
  CHECK(a.obs.size() == static_cast<size_t>(4 * 16 * 50));
  CHECK(a.obs == b.obs);
  CHECK(a.pre_z == b.pre_z);
  CHECK(a.reward == b.reward);
  CHECK(a.log_prob == b.log_prob);
}

TEST_CASE("collect_rollout is invariant to the worker count") {
  const TeacherNets nets = small_nets(6);
  RolloutBatch batches[2];
  int slot = 0;
  for (int workers : {1, 2}) {
    runtime::WorkerPool pool(workers);
    std::vector<TaskEnv> envs;
    for (int e = 0; e < 6; ++e) envs.emplace_back(small_env(), 7, e);
    batches[slot++] = collect_rollout(nets, envs, 12, nullptr, 0.0, false, pool);
  }
  CHECK(batches[0].obs == batches[1].obs);
  CHECK(batches[0].pre_z == batches[1].pre_z);
  CHECK(batches[0].reward == batches[1].reward);
  CHECK(batches[0].done == batches[1].done);
}

TEST_CASE("logged log-probs match recomputation from stored observation and action") {
  runtime::WorkerPool pool(1);
  const TeacherNets nets = small_nets(7);
  std::vector<TaskEnv> envs;
  for (int e = 0; e < 4; ++e) envs.emplace_back(small_env(), 11, e);
  const RolloutBatch batch = collect_rollout(nets, envs, 16, nullptr, 0.0, false, pool);
  const auto scale = sim::ActionDelta::bounds();
  const double* log_std = nets.params.at(nets.policy.log_std_off);
  for (int i = 0; i < batch.size(); ++i) {
    double mu[6];
    nets.policy.forward_mean(nets.params, &batch.obs[static_cast<size_t>(i) * 50], mu);
    const double lp = nn::squashed_log_prob(
        mu, log_std, &batch.pre_z[static_cast<size_t>(i) * 6], scale.data(), 6);
    CHECK(std::abs(lp - batch.log_prob[i]) <= 1e-12);
  }
}

TEST_CASE("first-epoch surrogate with a full-batch minibatch is zero") {
  runtime::WorkerPool pool(1);
  TeacherNets nets = small_nets(8);
  std::vector<TaskEnv> envs;
  for (int e = 0; e < 4; ++e) envs.emplace_back(small_env(), 13, e);
  const RolloutBatch batch = collect_rollout(nets, envs, 8, nullptr, 0.0, false, pool);
  std::vector<double> adv, ret;
  compute_gae(batch, 0.998, 0.95, adv, ret);
  runtime::PpoSection cfg;
  cfg.epochs = 1;
  cfg.minibatches = 1;
  cfg.lr = 1e-12;
  cfg.vf_coef = 0.0;
  cfg.entropy_coef = 0.0;
  nn::AdamState adam(nets.params.size());
  const PpoLossReport rep = ppo_update(nets, adam, batch, adv, ret, cfg, 17, pool);
  CHECK(std::abs(rep.policy_loss) <= 1e-10);
  CHECK(rep.clip_frac == 0.0);
}

TEST_CASE("zero advantages produce a zero policy gradient") {
  runtime::WorkerPool pool(1);
  const TeacherNets nets = small_nets(9);
  std::vector<TaskEnv> envs;
  for (int e = 0; e < 2; ++e) envs.emplace_back(small_env(), 15, e);
  const RolloutBatch batch = collect_rollout(nets, envs, 8, nullptr, 0.0, false, pool);
  const std::vector<double> adv(batch.size(), 0.0);
  std::vector<double> ret(batch.size(), 0.0);
  runtime::PpoSection cfg;
  cfg.vf_coef = 0.0;
  cfg.entropy_coef = 0.0;
  const nn::ParamVector g = ppo_batch_gradient(nets, batch, adv, ret, cfg, pool);
  for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("clipped surrogate matches the hand-computed fixture") {
  // two samples, clip 0.2, normalized advantages (+1, -1):
  //   rho = 1.5, A = +1 -> -min(1.5, 1.2) = -1.2
  //   rho = 0.5, A = -1 -> -min(-0.5, -0.8) = +0.8
  // mean policy loss = -0.2; both samples sit outside the clip band
  runtime::WorkerPool pool(1);
  TeacherNets nets = small_nets(10);
  std::vector<TaskEnv> envs;
  envs.emplace_back(small_env(), 21, 0);
  RolloutBatch batch = collect_rollout(nets, envs, 2, nullptr, 0.0, false, pool);

  const auto scale = sim::ActionDelta::bounds();
  const double* log_std = nets.params.at(nets.policy.log_std_off);
  const double rho_target[2] = {1.5, 0.5};
  for (int i = 0; i < 2; ++i) {
    double mu[6];
    nets.policy.forward_mean(nets.params, &batch.obs[static_cast<size_t>(i) * 50], mu);
    const double lp = nn::squashed_log_prob(
        mu, log_std, &batch.pre_z[static_cast<size_t>(i) * 6], scale.data(), 6);
    batch.log_prob[i] = lp - std::log(rho_target[i]);
  }
  // raw advantages (1, -1) already have mean zero and unit population std
  const std::vector<double> adv{1.0, -1.0};
  const std::vector<double> ret{0.0, 0.0};
  runtime::PpoSection cfg;
  cfg.epochs = 1;
  cfg.minibatches = 1;
  cfg.clip = 0.2;
  cfg.lr = 1e-12;
  cfg.vf_coef = 0.0;
  cfg.entropy_coef = 0.0;
  nn::AdamState adam(nets.params.size());
  const PpoLossReport rep = ppo_update(nets, adam, batch, adv, ret, cfg, 23, pool);
  CHECK(rep.policy_loss == doctest::Approx(-0.2).epsilon(1e-7));
  CHECK(rep.clip_frac == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("with no clip and no entropy PPO reduces to the REINFORCE gradient") {
  runtime::WorkerPool pool(1);
  const TeacherNets nets = small_nets(11);
  std::vector<TaskEnv> envs;
  for (int e = 0; e < 3; ++e) envs.emplace_back(small_env(), 29, e);
  const RolloutBatch batch = collect_rollout(nets, envs, 8, nullptr, 0.0, false, pool);
  std::vector<double> adv_raw, ret;
  compute_gae(batch, 0.998, 0.95, adv_raw, ret);

  runtime::PpoSection cfg;
  cfg.clip = 1e9;
  cfg.vf_coef = 0.0;
  cfg.entropy_coef = 0.0;
  const nn::ParamVector g_ppo =
      ppo_batch_gradient(nets, batch, adv_raw, ret, cfg, pool);

  // REINFORCE-with-baseline on the same normalized advantages
  const int n = batch.size();
  double mean = 0.0;
  for (double a : adv_raw) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : adv_raw) var += (a - mean) * (a - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + 1e-8);

  nn::ParamVector g_pg = nets.params.zeros_like();
  const auto scale = sim::ActionDelta::bounds();
  const double* log_std = nets.params.at(nets.policy.log_std_off);
  (void)scale;
  for (int i = 0; i < n; ++i) {
    const double a = (adv_raw[i] - mean) * inv_std;
    double mu[6];
    nn::MLP::Cache cache;
    nets.policy.forward_mean(nets.params, &batch.obs[static_cast<size_t>(i) * 50], mu,
                             &cache);
    double dmu[6];
    for (int d = 0; d < 6; ++d) {
      const double sd = std::exp(log_std[d]);
      const double u = (batch.pre_z[static_cast<size_t>(i) * 6 + d] - mu[d]) / sd;
      dmu[d] = -a * u / sd;
      g_pg.at(nets.policy.log_std_off)[d] += -a * (u * u - 1.0);
    }
    nets.policy.mean.backward(nets.params, g_pg, cache, dmu);
  }
  for (double& v : g_pg.data) v /= n;

  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < g_ppo.data.size(); ++i) {
    dot += g_ppo.data[i] * g_pg.data[i];
    na += g_ppo.data[i] * g_ppo.data[i];
    nb += g_pg.data[i] * g_pg.data[i];
  }
  const double cosine = dot / std::sqrt(na * nb);
  CHECK(cosine >= 1.0 - 1e-10);
}

TEST_CASE("the full PPO loss gradient matches finite differences") {
  runtime::WorkerPool pool(1);
  TeacherNets nets = small_nets(12);
  std::vector<TaskEnv> envs;
  for (int e = 0; e < 2; ++e) envs.emplace_back(small_env(), 31, e);
  const RolloutBatch batch = collect_rollout(nets, envs, 6, nullptr, 0.0, false, pool);
  std::vector<double> adv_raw, ret;
  compute_gae(batch, 0.998, 0.95, adv_raw, ret);
  const int n = batch.size();
  double mean = 0.0;
  for (double a : adv_raw) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : adv_raw) var += (a - mean) * (a - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + 1e-8);
  std::vector<double> adv(n);
  for (int i = 0; i < n; ++i) adv[i] = (adv_raw[i] - mean) * inv_std;

  runtime::PpoSection cfg;  // defaults: clip 0.2, vf 1.0, entropy 0.01
  const nn::ParamVector g = ppo_batch_gradient(nets, batch, adv_raw, ret, cfg, pool);

  const auto scale = sim::ActionDelta::bounds();
  auto loss_fn = [&](const nn::ParamVector& q) {
    double loss = 0.0;
    const double* log_std = q.at(nets.policy.log_std_off);
    for (int i = 0; i < n; ++i) {
      double mu[6];
      nets.policy.mean.forward(q, &batch.obs[static_cast<size_t>(i) * 50], mu);
      const double lp = nn::squashed_log_prob(
          mu, log_std, &batch.pre_z[static_cast<size_t>(i) * 6], scale.data(), 6);
      const double rho = std::exp(lp - batch.log_prob[i]);
      const double clipped = clamp(rho, 1.0 - cfg.clip, 1.0 + cfg.clip);
      double v = 0.0;
      nets.value.forward(q, &batch.obs[static_cast<size_t>(i) * 50], &v);
      loss += -std::min(rho * adv[i], clipped * adv[i]) +
              cfg.vf_coef * (v - ret[i]) * (v - ret[i]) -
              cfg.entropy_coef * nn::gaussian_entropy(log_std, 6);
    }
    return loss / n;
  };
  Rng pick(33, 0);
  CHECK(nn::finite_diff_check(loss_fn, nets.params, g, pick) <= 1e-4);
}

TEST_CASE("teacher evaluation is deterministic in checkpoint and seed") {
  runtime::WorkerPool pool(2);
  const TeacherNets nets = small_nets(13);
  const EvalReport a = evaluate_teacher(nets, small_env(), 8, 77, false, pool);
  const EvalReport b = evaluate_teacher(nets, small_env(), 8, 77, false, pool);
  CHECK(a.success_rate == b.success_rate);
  CHECK(a.mean_cycle_steps == b.mean_cycle_steps);
}

TEST_CASE("teacher checkpoints reload bit-exactly") {
  TeacherNets nets = small_nets(14);
  const std::string path =
      (std::filesystem::temp_directory_path() / "viral_teacher_test.ckpt").string();
  nets.save(path);
  const TeacherNets loaded = TeacherNets::load(path);
  REQUIRE(loaded.params.size() == nets.params.size());
  for (size_t i = 0; i < nets.params.size(); ++i)
    CHECK(loaded.params.data[i] == nets.params.data[i]);
}
