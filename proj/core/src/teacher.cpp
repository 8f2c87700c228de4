#include "viral/ppo/teacher.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "viral/errors.hpp"
#include "viral/nn/checkpoint.hpp"

namespace viral::ppo {

namespace {

constexpr int kObsDim = percept::kPrivilegedDim;
constexpr int kActDim = 6;

std::array<double, 6> action_scale() { return sim::ActionDelta::bounds(); }

EnvConfig env_config_from(const runtime::ExperimentConfig& cfg) {
  EnvConfig e;
  e.ranges = cfg.sim.ranges;
  e.object_mode = cfg.sim.object_mode;
  e.horizon = cfg.sim.horizon;
  e.weights = cfg.weights;
  return e;
}

void fisher_yates(std::vector<int>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
}

struct SampleScratch {
  nn::MLP::Cache pc, vc;
};

// clipped-surrogate + value + entropy gradient for one sample; returns
// {policy term, squared value error, entropy, clipped flag}
std::array<double, 4> sample_grad(const TeacherNets& nets, const RolloutBatch& batch,
                                  int idx, double adv_norm, double ret,
                                  const runtime::PpoSection& cfg,
                                  nn::ParamVector& grad, SampleScratch& scratch) {
  const auto scale = action_scale();
  const double* log_std = nets.params.at(nets.policy.log_std_off);
  const double* obs = &batch.obs[static_cast<size_t>(idx) * kObsDim];
  const double* z = &batch.pre_z[static_cast<size_t>(idx) * kActDim];

  double mu[kActDim];
  nets.policy.mean.forward(nets.params, obs, mu, &scratch.pc);
  double v = 0.0;
  nets.value.forward(nets.params, obs, &v, &scratch.vc);

  const double lp = nn::squashed_log_prob(mu, log_std, z, scale.data(), kActDim);
  const double rho = std::exp(lp - batch.log_prob[idx]);
  const double a = adv_norm;
  const double clipped = clamp(rho, 1.0 - cfg.clip, 1.0 + cfg.clip);
  const bool unclipped_active = rho * a <= clipped * a;
  const double dsurr_dlp = unclipped_active ? -a * rho : 0.0;

  double dmu[kActDim];
  for (int i = 0; i < kActDim; ++i) {
    const double sd = std::exp(log_std[i]);
    const double u = (z[i] - mu[i]) / sd;
    dmu[i] = dsurr_dlp * u / sd;
    grad.at(nets.policy.log_std_off)[i] +=
        dsurr_dlp * (u * u - 1.0) - cfg.entropy_coef;
  }
  nets.policy.mean.backward(nets.params, grad, scratch.pc, dmu);

  const double verr = v - nets.normalize_return(ret);
  const double dv = cfg.vf_coef * 2.0 * verr;
  nets.value.backward(nets.params, grad, scratch.vc, &dv);

  return {-std::min(rho * a, clipped * a), verr * verr,
          nn::gaussian_entropy(log_std, kActDim),
          std::abs(rho - 1.0) > cfg.clip ? 1.0 : 0.0};
}

std::vector<double> normalize_advantages(const std::vector<double>& advantages) {
  const int n = static_cast<int>(advantages.size());
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + 1e-8);
  std::vector<double> adv(n);
  for (int i = 0; i < n; ++i) adv[i] = (advantages[i] - mean) * inv_std;
  return adv;
}

}  // namespace

void TeacherNets::build(const std::vector<int>& hidden) {
  params = nn::ParamVector{};
  nn::MLPSpec pspec{kObsDim, hidden, kActDim};
  policy.build(params, "policy", pspec);
  nn::MLPSpec vspec{kObsDim, hidden, 1};
  value.build(params, "value", vspec);
}

void TeacherNets::init(uint64_t seed, double init_std) {
  Rng rng(seed, 0x7e3);
  policy.init(params, rng);
  value.init(params, rng, 1.0);
  double* ls = params.at(policy.log_std_off);
  for (int i = 0; i < kActDim; ++i) ls[i] = std::log(init_std);
}

std::array<double, 6> TeacherNets::mean_delta(const percept::PrivilegedObs& obs) const {
  double mu[kActDim];
  policy.forward_mean(params, obs.data(), mu);
  const auto scale = action_scale();
  std::array<double, 6> out{};
  for (int i = 0; i < kActDim; ++i) out[i] = scale[i] * std::tanh(mu[i]);
  return out;
}

double TeacherNets::state_value(const percept::PrivilegedObs& obs) const {
  double v = 0.0;
  value.forward(params, obs.data(), &v);
  return ret_mean + ret_std * v;
}

void TeacherNets::update_return_stats(const std::vector<double>& returns) {
  // Welford merge of the batch into the running moments
  const double n_b = static_cast<double>(returns.size());
  double mean_b = 0.0;
  for (double r : returns) mean_b += r;
  mean_b /= n_b;
  double m2_b = 0.0;
  for (double r : returns) m2_b += (r - mean_b) * (r - mean_b);
  const double n_a = ret_count;
  const double delta = mean_b - ret_mean;
  const double n = n_a + n_b;
  ret_mean += delta * n_b / n;
  ret_m2 += m2_b + delta * delta * n_a * n_b / n;
  ret_count = n;
  ret_std = std::sqrt(ret_m2 / std::max(1.0, ret_count) + 1e-8);
  if (ret_std < 1e-6) ret_std = 1e-6;
}

std::string TeacherNets::descriptor() const {
  nlohmann::json j;
  j["kind"] = "teacher";
  j["obs_dim"] = kObsDim;
  j["action_dim"] = kActDim;
  j["hidden"] = policy.mean.spec.hidden;
  j["ret_mean"] = ret_mean;
  j["ret_std"] = ret_std;
  return j.dump();
}

void TeacherNets::save(const std::string& path) const {
  nn::save_checkpoint(path, descriptor(), params);
}

TeacherNets TeacherNets::load(const std::string& path) {
  nn::ParamVector loaded;
  const std::string desc = nn::load_checkpoint(path, loaded);
  const nlohmann::json j = nlohmann::json::parse(desc);
  if (j.value("kind", "") != "teacher")
    throw IoError("checkpoint is not a teacher policy: " + path);
  TeacherNets nets;
  nets.build(j["hidden"].get<std::vector<int>>());
  if (!nets.params.same_layout(loaded))
    throw IoError("teacher checkpoint layout mismatch: " + path);
  nets.params.data = loaded.data;
  nets.ret_mean = j.value("ret_mean", 0.0);
  nets.ret_std = j.value("ret_std", 1.0);
  return nets;
}

DemoBuffer record_demos(int n_episodes, uint64_t seed, const EnvConfig& cfg) {
  DemoBuffer buffer;
  int successes = 0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    TaskEnv env(cfg, seed, 2'000'000ULL + ep);
    std::vector<sim::DemoSnapshot> episode;
    sim::StepResult result = sim::StepResult::kRunning;
    int t = 0;
    while (result == sim::StepResult::kRunning) {
      sim::DemoSnapshot snap;
      snap.state = env.world();
      snap.demo_id = ep;
      snap.source_step = t;
      episode.push_back(std::move(snap));
      result = env.apply_delta(sim::oracle_action(env.world())).result;
      ++t;
    }
    if (result == sim::StepResult::kSuccess) {
      ++successes;
      for (auto& s : episode) {
        if (!sim::world_invariants_hold(s.state))
          throw NumericError("demo snapshot violates world invariants");
        buffer.push_back(std::move(s));
      }
    }
  }
  if (2 * successes < n_episodes)
    throw ConfigError("oracle succeeded on " + std::to_string(successes) + "/" +
                      std::to_string(n_episodes) +
                      " demo episodes (below the 50% floor); "
                      "demo recording aborted");
  return buffer;
}

RolloutBatch collect_rollout(const TeacherNets& nets, std::vector<TaskEnv>& envs,
                             int steps, const DemoBuffer* demos, double rsi_prob,
                             bool absolute_actions, runtime::WorkerPool& pool) {
  const int n_envs = static_cast<int>(envs.size());
  RolloutBatch batch;
  batch.n_envs = n_envs;
  batch.steps = steps;
  const int n = n_envs * steps;
  batch.obs.resize(static_cast<size_t>(n) * kObsDim);
  batch.pre_z.resize(static_cast<size_t>(n) * kActDim);
  batch.log_prob.resize(n);
  batch.value.resize(n);
  batch.reward.resize(n);
  batch.done.resize(n);
  batch.term_kind.resize(n);
  batch.bootstrap_value.resize(n_envs);

  const auto scale = action_scale();
  const double* log_std = nets.params.at(nets.policy.log_std_off);

  pool.parallel_for(n_envs, [&](int e) {
    TaskEnv& env = envs[e];
    for (int t = 0; t < steps; ++t) {
      const int idx = e * steps + t;
      const percept::PrivilegedObs obs = percept::build_privileged(env.world());
      std::copy(obs.begin(), obs.end(), batch.obs.begin() + static_cast<size_t>(idx) * kObsDim);

      double mu[kActDim];
      nets.policy.forward_mean(nets.params, obs.data(), mu);
      batch.value[idx] = nets.state_value(obs);

      double z[kActDim];
      std::array<double, 6> squashed{};
      for (int i = 0; i < kActDim; ++i) {
        const double std_i = std::exp(log_std[i]);
        z[i] = mu[i] + std_i * env.world().rng.normal();
        squashed[i] = std::tanh(z[i]);
        batch.pre_z[static_cast<size_t>(idx) * kActDim + i] = z[i];
      }
      batch.log_prob[idx] =
          nn::squashed_log_prob(mu, log_std, z, scale.data(), kActDim);

      StepOutcome outcome;
      if (absolute_actions) {
        outcome = env.apply_absolute(squashed);
      } else {
        sim::ActionDelta delta;
        std::array<double, 6> flat{};
        for (int i = 0; i < kActDim; ++i) flat[i] = scale[i] * squashed[i];
        delta = sim::ActionDelta::from_flat(flat);
        outcome = env.apply_delta(delta);
      }
      batch.reward[idx] = outcome.reward;
      const bool done = outcome.result != sim::StepResult::kRunning;
      batch.done[idx] = done ? 1 : 0;
      batch.term_kind[idx] = static_cast<uint8_t>(outcome.result);
      if (done) {
        const bool use_rsi = demos != nullptr && !demos->empty() &&
                             env.episode_rng().bernoulli(rsi_prob);
        if (use_rsi)
          env.reset_from_buffer(*demos);
        else
          env.reset_nominal();
      }
    }
    const percept::PrivilegedObs fin = percept::build_privileged(env.world());
    batch.bootstrap_value[e] = nets.state_value(fin);
  });
  return batch;
}

PpoLossReport ppo_update(TeacherNets& nets, nn::AdamState& adam,
                         const RolloutBatch& batch,
                         const std::vector<double>& advantages,
                         const std::vector<double>& returns,
                         const runtime::PpoSection& cfg, uint64_t shuffle_seed,
                         runtime::WorkerPool& pool) {
  const int n = batch.size();
  const std::vector<double> adv = normalize_advantages(advantages);

  const int workers = pool.size();
  std::vector<nn::ParamVector> shard_grads;
  shard_grads.reserve(workers);
  for (int w = 0; w < workers; ++w) shard_grads.push_back(nets.params.zeros_like());
  std::vector<std::array<double, 4>> shard_stats(workers);

  PpoLossReport report;
  int report_count = 0;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(shuffle_seed, static_cast<uint64_t>(epoch));
    fisher_yates(order, shuffle_rng);
    const int mb_size = n / cfg.minibatches;
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      const int lo = mb * mb_size;
      const int hi = (mb == cfg.minibatches - 1) ? n : lo + mb_size;
      const int count = hi - lo;

      pool.parallel_shards(count, [&](int w, int slo, int shi) {
        nn::ParamVector& grad = shard_grads[w];
        grad.zero();
        auto& stats = shard_stats[w];
        stats = {0.0, 0.0, 0.0, 0.0};
        const double shard_n = static_cast<double>(shi - slo);
        SampleScratch scratch;
        for (int s = slo; s < shi; ++s) {
          const int idx = order[lo + s];
          const auto st = sample_grad(nets, batch, idx, adv[idx], returns[idx],
                                      cfg, grad, scratch);
          for (int i = 0; i < 4; ++i) stats[i] += st[i];
        }
        for (double& g : grad.data) g /= shard_n;
        for (double& st : stats) st /= shard_n;
      });

      std::vector<const nn::ParamVector*> refs;
      refs.reserve(workers);
      for (const auto& g : shard_grads) refs.push_back(&g);
      nn::ParamVector avg = runtime::allreduce_mean(refs);
      for (double g : avg.data)
        if (!std::isfinite(g))
          throw NumericError("ppo_update: non-finite gradient in minibatch");
      adam_step(nets.params, avg, adam, cfg.lr);

      for (int w = 0; w < workers; ++w) {
        report.policy_loss += shard_stats[w][0] / workers;
        report.value_loss += shard_stats[w][1] / workers;
        report.entropy += shard_stats[w][2] / workers;
        report.clip_frac += shard_stats[w][3] / workers;
      }
      ++report_count;
    }
  }
  const double inv = 1.0 / std::max(1, report_count);
  report.policy_loss *= inv;
  report.value_loss *= inv;
  report.entropy *= inv;
  report.clip_frac *= inv;
  if (!std::isfinite(report.policy_loss) || !std::isfinite(report.value_loss))
    throw NumericError("ppo_update: non-finite loss");
  return report;
}

nn::ParamVector ppo_batch_gradient(const TeacherNets& nets,
                                   const RolloutBatch& batch,
                                   const std::vector<double>& advantages,
                                   const std::vector<double>& returns,
                                   const runtime::PpoSection& cfg,
                                   runtime::WorkerPool& pool) {
  const int n = batch.size();
  const std::vector<double> adv = normalize_advantages(advantages);
  const int workers = pool.size();
  std::vector<nn::ParamVector> shard_grads;
  shard_grads.reserve(workers);
  for (int w = 0; w < workers; ++w) shard_grads.push_back(nets.params.zeros_like());
  pool.parallel_shards(n, [&](int w, int lo, int hi) {
    nn::ParamVector& grad = shard_grads[w];
    grad.zero();
    SampleScratch scratch;
    for (int idx = lo; idx < hi; ++idx)
      sample_grad(nets, batch, idx, adv[idx], returns[idx], cfg, grad, scratch);
    const double shard_n = static_cast<double>(hi - lo);
    for (double& g : grad.data) g /= shard_n;
  });
  std::vector<const nn::ParamVector*> refs;
  refs.reserve(workers);
  for (const auto& g : shard_grads) refs.push_back(&g);
  return runtime::allreduce_mean(refs);
}

EvalReport evaluate_teacher(const TeacherNets& nets, const EnvConfig& cfg,
                            int episodes, uint64_t seed, bool absolute_actions,
                            runtime::WorkerPool& pool) {
  if (episodes <= 0) throw ConfigError("evaluate_teacher: episodes must be >= 1");
  std::vector<uint8_t> success(episodes, 0);
  std::vector<int> cycle_steps(episodes, 0);
  pool.parallel_for(episodes, [&](int ep) {
    TaskEnv env(cfg, seed, 1'000'000ULL + ep);
    sim::StepResult result = sim::StepResult::kRunning;
    while (result == sim::StepResult::kRunning) {
      const percept::PrivilegedObs obs = percept::build_privileged(env.world());
      if (absolute_actions) {
        double mu[kActDim];
        nets.policy.forward_mean(nets.params, obs.data(), mu);
        std::array<double, 6> squashed{};
        for (int i = 0; i < kActDim; ++i) squashed[i] = std::tanh(mu[i]);
        result = env.apply_absolute(squashed).result;
      } else {
        result = env.apply_delta(sim::ActionDelta::from_flat(nets.mean_delta(obs))).result;
      }
    }
    success[ep] = result == sim::StepResult::kSuccess ? 1 : 0;
    cycle_steps[ep] = env.world().t;
  });
  EvalReport rep;
  rep.episodes = episodes;
  int n_succ = 0;
  double steps_sum = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    if (success[ep]) {
      ++n_succ;
      steps_sum += cycle_steps[ep];
    }
  }
  rep.success_rate = static_cast<double>(n_succ) / episodes;
  rep.mean_cycle_steps = n_succ > 0 ? steps_sum / n_succ : 0.0;
  return rep;
}

TrainTeacherResult train_teacher(const runtime::ExperimentConfig& cfg,
                                 uint64_t seed, const DemoBuffer* demos,
                                 runtime::WorkerPool& pool,
                                 runtime::MetricsWriter* metrics,
                                 const std::string& checkpoint_path) {
  const runtime::PpoSection& p = cfg.ppo;
  if (p.rsi && (demos == nullptr || demos->empty()))
    throw ConfigError("train_teacher: RSI enabled but no demo buffer provided");

  const EnvConfig env_cfg = env_config_from(cfg);
  TeacherNets nets;
  nets.build(p.hidden);
  nets.init(seed, p.init_std);
  nn::AdamState adam(nets.params.size());

  std::vector<TaskEnv> envs;
  envs.reserve(p.n_envs);
  for (int e = 0; e < p.n_envs; ++e) envs.emplace_back(env_cfg, seed, e);
  if (p.rsi)
    for (auto& env : envs)
      if (env.episode_rng().bernoulli(p.rsi_prob)) env.reset_from_buffer(*demos);

  const DemoBuffer* rsi = p.rsi ? demos : nullptr;
  TrainTeacherResult result;
  double last_success = 0.0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int iter = 0; iter < p.iters; ++iter) {
    RolloutBatch batch = collect_rollout(nets, envs, p.steps, rsi, p.rsi_prob,
                                         p.absolute_actions, pool);
    std::vector<double> adv, ret;
    compute_gae(batch, p.gamma, p.lam, adv, ret);
    nets.update_return_stats(ret);
    const uint64_t shuffle_seed = seed * 0x9e3779b9ULL + iter + 1;
    const PpoLossReport losses =
        ppo_update(nets, adam, batch, adv, ret, p, shuffle_seed, pool);
    result.env_steps += batch.size();

    const bool do_eval = (iter + 1) % p.eval_every == 0 || iter + 1 == p.iters;
    if (do_eval) {
      last_success = evaluate_teacher(nets, env_cfg, p.eval_episodes,
                                      seed * 77 + 13, p.absolute_actions, pool)
                         .success_rate;
    }

    if (metrics != nullptr) {
      double reward_mean = 0.0;
      for (double r : batch.reward) reward_mean += r;
      reward_mean /= batch.size();
      const auto now = std::chrono::steady_clock::now();
      metrics->log({{"iter", iter},
                    {"env_steps", result.env_steps},
                    {"reward_mean", reward_mean},
                    {"success_rate", last_success},
                    {"policy_loss", losses.policy_loss},
                    {"value_loss", losses.value_loss},
                    {"entropy", losses.entropy},
                    {"clip_frac", losses.clip_frac},
                    {"wall_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                    now - t0)
                                    .count()}});
    }
  }

  result.final_success = last_success;
  if (!checkpoint_path.empty()) {
    nets.save(checkpoint_path);
    result.checkpoint_path = checkpoint_path;
  }
  return result;
}

}  // namespace viral::ppo
