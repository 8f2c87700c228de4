#include "viral/runtime/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "viral/errors.hpp"
#include "viral/sim/snapshot_io.hpp"

namespace viral::runtime {

namespace fs = std::filesystem;

EnvConfig make_env_config(const ExperimentConfig& cfg) {
  EnvConfig e;
  e.ranges = cfg.sim.ranges;
  e.object_mode = cfg.sim.object_mode;
  e.horizon = cfg.sim.horizon;
  e.weights = cfg.weights;
  return e;
}

percept::RandomizationConfig make_percept_config(const ExperimentConfig& cfg,
                                                 bool enabled) {
  percept::RandomizationConfig pc = cfg.percept;
  pc.enabled = enabled;
  return pc;
}

void write_report(const std::string& out_dir, const std::string& name,
                  const nlohmann::json& report) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir + "/" + name);
  if (!out) throw IoError("cannot write report under " + out_dir);
  out << report.dump(2) << '\n';
}

void append_jsonl(const std::string& path, const nlohmann::json& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path);
  out << line.dump() << '\n';
}

ppo::DemoBuffer ensure_demos(const ExperimentConfig& cfg, const std::string& out_dir,
                             int n_episodes, uint64_t seed) {
  fs::create_directories(out_dir);
  const std::string path = out_dir + "/demos.jsonl";
  if (fs::exists(path)) return sim::read_demo_file(path);
  const ppo::DemoBuffer demos =
      ppo::record_demos(n_episodes, seed, make_env_config(cfg));
  sim::write_demo_file(path, demos);
  return demos;
}

TeacherOutcome harness_train_teacher(const ExperimentConfig& cfg, uint64_t seed,
                                     const ppo::DemoBuffer* demos, WorkerPool& pool,
                                     const std::string& out_dir,
                                     const std::string& tag) {
  fs::create_directories(out_dir + "/checkpoints");
  MetricsWriter metrics(out_dir + "/metrics_" + tag + ".jsonl", tag,
                        cfg.config_hash());
  const std::string ckpt = out_dir + "/checkpoints/" + tag + ".ckpt";
  const ppo::TrainTeacherResult r =
      ppo::train_teacher(cfg, seed, demos, pool, &metrics, ckpt);
  return {r.final_success, r.env_steps, r.checkpoint_path};
}

StudentOutcome harness_train_student(const ExperimentConfig& cfg, uint64_t seed,
                                     const ppo::TeacherNets& teacher,
                                     WorkerPool& pool, const std::string& out_dir,
                                     const std::string& tag) {
  fs::create_directories(out_dir + "/checkpoints");
  const DistillSection& ds = cfg.distill;

  distill::StudentSpec spec;
  spec.encoder = ds.encoder;
  spec.head = ds.head;
  spec.hidden = ds.hidden;
  spec.gru_hidden = ds.gru_hidden;
  distill::StudentNet net;
  net.build(spec);
  net.init(seed);
  nn::AdamState adam(net.params.size());

  const EnvConfig env_cfg = make_env_config(cfg);
  const percept::RandomizationConfig pcfg =
      make_percept_config(cfg, ds.randomization);
  distill::DistillCollector collector(env_cfg, pcfg, net, ds.n_envs, ds.steps,
                                      ds.alpha, seed);

  MetricsWriter metrics(out_dir + "/metrics_" + tag + ".jsonl", tag,
                        cfg.config_hash());
  StudentOutcome outcome;
  const auto t0 = std::chrono::steady_clock::now();
  int64_t env_steps = 0;

  for (int iter = 0; iter < ds.iters; ++iter) {
    distill::DistillBatch batch = collector.collect(teacher, net, pool);
    env_steps += batch.size();
    distill::ItemList items = distill::list_items(batch, spec.head);
    Rng shuffle(seed * 31 + 7, static_cast<uint64_t>(iter));
    for (size_t i = items.size(); i > 1; --i)
      std::swap(items[i - 1], items[shuffle.uniform_index(i)]);

    const int item_mb = spec.head == HeadKind::kGru
                            ? std::max<int>(1, ds.minibatch / distill::kGruChunk)
                            : ds.minibatch;
    double loss_sum = 0.0;
    int n_mb = 0;
    for (size_t lo = 0; lo < items.size(); lo += item_mb) {
      const size_t hi = std::min(items.size(), lo + item_mb);
      const distill::ItemList slice(items.begin() + lo, items.begin() + hi);
      loss_sum += distill::distill_update(net, adam, batch, slice, ds.lr, pool);
      ++n_mb;
    }
    const double mean_loss = loss_sum / std::max(1, n_mb);
    outcome.loss_curve.push_back(mean_loss);
    const auto now = std::chrono::steady_clock::now();
    metrics.log({{"iter", iter},
                 {"env_steps", env_steps},
                 {"loss", mean_loss},
                 {"wall_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                 now - t0)
                                 .count()}});
  }

  const ppo::EvalReport eval =
      distill::evaluate_student(&net, nullptr, env_cfg, pcfg, ds.eval_episodes,
                                /*randomization_on=*/true, seed * 131 + 3, pool);
  outcome.eval_success = eval.success_rate;
  outcome.eval_mean_cycle = eval.mean_cycle_steps;
  outcome.checkpoint = out_dir + "/checkpoints/" + tag + ".ckpt";
  net.save(outcome.checkpoint);
  return outcome;
}

TeacherGridResult run_teacher_grid(const ExperimentConfig& cfg, WorkerPool& pool,
                                   const std::string& out_dir, int n_seeds,
                                   bool include_no_rsi, bool include_absolute) {
  const ppo::DemoBuffer demos = ensure_demos(cfg, out_dir, 200, cfg.runtime.seed);
  TeacherGridResult grid;
  double full_sum = 0.0, no_rsi_sum = 0.0, abs_sum = 0.0;
  for (int s = 0; s < n_seeds; ++s) {
    const uint64_t seed = cfg.runtime.seed + 1000 + s;

    ExperimentConfig full_cfg = cfg;
    full_cfg.ppo.rsi = true;
    full_cfg.ppo.absolute_actions = false;
    const TeacherOutcome full = harness_train_teacher(
        full_cfg, seed, &demos, pool, out_dir, "teacher_full_s" + std::to_string(s));
    full_sum += full.final_success;
    grid.rows.push_back({{"variant", "full"},
                         {"seed", seed},
                         {"success", full.final_success},
                         {"env_steps", full.env_steps}});

    if (include_no_rsi) {
      ExperimentConfig v = cfg;
      v.ppo.rsi = false;
      v.ppo.absolute_actions = false;
      const TeacherOutcome o = harness_train_teacher(
          v, seed, nullptr, pool, out_dir, "teacher_norsi_s" + std::to_string(s));
      no_rsi_sum += o.final_success;
      grid.rows.push_back({{"variant", "no_rsi"},
                           {"seed", seed},
                           {"success", o.final_success},
                           {"env_steps", o.env_steps}});
    }
    if (include_absolute) {
      ExperimentConfig v = cfg;
      v.ppo.rsi = true;
      v.ppo.absolute_actions = true;
      const TeacherOutcome o = harness_train_teacher(
          v, seed, &demos, pool, out_dir, "teacher_abs_s" + std::to_string(s));
      abs_sum += o.final_success;
      grid.rows.push_back({{"variant", "absolute"},
                           {"seed", seed},
                           {"success", o.final_success},
                           {"env_steps", o.env_steps}});
    }
  }
  grid.mean_full = full_sum / n_seeds;
  grid.mean_no_rsi = include_no_rsi ? no_rsi_sum / n_seeds : 0.0;
  grid.mean_absolute = include_absolute ? abs_sum / n_seeds : 0.0;
  return grid;
}

namespace {

nlohmann::json grid_report(const TeacherGridResult& grid, const std::string& out_dir,
                           const std::string& name) {
  const std::string jsonl = out_dir + "/ablate_" + name + ".jsonl";
  for (const auto& row : grid.rows) append_jsonl(jsonl, row);
  nlohmann::json report = {{"ablation", name},
                           {"mean_full", grid.mean_full},
                           {"mean_no_rsi", grid.mean_no_rsi},
                           {"mean_absolute", grid.mean_absolute},
                           {"rows", grid.rows}};
  write_report(out_dir, "report_" + name + ".json", report);
  return report;
}

}  // namespace

nlohmann::json ablate_rsi(const ExperimentConfig& cfg, WorkerPool& pool,
                          const std::string& out_dir, int n_seeds) {
  return grid_report(run_teacher_grid(cfg, pool, out_dir, n_seeds, true, false),
                     out_dir, "rsi");
}

nlohmann::json ablate_delta(const ExperimentConfig& cfg, WorkerPool& pool,
                            const std::string& out_dir, int n_seeds) {
  return grid_report(run_teacher_grid(cfg, pool, out_dir, n_seeds, false, true),
                     out_dir, "delta");
}

ppo::TeacherNets ensure_teacher(const ExperimentConfig& cfg, WorkerPool& pool,
                                const std::string& out_dir) {
  if (!cfg.distill.teacher_ckpt.empty())
    return ppo::TeacherNets::load(cfg.distill.teacher_ckpt);
  const std::string path = out_dir + "/checkpoints/teacher.ckpt";
  if (fs::exists(path)) return ppo::TeacherNets::load(path);
  const ppo::DemoBuffer demos = ensure_demos(cfg, out_dir, 200, cfg.runtime.seed);
  harness_train_teacher(cfg, cfg.runtime.seed + 1000, &demos, pool, out_dir,
                        "teacher");
  return ppo::TeacherNets::load(path);
}

nlohmann::json ablate_alpha(const ExperimentConfig& cfg, WorkerPool& pool,
                            const std::string& out_dir, int n_seeds) {
  const ppo::TeacherNets teacher = ensure_teacher(cfg, pool, out_dir);
  const EnvConfig env_cfg = make_env_config(cfg);
  const std::string jsonl = out_dir + "/ablate_alpha.jsonl";
  nlohmann::json rows = nlohmann::json::array();
  for (int s = 0; s < n_seeds; ++s) {
    for (double alpha : {0.0, 0.5, 1.0}) {
      ExperimentConfig v = cfg;
      v.distill.alpha = alpha;
      const uint64_t seed = cfg.runtime.seed + 500 + s;
      char tag[64];
      std::snprintf(tag, sizeof(tag), "alpha%02d_s%d",
                    static_cast<int>(alpha * 10), s);
      const StudentOutcome o =
          harness_train_student(v, seed, teacher, pool, out_dir, tag);
      distill::StudentNet net = distill::StudentNet::load(o.checkpoint);
      const ppo::EvalReport perturbed = distill::evaluate_student(
          &net, nullptr, env_cfg, make_percept_config(v, v.distill.randomization),
          v.distill.eval_episodes, true, seed * 977 + 5, pool,
          /*perturb_steps=*/25);
      nlohmann::json row = {{"alpha", alpha},
                            {"seed", seed},
                            {"eval_success", o.eval_success},
                            {"perturbed_success", perturbed.success_rate},
                            {"loss_curve", o.loss_curve}};
      append_jsonl(jsonl, row);
      rows.push_back(row);
    }
  }
  nlohmann::json report = {{"ablation", "alpha"}, {"rows", rows}};
  write_report(out_dir, "report_alpha.json", report);
  return report;
}

nlohmann::json ablate_history(const ExperimentConfig& cfg, WorkerPool& pool,
                              const std::string& out_dir, int n_seeds) {
  const ppo::TeacherNets teacher = ensure_teacher(cfg, pool, out_dir);
  const std::string jsonl = out_dir + "/ablate_history.jsonl";
  nlohmann::json rows = nlohmann::json::array();
  const HeadKind heads[] = {HeadKind::kMlp, HeadKind::kHist4, HeadKind::kGru};
  for (int s = 0; s < n_seeds; ++s) {
    for (HeadKind head : heads) {
      ExperimentConfig v = cfg;
      v.distill.head = head;
      const uint64_t seed = cfg.runtime.seed + 700 + s;
      const std::string tag =
          std::string("hist_") + head_name(head) + "_s" + std::to_string(s);
      const StudentOutcome o =
          harness_train_student(v, seed, teacher, pool, out_dir, tag);
      nlohmann::json row = {{"head", head_name(head)},
                            {"seed", seed},
                            {"eval_success", o.eval_success}};
      append_jsonl(jsonl, row);
      rows.push_back(row);
    }
  }
  nlohmann::json report = {{"ablation", "history"}, {"rows", rows}};
  write_report(out_dir, "report_history.json", report);
  return report;
}

nlohmann::json ablate_randomization(const ExperimentConfig& cfg, WorkerPool& pool,
                                    const std::string& out_dir, int n_seeds) {
  const ppo::TeacherNets teacher = ensure_teacher(cfg, pool, out_dir);
  const EnvConfig env_cfg = make_env_config(cfg);
  const std::string jsonl = out_dir + "/ablate_randomization.jsonl";
  nlohmann::json rows = nlohmann::json::array();
  for (int s = 0; s < n_seeds; ++s) {
    const uint64_t seed = cfg.runtime.seed + 900 + s;
    for (bool enabled : {true, false}) {
      ExperimentConfig v = cfg;
      v.distill.randomization = enabled;
      const std::string tag =
          std::string("rand_") + (enabled ? "on" : "off") + "_s" + std::to_string(s);
      const StudentOutcome o =
          harness_train_student(v, seed, teacher, pool, out_dir, tag);
      // both variants are scored with every randomization enabled
      distill::StudentNet net = distill::StudentNet::load(o.checkpoint);
      const ppo::EvalReport eval = distill::evaluate_student(
          &net, nullptr, env_cfg, make_percept_config(v, true), 200, true,
          seed * 53 + 11, pool);
      nlohmann::json row = {{"randomization", enabled ? "on" : "off"},
                            {"seed", seed},
                            {"eval_success_allrand", eval.success_rate}};
      append_jsonl(jsonl, row);
      rows.push_back(row);
    }
  }
  nlohmann::json report = {{"ablation", "randomization"}, {"rows", rows}};
  write_report(out_dir, "report_randomization.json", report);
  return report;
}

nlohmann::json ablate_scaling(const ExperimentConfig& cfg, WorkerPool& pool,
                              const std::string& out_dir) {
  (void)pool;
  const EnvConfig env_cfg = make_env_config(cfg);
  ppo::TeacherNets nets;
  nets.build(cfg.ppo.hidden);
  nets.init(cfg.runtime.seed, cfg.ppo.init_std);

  // reference gradient and throughput per worker count on one fixed batch
  nlohmann::json rows = nlohmann::json::array();
  nn::ParamVector reference;
  const std::string jsonl = out_dir + "/ablate_scaling.jsonl";
  fs::create_directories(out_dir);
  for (int workers : {1, 2, 4}) {
    WorkerPool wp(workers);
    std::vector<TaskEnv> envs;
    envs.reserve(cfg.ppo.n_envs);
    for (int e = 0; e < cfg.ppo.n_envs; ++e)
      envs.emplace_back(env_cfg, cfg.runtime.seed, e);

    const auto t0 = std::chrono::steady_clock::now();
    ppo::RolloutBatch batch = ppo::collect_rollout(nets, envs, cfg.ppo.steps,
                                                   nullptr, 0.0, false, wp);
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    const double steps_per_sec = batch.size() / std::max(secs, 1e-9);

    std::vector<double> adv, ret;
    ppo::compute_gae(batch, cfg.ppo.gamma, cfg.ppo.lam, adv, ret);
    nn::ParamVector grad =
        ppo::ppo_batch_gradient(nets, batch, adv, ret, cfg.ppo, wp);

    double rel = 0.0;
    if (workers == 1) {
      reference = grad;
    } else {
      double num = 0.0, den = 0.0;
      for (size_t i = 0; i < grad.data.size(); ++i) {
        const double d = grad.data[i] - reference.data[i];
        num += d * d;
        den += reference.data[i] * reference.data[i];
      }
      rel = std::sqrt(num / std::max(den, 1e-300));
    }
    nlohmann::json row = {{"workers", workers},
                          {"env_steps_per_sec", steps_per_sec},
                          {"grad_rel_err_vs_w1", rel}};
    append_jsonl(jsonl, row);
    rows.push_back(row);
  }
  nlohmann::json report = {{"ablation", "scaling"},
                           {"hardware_threads",
                            static_cast<int>(std::thread::hardware_concurrency())},
                           {"rows", rows}};
  write_report(out_dir, "report_scaling.json", report);
  return report;
}

ppo::EvalReport evaluate_teacher_per_shape(const ppo::TeacherNets& nets,
                                           const ExperimentConfig& cfg,
                                           sim::Shape shape, int episodes,
                                           uint64_t seed, WorkerPool& pool) {
  EnvConfig env_cfg = make_env_config(cfg);
  env_cfg.forced_shape = shape;
  return ppo::evaluate_teacher(nets, env_cfg, episodes, seed, false, pool);
}

nlohmann::json ablate_objects(const ExperimentConfig& cfg, WorkerPool& pool,
                              const std::string& out_dir, int n_seeds) {
  const ppo::DemoBuffer demos = ensure_demos(cfg, out_dir, 200, cfg.runtime.seed);
  const std::string jsonl = out_dir + "/ablate_objects.jsonl";
  nlohmann::json rows = nlohmann::json::array();
  for (int s = 0; s < n_seeds; ++s) {
    const uint64_t seed = cfg.runtime.seed + 1100 + s;
    for (bool multi : {false, true}) {
      ExperimentConfig v = cfg;
      v.sim.object_mode = multi ? sim::ObjectMode::kMulti : sim::ObjectMode::kSingle;
      const std::string tag =
          std::string("obj_") + (multi ? "multi" : "single") + "_s" + std::to_string(s);
      const TeacherOutcome o =
          harness_train_teacher(v, seed, &demos, pool, out_dir, tag);
      ppo::TeacherNets nets = ppo::TeacherNets::load(o.checkpoint);
      nlohmann::json per_shape;
      double mean = 0.0;
      for (int sh = 0; sh < sim::kNumShapes; ++sh) {
        const ppo::EvalReport rep = evaluate_teacher_per_shape(
            nets, v, static_cast<sim::Shape>(sh), 20, seed * 7 + sh, pool);
        per_shape[sim::shape_name(static_cast<sim::Shape>(sh))] = rep.success_rate;
        mean += rep.success_rate;
      }
      mean /= sim::kNumShapes;
      nlohmann::json row = {{"mode", multi ? "multi" : "single"},
                            {"seed", seed},
                            {"mean_per_shape_success", mean},
                            {"per_shape", per_shape}};
      append_jsonl(jsonl, row);
      rows.push_back(row);
    }
  }
  nlohmann::json report = {{"ablation", "objects"}, {"rows", rows}};
  write_report(out_dir, "report_objects.json", report);
  return report;
}

}  // namespace viral::runtime
