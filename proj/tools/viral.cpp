#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "viral/errors.hpp"
#include "viral/runtime/harness.hpp"
#include "viral/sim/snapshot_io.hpp"

namespace fs = std::filesystem;
using namespace viral;

namespace {

runtime::ExperimentConfig load_config(const std::string& path,
                                      const std::string& out_override) {
  runtime::ExperimentConfig cfg;
  if (!path.empty()) cfg = runtime::load_config_file(path);
  if (const char* env_seed = std::getenv("VIRAL_SEED"))
    cfg.runtime.seed = std::strtoull(env_seed, nullptr, 10);
  if (!out_override.empty()) cfg.runtime.out_dir = out_override;
  return cfg;
}

int worker_count(const runtime::ExperimentConfig& cfg) {
  if (cfg.runtime.workers > 0) return cfg.runtime.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

sysid::Trajectory read_csv_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory CSV: " + path);
  sysid::Trajectory traj;
  std::string line;
  double prev_t = 0.0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t_str, q_str;
    if (!std::getline(ss, t_str, ',') || !std::getline(ss, q_str, ','))
      throw IoError("malformed CSV line in " + path + ": " + line);
    const double t = std::stod(t_str);
    traj.q.push_back(std::stod(q_str));
    if (!first) traj.dt = t - prev_t;
    prev_t = t;
    first = false;
  }
  if (traj.q.size() < 2) throw IoError("trajectory CSV too short: " + path);
  return traj;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale teacher-student loco-manipulation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  app.add_option("config", config_path, "experiment config file")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_override, "output directory override");

  auto* demo_cmd = app.add_subcommand("demo-record", "record oracle demonstrations");
  int demo_episodes = 200;
  demo_cmd->add_option("--episodes", demo_episodes, "oracle episodes to run");

  auto* teach_cmd = app.add_subcommand("train-teacher", "train the privileged teacher");

  auto* distill_cmd = app.add_subcommand("distill", "distill the vision student");
  double cli_alpha = -1.0;
  std::string cli_head, cli_encoder, cli_rand, cli_teacher_ckpt;
  distill_cmd->add_option("--alpha", cli_alpha, "teacher-driven environment fraction");
  distill_cmd->add_option("--head", cli_head, "policy head")
      ->check(CLI::IsMember({"mlp", "hist2", "hist4", "hist8", "gru"}));
  distill_cmd->add_option("--encoder", cli_encoder, "vision encoder")
      ->check(CLI::IsMember({"conv", "patchmean"}));
  distill_cmd->add_option("--randomization", cli_rand, "visual randomization")
      ->check(CLI::IsMember({"on", "off"}));
  distill_cmd->add_option("--teacher-ckpt", cli_teacher_ckpt, "teacher checkpoint");

  auto* sysid_cmd = app.add_subcommand("sysid", "fit finger actuator parameters");
  std::string sysid_real_csv;
  sysid_cmd->add_option("--real", sysid_real_csv, "measured trajectory CSV (t,q)");

  auto* eval_cmd = app.add_subcommand("eval", "deterministic policy evaluation");
  std::string eval_ckpt, eval_kind = "teacher", eval_rand = "on";
  int eval_episodes = 64;
  uint64_t eval_seed = 7;
  int eval_perturb = 0;
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--kind", eval_kind, "teacher|student")
      ->check(CLI::IsMember({"teacher", "student"}));
  eval_cmd->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
  eval_cmd->add_option("--randomization", eval_rand, "student visual randomization")
      ->check(CLI::IsMember({"on", "off"}));
  eval_cmd->add_option("--perturb-steps", eval_perturb,
                       "random action burst before handover");

  auto* render_cmd = app.add_subcommand("render-dump", "dump oracle-view frames as PPM");
  int render_frames = 16;
  uint64_t render_seed = 0;
  std::string render_rand = "off";
  render_cmd->add_option("--frames", render_frames, "number of frames");
  render_cmd->add_option("--seed", render_seed, "episode seed");
  render_cmd->add_option("--randomization", render_rand, "apply visual randomization")
      ->check(CLI::IsMember({"on", "off"}));

  auto* ablate_cmd = app.add_subcommand("ablate", "run a comparison experiment grid");
  std::string ablate_target;
  int ablate_seeds = 3;
  ablate_cmd->add_option("target", ablate_target, "what to ablate")
      ->required()
      ->check(CLI::IsMember({"rsi", "delta", "alpha", "history", "randomization",
                             "scaling", "objects"}));
  ablate_cmd->add_option("--seeds", ablate_seeds, "seeds per variant");

  CLI11_PARSE(app, argc, argv);

  try {
    runtime::ExperimentConfig cfg = load_config(config_path, out_override);
    const std::string out = cfg.runtime.out_dir;
    fs::create_directories(out);
    runtime::WorkerPool pool(worker_count(cfg));

    if (*demo_cmd) {
      const ppo::DemoBuffer demos =
          ppo::record_demos(demo_episodes, cfg.runtime.seed, runtime::make_env_config(cfg));
      sim::write_demo_file(out + "/demos.jsonl", demos);
      std::cout << "recorded " << demos.size() << " snapshots to " << out
                << "/demos.jsonl\n";
      return 0;
    }

    if (*teach_cmd) {
      const ppo::DemoBuffer demos = runtime::ensure_demos(cfg, out, 200, cfg.runtime.seed);
      const runtime::TeacherOutcome o = runtime::harness_train_teacher(
          cfg, cfg.runtime.seed + 1000, cfg.ppo.rsi ? &demos : nullptr, pool, out,
          "teacher");
      runtime::write_report(out, "report.json",
                            {{"final_success", o.final_success},
                             {"env_steps", o.env_steps},
                             {"checkpoint", o.checkpoint}});
      std::cout << "teacher final success " << o.final_success << "\n";
      return 0;
    }

    if (*distill_cmd) {
      if (cli_alpha >= 0.0) cfg.distill.alpha = cli_alpha;
      if (!cli_head.empty()) {
        runtime::ExperimentConfig tmp = runtime::parse_config("[distill]\nhead=" + cli_head);
        cfg.distill.head = tmp.distill.head;
      }
      if (!cli_encoder.empty())
        cfg.distill.encoder = cli_encoder == "conv" ? runtime::EncoderKind::kConv
                                                    : runtime::EncoderKind::kPatchMean;
      if (!cli_rand.empty()) cfg.distill.randomization = cli_rand == "on";
      if (!cli_teacher_ckpt.empty()) cfg.distill.teacher_ckpt = cli_teacher_ckpt;

      const ppo::TeacherNets teacher = runtime::ensure_teacher(cfg, pool, out);
      const std::string tag = std::string("student_") +
                              runtime::head_name(cfg.distill.head) + "_" +
                              runtime::encoder_name(cfg.distill.encoder);
      const runtime::StudentOutcome o = runtime::harness_train_student(
          cfg, cfg.runtime.seed + 500, teacher, pool, out, tag);
      runtime::write_report(out, "report.json",
                            {{"eval_success", o.eval_success},
                             {"eval_mean_cycle_steps", o.eval_mean_cycle},
                             {"checkpoint", o.checkpoint}});
      std::cout << "student eval success " << o.eval_success << "\n";
      return 0;
    }

    if (*sysid_cmd) {
      const sysid::Primitive primitive;
      sysid::Trajectory real;
      if (!sysid_real_csv.empty()) {
        real = read_csv_trajectory(sysid_real_csv);
        if (static_cast<int>(real.q.size()) != primitive.length())
          throw ConfigError("CSV trajectory length does not match the primitive");
      } else {
        real = sysid::generate_real(cfg.sysid.hidden, cfg.sysid.noise_std, primitive,
                                    cfg.runtime.seed);
      }
      const sysid::FitResult fit =
          sysid::fit(cfg.sysid.initial, real, primitive, cfg.sysid.budget);
      const nlohmann::json report = {
          {"armature", fit.params.armature},
          {"stiffness", fit.params.stiffness},
          {"damping", fit.params.damping},
          {"rmse_before", fit.rmse_before},
          {"rmse_after", fit.rmse_after},
          {"evaluations", fit.evaluations}};
      runtime::write_report(out, "sysid.json", report);
      std::cout << report.dump(2) << "\n";
      return 0;
    }

    if (*eval_cmd) {
      nlohmann::json report;
      if (eval_kind == "teacher") {
        const ppo::TeacherNets nets = ppo::TeacherNets::load(eval_ckpt);
        const ppo::EvalReport rep = ppo::evaluate_teacher(
            nets, runtime::make_env_config(cfg), eval_episodes, eval_seed, false, pool);
        report = {{"success_rate", rep.success_rate},
                  {"mean_cycle_steps", rep.mean_cycle_steps},
                  {"episodes", rep.episodes}};
      } else {
        const distill::StudentNet net = distill::StudentNet::load(eval_ckpt);
        const ppo::EvalReport rep = distill::evaluate_student(
            &net, nullptr, runtime::make_env_config(cfg),
            runtime::make_percept_config(cfg, true), eval_episodes,
            eval_rand == "on", eval_seed, pool, eval_perturb);
        report = {{"success_rate", rep.success_rate},
                  {"mean_cycle_steps", rep.mean_cycle_steps},
                  {"episodes", rep.episodes}};
      }
      runtime::write_report(out, "report.json", report);
      std::cout << report.dump(2) << "\n";
      return 0;
    }

    if (*render_cmd) {
      fs::create_directories(out + "/frames");
      TaskEnv env(runtime::make_env_config(cfg), render_seed, 9'000'000ULL);
      const percept::RandomizationConfig pcfg =
          runtime::make_percept_config(cfg, render_rand == "on");
      auto [theme, cam] = percept::sample_theme(pcfg, env.episode_rng());
      int written = 0;
      sim::StepResult result = sim::StepResult::kRunning;
      int step = 0;
      const int stride = 24;
      while (result == sim::StepResult::kRunning && written < render_frames) {
        if (step % stride == 0) {
          percept::Frame frame = percept::rasterize(env.world(), cam, theme);
          if (pcfg.enabled)
            frame = percept::randomize_frame(frame, theme, pcfg, env.world().rng);
          char name[64];
          std::snprintf(name, sizeof(name), "/frames/frame_%04d.ppm", written);
          percept::write_ppm(out + name, frame);
          ++written;
        }
        result = env.apply_delta(sim::oracle_action(env.world())).result;
        ++step;
      }
      std::cout << "wrote " << written << " frames under " << out << "/frames\n";
      return 0;
    }

    if (*ablate_cmd) {
      nlohmann::json report;
      if (ablate_target == "rsi")
        report = runtime::ablate_rsi(cfg, pool, out, ablate_seeds);
      else if (ablate_target == "delta")
        report = runtime::ablate_delta(cfg, pool, out, ablate_seeds);
      else if (ablate_target == "alpha")
        report = runtime::ablate_alpha(cfg, pool, out, ablate_seeds);
      else if (ablate_target == "history")
        report = runtime::ablate_history(cfg, pool, out, ablate_seeds);
      else if (ablate_target == "randomization")
        report = runtime::ablate_randomization(cfg, pool, out, ablate_seeds);
      else if (ablate_target == "scaling")
        report = runtime::ablate_scaling(cfg, pool, out);
      else if (ablate_target == "objects")
        report = runtime::ablate_objects(cfg, pool, out, ablate_seeds);
      std::cout << report.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
