#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "viral/distill/distill.hpp"
#include "viral/ppo/teacher.hpp"
#include "viral/runtime/config.hpp"

namespace viral::runtime {

EnvConfig make_env_config(const ExperimentConfig& cfg);
percept::RandomizationConfig make_percept_config(const ExperimentConfig& cfg,
                                                 bool enabled);

// loads <out>/demos.jsonl when present, otherwise records and writes it
ppo::DemoBuffer ensure_demos(const ExperimentConfig& cfg, const std::string& out_dir,
                             int n_episodes, uint64_t seed);

struct TeacherOutcome {
  double final_success = 0.0;
  int64_t env_steps = 0;
  std::string checkpoint;
};

TeacherOutcome harness_train_teacher(const ExperimentConfig& cfg, uint64_t seed,
                                     const ppo::DemoBuffer* demos, WorkerPool& pool,
                                     const std::string& out_dir,
                                     const std::string& tag);

struct StudentOutcome {
  std::vector<double> loss_curve;        // mean distillation loss per iteration
  double eval_success = 0.0;             // randomization-on nominal evaluation
  double eval_mean_cycle = 0.0;
  std::string checkpoint;
};

StudentOutcome harness_train_student(const ExperimentConfig& cfg, uint64_t seed,
                                     const ppo::TeacherNets& teacher,
                                     WorkerPool& pool, const std::string& out_dir,
                                     const std::string& tag);

// teacher variants for the reset/action-space comparison
struct TeacherGridResult {
  std::vector<nlohmann::json> rows;
  double mean_full = 0.0, mean_no_rsi = 0.0, mean_absolute = 0.0;
};
TeacherGridResult run_teacher_grid(const ExperimentConfig& cfg, WorkerPool& pool,
                                   const std::string& out_dir, int n_seeds,
                                   bool include_no_rsi, bool include_absolute);

nlohmann::json ablate_rsi(const ExperimentConfig& cfg, WorkerPool& pool,
                          const std::string& out_dir, int n_seeds);
nlohmann::json ablate_delta(const ExperimentConfig& cfg, WorkerPool& pool,
                            const std::string& out_dir, int n_seeds);
nlohmann::json ablate_alpha(const ExperimentConfig& cfg, WorkerPool& pool,
                            const std::string& out_dir, int n_seeds);
nlohmann::json ablate_history(const ExperimentConfig& cfg, WorkerPool& pool,
                              const std::string& out_dir, int n_seeds);
nlohmann::json ablate_randomization(const ExperimentConfig& cfg, WorkerPool& pool,
                                    const std::string& out_dir, int n_seeds);
nlohmann::json ablate_scaling(const ExperimentConfig& cfg, WorkerPool& pool,
                              const std::string& out_dir);
nlohmann::json ablate_objects(const ExperimentConfig& cfg, WorkerPool& pool,
                              const std::string& out_dir, int n_seeds);

// teacher checkpoint shared by the student ablations: loads
// cfg.distill.teacher_ckpt when set, otherwise trains one into out_dir
ppo::TeacherNets ensure_teacher(const ExperimentConfig& cfg, WorkerPool& pool,
                                const std::string& out_dir);

ppo::EvalReport evaluate_teacher_per_shape(const ppo::TeacherNets& nets,
                                           const ExperimentConfig& cfg,
                                           sim::Shape shape, int episodes,
                                           uint64_t seed, WorkerPool& pool);

void write_report(const std::string& out_dir, const std::string& name,
                  const nlohmann::json& report);
void append_jsonl(const std::string& path, const nlohmann::json& line);

}  // namespace viral::runtime
