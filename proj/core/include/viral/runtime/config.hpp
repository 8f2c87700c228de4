#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "viral/percept/camera.hpp"
#include "viral/reward/reward.hpp"
#include "viral/sim/types.hpp"
#include "viral/sysid/finger.hpp"

namespace viral::runtime {

enum class EncoderKind { kConv, kPatchMean };
enum class HeadKind { kMlp, kHist2, kHist4, kHist8, kGru };

int head_history_len(HeadKind head);
const char* head_name(HeadKind head);
const char* encoder_name(EncoderKind enc);

struct SimSection {
  int horizon = sim::kDefaultHorizon;
  sim::ObjectMode object_mode = sim::ObjectMode::kSingle;
  sim::SceneRanges ranges{};
};

struct PpoSection {
  double gamma = 0.998;
  double lam = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double vf_coef = 1.0;
  int epochs = 4;
  int minibatches = 8;
  double lr = 3e-4;
  int n_envs = 128;
  int steps = 32;   // T
  int iters = 120;
  int eval_every = 20;
  int eval_episodes = 64;
  bool rsi = true;
  double rsi_prob = 1.0;
  bool absolute_actions = false;
  std::vector<int> hidden{128, 64};
  double init_std = 0.5;
};

struct DistillSection {
  double alpha = 0.5;
  double lr = 2e-4;
  int n_envs = 48;
  int steps = 24;
  int iters = 150;
  int minibatch = 256;
  HeadKind head = HeadKind::kMlp;
  EncoderKind encoder = EncoderKind::kConv;
  bool randomization = true;
  std::string teacher_ckpt;
  int eval_episodes = 64;
  std::vector<int> hidden{128, 64};
  int gru_hidden = 128;
};

struct SysidSection {
  sysid::FingerParams initial{0.001, 1.0, 0.1};
  sysid::FingerParams hidden{0.02, 5.0, 0.4};
  double noise_std = 0.005;
  int budget = 200;
};

struct RuntimeSection {
  int workers = 0;  // 0 = hardware concurrency
  uint64_t seed = 0;
  std::string out_dir = "out";
};

struct ExperimentConfig {
  SimSection sim;
  reward::TermWeights weights = reward::TermWeights::defaults();
  percept::RandomizationConfig percept;
  PpoSection ppo;
  DistillSection distill;
  SysidSection sysid;
  RuntimeSection runtime;
  std::string preset = "desk";

  // canonical key=value dump; stable across identical configs
  std::string canonical_string() const;
  uint64_t config_hash() const;
};

// sectioned key=value text; "[section]" headers or dotted "section.key" both
// work, '#' starts a comment, unknown keys and out-of-range values are errors
// with line numbers; "preset=paper" swaps in the large-scale defaults
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

void apply_paper_preset(ExperimentConfig& cfg);

}  // namespace viral::runtime
