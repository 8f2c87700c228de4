#pragma once

#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "viral/nn/adam.hpp"
#include "viral/percept/augment.hpp"
#include "viral/percept/obs.hpp"
#include "viral/percept/raster.hpp"
#include "viral/ppo/teacher.hpp"
#include "viral/runtime/config.hpp"
#include "viral/runtime/pool.hpp"
#include "viral/task_env.hpp"

namespace viral::distill {

using runtime::EncoderKind;
using runtime::HeadKind;

struct StudentSpec {
  EncoderKind encoder = EncoderKind::kConv;
  HeadKind head = HeadKind::kMlp;
  std::vector<int> hidden{128, 64};
  int gru_hidden = 128;
  int feature_dim = 128;
};

// image-conditioned policy: encoder features fused with proprioception into a
// single-step, frame-stack, or recurrent head; outputs squashed action deltas
struct StudentNet {
  StudentSpec spec;
  nn::ParamVector params;
  nn::ConvEncoder conv;
  nn::PatchMeanEncoder patch;
  nn::MLP head;        // mlp and hist-K variants
  nn::GRUCell gru;     // recurrent variant
  nn::Linear gru_out;

  int history_len() const { return runtime::head_history_len(spec.head); }
  int input_dim() const { return percept::kStudentStateDim + spec.feature_dim; }

  void build(const StudentSpec& s);
  void init(uint64_t seed);
  void encode(const double* chw, double* feat, nn::ConvEncoder::Cache* ccache,
              nn::PatchMeanEncoder::Cache* pcache) const;
  void encode_backward(nn::ParamVector& grad, const nn::ConvEncoder::Cache& ccache,
                       const nn::PatchMeanEncoder::Cache& pcache,
                       const double* dfeat) const;

  std::string descriptor() const;
  void save(const std::string& path) const;
  static StudentNet load(const std::string& path);
};

std::vector<double> frame_to_chw(const percept::Frame& frame);

// per-environment acting state; reset with the episode
struct StudentRuntime {
  std::deque<std::vector<double>> history;  // most recent last, length < K
  std::vector<double> hidden;

  void reset(const StudentNet& net) {
    history.clear();
    hidden.assign(net.spec.gru_hidden, 0.0);
  }
};

std::array<double, 6> student_act(const StudentNet& net,
                                  const percept::StudentStateObs& state,
                                  const percept::Frame& delivered,
                                  StudentRuntime& runtime);

// exactly round(alpha * n_envs) environments follow the teacher
std::vector<uint8_t> assign_roles(int n_envs, double alpha);

struct DistillSample {
  percept::StudentStateObs state{};
  percept::Frame frame;                 // delivered (randomized + delayed)
  std::array<double, 6> target{};       // teacher mean action
  percept::PrivilegedObs priv{};        // the observation the label came from
  uint8_t episode_start = 0;
  uint8_t teacher_driven = 0;
  std::vector<double> hidden_before;    // recurrent head only
};

struct DistillBatch {
  int n_envs = 0;
  int steps = 0;
  std::vector<std::vector<DistillSample>> seq;  // [env][t]
  // pre-window history per env (oldest first), truncated at episode starts
  std::vector<std::vector<std::pair<percept::StudentStateObs, percept::Frame>>> prefix;

  int size() const { return n_envs * steps; }
};

// training items: (env, t) for feed-forward heads, (env, chunk_start) for
// the recurrent head
using ItemList = std::vector<std::pair<int, int>>;

inline constexpr int kGruChunk = 8;

ItemList list_items(const DistillBatch& batch, HeadKind head);

// mixed-policy collection driven by the role mask; teacher mean actions are
// recorded as targets on every visited state
class DistillCollector {
 public:
  DistillCollector(const EnvConfig& env_cfg,
                   const percept::RandomizationConfig& percept_cfg,
                   const StudentNet& net, int n_envs, int steps, double alpha,
                   uint64_t seed);

  DistillBatch collect(const ppo::TeacherNets& teacher, const StudentNet& student,
                       runtime::WorkerPool& pool);

  const std::vector<uint8_t>& roles() const { return roles_; }

 private:
  struct EnvSlot {
    TaskEnv env;
    percept::VisualTheme theme{};
    percept::CameraModel cam{};
    percept::LatencyBuffer latency{0};
    StudentRuntime runtime{};
    std::deque<std::pair<percept::StudentStateObs, percept::Frame>> recent;
    bool pending_episode_start = true;

    EnvSlot(const EnvConfig& cfg, uint64_t seed, uint64_t env_id)
        : env(cfg, seed, env_id) {}
  };

  void start_episode(EnvSlot& slot);

  percept::RandomizationConfig percept_cfg_;
  int steps_ = 0;
  double alpha_ = 0.5;
  std::vector<uint8_t> roles_;
  std::vector<EnvSlot> slots_;
  int history_len_ = 1;
};

// mean MSE gradient over the items without applying an update
nn::ParamVector distill_batch_gradient(const StudentNet& net,
                                       const DistillBatch& batch,
                                       const ItemList& items,
                                       runtime::WorkerPool& pool,
                                       double* loss_out = nullptr);

// one Adam step over the given items; returns the pre-step MSE loss
double distill_update(StudentNet& net, nn::AdamState& adam, const DistillBatch& batch,
                      const ItemList& items, double lr, runtime::WorkerPool& pool);

// deterministic vision-based evaluation from fresh nominal resets; when
// perturb_steps > 0 a random action burst precedes the policy handover.
// A null student with a non-null teacher evaluates the teacher through the
// same protocol (privileged stub).
ppo::EvalReport evaluate_student(const StudentNet* student,
                                 const ppo::TeacherNets* teacher_stub,
                                 const EnvConfig& env_cfg,
                                 const percept::RandomizationConfig& percept_cfg,
                                 int episodes, bool randomization_on, uint64_t seed,
                                 runtime::WorkerPool& pool, int perturb_steps = 0);

}  // namespace viral::distill
