#include "viral/distill/distill.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "viral/errors.hpp"
#include "viral/nn/checkpoint.hpp"

namespace viral::distill {

namespace {

constexpr int kActDim = 6;

std::array<double, 6> action_scale() { return sim::ActionDelta::bounds(); }

}  // namespace

std::vector<double> frame_to_chw(const percept::Frame& frame) {
  std::vector<double> chw(3 * percept::kFramePixels);
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < percept::kFramePixels; ++i)
      chw[ch * percept::kFramePixels + i] = frame.px[i * 3 + ch];
  return chw;
}

void StudentNet::build(const StudentSpec& s) {
  spec = s;
  params = nn::ParamVector{};
  if (spec.encoder == EncoderKind::kConv) {
    nn::EncoderSpec espec;
    espec.feature_dim = spec.feature_dim;
    conv.build(params, "enc", espec);
  } else {
    patch.build(params, "enc", spec.feature_dim);
  }
  if (spec.head == HeadKind::kGru) {
    gru.build(params, "gru", input_dim(), spec.gru_hidden);
    gru_out.build(params, "gru_out", spec.gru_hidden, kActDim);
  } else {
    nn::MLPSpec hspec{history_len() * input_dim(), spec.hidden, kActDim};
    head.build(params, "head", hspec);
  }
}

void StudentNet::init(uint64_t seed) {
  Rng rng(seed, 0x51d);
  if (spec.encoder == EncoderKind::kConv)
    conv.init(params, rng);
  else
    patch.init(params, rng);
  if (spec.head == HeadKind::kGru) {
    gru.init(params, rng);
    gru_out.init(params, rng, 0.1);
  } else {
    head.init(params, rng, 0.1);
  }
}

void StudentNet::encode(const double* chw, double* feat,
                        nn::ConvEncoder::Cache* ccache,
                        nn::PatchMeanEncoder::Cache* pcache) const {
  if (spec.encoder == EncoderKind::kConv)
    conv.forward(params, chw, feat, ccache);
  else
    patch.forward(params, chw, feat, pcache);
}

void StudentNet::encode_backward(nn::ParamVector& grad,
                                 const nn::ConvEncoder::Cache& ccache,
                                 const nn::PatchMeanEncoder::Cache& pcache,
                                 const double* dfeat) const {
  if (spec.encoder == EncoderKind::kConv)
    conv.backward(params, grad, ccache, dfeat);
  else
    patch.backward(params, grad, pcache, dfeat);
}

std::string StudentNet::descriptor() const {
  nlohmann::json j;
  j["kind"] = "student";
  j["encoder"] = runtime::encoder_name(spec.encoder);
  j["head"] = runtime::head_name(spec.head);
  j["hidden"] = spec.hidden;
  j["gru_hidden"] = spec.gru_hidden;
  j["feature_dim"] = spec.feature_dim;
  return j.dump();
}

void StudentNet::save(const std::string& path) const {
  nn::save_checkpoint(path, descriptor(), params);
}

StudentNet StudentNet::load(const std::string& path) {
  nn::ParamVector loaded;
  const std::string desc = nn::load_checkpoint(path, loaded);
  const nlohmann::json j = nlohmann::json::parse(desc);
  if (j.value("kind", "") != "student")
    throw IoError("checkpoint is not a student policy: " + path);
  StudentSpec s;
  const std::string enc = j["encoder"].get<std::string>();
  s.encoder = enc == "conv" ? EncoderKind::kConv : EncoderKind::kPatchMean;
  const std::string head_str = j["head"].get<std::string>();
  if (head_str == "mlp") s.head = HeadKind::kMlp;
  else if (head_str == "hist2") s.head = HeadKind::kHist2;
  else if (head_str == "hist4") s.head = HeadKind::kHist4;
  else if (head_str == "hist8") s.head = HeadKind::kHist8;
  else if (head_str == "gru") s.head = HeadKind::kGru;
  else throw IoError("unknown student head '" + head_str + "' in " + path);
  s.hidden = j["hidden"].get<std::vector<int>>();
  s.gru_hidden = j["gru_hidden"].get<int>();
  s.feature_dim = j["feature_dim"].get<int>();
  StudentNet net;
  net.build(s);
  if (!net.params.same_layout(loaded))
    throw IoError("student checkpoint layout mismatch: " + path);
  net.params.data = loaded.data;
  return net;
}

std::array<double, 6> student_act(const StudentNet& net,
                                  const percept::StudentStateObs& state,
                                  const percept::Frame& delivered,
                                  StudentRuntime& runtime) {
  const std::vector<double> chw = frame_to_chw(delivered);
  std::vector<double> input(net.input_dim(), 0.0);
  std::copy(state.begin(), state.end(), input.begin());
  net.encode(chw.data(), input.data() + percept::kStudentStateDim, nullptr, nullptr);

  double raw[kActDim];
  if (net.spec.head == HeadKind::kGru) {
    std::vector<double> h_next(net.spec.gru_hidden);
    net.gru.forward(net.params, input.data(), runtime.hidden.data(), h_next.data(),
                    nullptr);
    net.gru_out.forward(net.params, h_next.data(), raw);
    runtime.hidden = std::move(h_next);
  } else {
    const int k = net.history_len();
    std::vector<double> stack(static_cast<size_t>(k) * net.input_dim(), 0.0);
    // oldest first; current input is the last block
    const int have = static_cast<int>(runtime.history.size());
    const int use = std::min(have, k - 1);
    for (int j = 0; j < use; ++j) {
      const auto& entry = runtime.history[have - use + j];
      std::copy(entry.begin(), entry.end(),
                stack.begin() + static_cast<size_t>(k - 1 - use + j) * net.input_dim());
    }
    std::copy(input.begin(), input.end(),
              stack.begin() + static_cast<size_t>(k - 1) * net.input_dim());
    net.head.forward(net.params, stack.data(), raw);
  }

  if (net.history_len() > 1) {
    runtime.history.push_back(input);
    while (static_cast<int>(runtime.history.size()) > net.history_len() - 1)
      runtime.history.pop_front();
  }

  const auto scale = action_scale();
  std::array<double, 6> delta{};
  for (int i = 0; i < kActDim; ++i) delta[i] = scale[i] * std::tanh(raw[i]);
  return delta;
}

std::vector<uint8_t> assign_roles(int n_envs, double alpha) {
  if (n_envs < 1) throw ConfigError("assign_roles: n_envs must be >= 1");
  const int teacher_envs = static_cast<int>(std::lround(alpha * n_envs));
  std::vector<uint8_t> roles(n_envs, 0);
  for (int e = 0; e < teacher_envs && e < n_envs; ++e) roles[e] = 1;
  return roles;
}

ItemList list_items(const DistillBatch& batch, HeadKind head) {
  ItemList items;
  if (head == HeadKind::kGru) {
    for (int e = 0; e < batch.n_envs; ++e) {
      int t = 0;
      while (t < batch.steps) {
        items.emplace_back(e, t);
        int len = 1;
        while (t + len < batch.steps && len < kGruChunk &&
               !batch.seq[e][t + len].episode_start)
          ++len;
        t += len;
      }
    }
  } else {
    for (int e = 0; e < batch.n_envs; ++e)
      for (int t = 0; t < batch.steps; ++t) items.emplace_back(e, t);
  }
  return items;
}

DistillCollector::DistillCollector(const EnvConfig& env_cfg,
                                   const percept::RandomizationConfig& percept_cfg,
                                   const StudentNet& net, int n_envs, int steps,
                                   double alpha, uint64_t seed)
    : percept_cfg_(percept_cfg), steps_(steps), alpha_(alpha) {
  roles_ = assign_roles(n_envs, alpha);
  history_len_ = net.history_len();
  slots_.reserve(n_envs);
  for (int e = 0; e < n_envs; ++e) {
    slots_.emplace_back(env_cfg, seed, 3'000'000ULL + e);
    slots_.back().runtime.reset(net);
    start_episode(slots_.back());
  }
}

void DistillCollector::start_episode(EnvSlot& slot) {
  auto [theme, cam] = percept::sample_theme(percept_cfg_, slot.env.episode_rng());
  slot.theme = theme;
  slot.cam = cam;
  slot.latency.reset(cam.delay);
  slot.recent.clear();
  slot.pending_episode_start = true;
}

DistillBatch DistillCollector::collect(const ppo::TeacherNets& teacher,
                                       const StudentNet& student,
                                       runtime::WorkerPool& pool) {
  const int n_envs = static_cast<int>(slots_.size());
  DistillBatch batch;
  batch.n_envs = n_envs;
  batch.steps = steps_;
  batch.seq.assign(n_envs, {});
  batch.prefix.assign(n_envs, {});

  pool.parallel_for(n_envs, [&](int e) {
    EnvSlot& slot = slots_[e];
    batch.prefix[e].assign(slot.recent.begin(), slot.recent.end());
    batch.seq[e].reserve(steps_);
    for (int t = 0; t < steps_; ++t) {
      DistillSample s;
      s.priv = percept::build_privileged(slot.env.world());
      s.target = teacher.mean_delta(s.priv);
      s.state = percept::build_student_state(slot.env.world());

      const percept::Frame raw = percept::rasterize(slot.env.world(), slot.cam,
                                                    slot.theme);
      const percept::Frame processed =
          percept_cfg_.enabled
              ? percept::randomize_frame(raw, slot.theme, percept_cfg_,
                                         slot.env.world().rng)
              : raw;
      s.frame = slot.latency.push(processed);
      s.episode_start = slot.pending_episode_start ? 1 : 0;
      slot.pending_episode_start = false;
      s.teacher_driven = roles_[e];
      if (student.spec.head == HeadKind::kGru) s.hidden_before = slot.runtime.hidden;

      const std::array<double, 6> student_delta =
          student_act(student, s.state, s.frame, slot.runtime);
      const std::array<double, 6>& act = roles_[e] ? s.target : student_delta;
      const StepOutcome outcome =
          slot.env.apply_delta(sim::ActionDelta::from_flat(act));

      if (history_len_ > 1) {
        slot.recent.emplace_back(s.state, s.frame);
        while (static_cast<int>(slot.recent.size()) > history_len_ - 1)
          slot.recent.pop_front();
      }
      batch.seq[e].push_back(std::move(s));

      if (outcome.result != sim::StepResult::kRunning) {
        slot.env.reset_nominal();
        slot.runtime.reset(student);
        start_episode(slot);
      }
    }
  });
  return batch;
}

namespace {

struct FwdScratch {
  std::vector<nn::ConvEncoder::Cache> ccaches;
  std::vector<nn::PatchMeanEncoder::Cache> pcaches;
  nn::MLP::Cache hcache;
  std::vector<nn::GRUCell::StepCache> gcaches;
};

// walks history back from (env, t): fills refs oldest-first, zero-padding
// kept implicit via the returned count
int gather_history(const DistillBatch& batch, int env, int t, int k,
                   std::vector<const percept::StudentStateObs*>& states,
                   std::vector<const percept::Frame*>& frames) {
  states.assign(k, nullptr);
  frames.assign(k, nullptr);
  int depth = 0;
  const auto& seq = batch.seq[env];
  const auto& prefix = batch.prefix[env];
  for (int back = 0; back < k; ++back) {
    const int tau = t - back;
    if (tau >= 0) {
      const DistillSample& s = seq[tau];
      states[k - 1 - back] = &s.state;
      frames[k - 1 - back] = &s.frame;
      ++depth;
      if (s.episode_start) break;  // nothing valid before an episode start
    } else {
      const int pidx = static_cast<int>(prefix.size()) + tau;
      if (pidx < 0) break;
      states[k - 1 - back] = &prefix[pidx].first;
      frames[k - 1 - back] = &prefix[pidx].second;
      ++depth;
    }
  }
  return depth;
}

// returns the summed squared error over the 6 dims; accumulates unnormalized
// gradient sums into grad
double ff_sample_grad(const StudentNet& net, const DistillBatch& batch, int env,
                      int t, nn::ParamVector& grad, FwdScratch& scratch) {
  const int k = net.history_len();
  const int in_dim = net.input_dim();
  std::vector<const percept::StudentStateObs*> states;
  std::vector<const percept::Frame*> frames;
  gather_history(batch, env, t, k, states, frames);

  scratch.ccaches.resize(k);
  scratch.pcaches.resize(k);
  std::vector<double> stack(static_cast<size_t>(k) * in_dim, 0.0);
  for (int j = 0; j < k; ++j) {
    if (states[j] == nullptr) continue;
    double* block = stack.data() + static_cast<size_t>(j) * in_dim;
    std::copy(states[j]->begin(), states[j]->end(), block);
    const std::vector<double> chw = frame_to_chw(*frames[j]);
    net.encode(chw.data(), block + percept::kStudentStateDim, &scratch.ccaches[j],
               &scratch.pcaches[j]);
  }

  double raw[kActDim];
  net.head.forward(net.params, stack.data(), raw, &scratch.hcache);

  const auto scale = action_scale();
  const auto& target = batch.seq[env][t].target;
  double loss = 0.0;
  double draw[kActDim];
  for (int i = 0; i < kActDim; ++i) {
    const double th = std::tanh(raw[i]);
    const double pred = scale[i] * th;
    const double err = pred - target[i];
    loss += err * err;
    draw[i] = 2.0 * err * scale[i] * (1.0 - th * th);
  }

  std::vector<double> dstack(stack.size());
  net.head.backward(net.params, grad, scratch.hcache, draw, dstack.data());
  for (int j = 0; j < k; ++j) {
    if (states[j] == nullptr) continue;
    net.encode_backward(grad, scratch.ccaches[j], scratch.pcaches[j],
                        dstack.data() + static_cast<size_t>(j) * in_dim +
                            percept::kStudentStateDim);
  }
  return loss;
}

int chunk_length(const DistillBatch& batch, int env, int t0) {
  int len = 1;
  while (t0 + len < batch.steps && len < kGruChunk &&
         !batch.seq[env][t0 + len].episode_start)
    ++len;
  return len;
}

double gru_chunk_grad(const StudentNet& net, const DistillBatch& batch, int env,
                      int t0, nn::ParamVector& grad, FwdScratch& scratch,
                      int* steps_done) {
  const int len = chunk_length(batch, env, t0);
  *steps_done = len;
  const int in_dim = net.input_dim();
  const int hid = net.spec.gru_hidden;

  scratch.ccaches.resize(len);
  scratch.pcaches.resize(len);
  scratch.gcaches.resize(len);
  std::vector<std::vector<double>> inputs(len), hiddens(len);
  std::vector<std::array<double, kActDim>> raws(len);

  std::vector<double> h = batch.seq[env][t0].hidden_before;
  if (static_cast<int>(h.size()) != hid) h.assign(hid, 0.0);

  const auto scale = action_scale();
  double loss = 0.0;
  std::vector<std::array<double, kActDim>> draws(len);
  for (int s = 0; s < len; ++s) {
    const DistillSample& sample = batch.seq[env][t0 + s];
    inputs[s].assign(in_dim, 0.0);
    std::copy(sample.state.begin(), sample.state.end(), inputs[s].begin());
    const std::vector<double> chw = frame_to_chw(sample.frame);
    net.encode(chw.data(), inputs[s].data() + percept::kStudentStateDim,
               &scratch.ccaches[s], &scratch.pcaches[s]);
    hiddens[s].assign(hid, 0.0);
    net.gru.forward(net.params, inputs[s].data(), h.data(), hiddens[s].data(),
                    &scratch.gcaches[s]);
    net.gru_out.forward(net.params, hiddens[s].data(), raws[s].data());
    for (int i = 0; i < kActDim; ++i) {
      const double th = std::tanh(raws[s][i]);
      const double pred = scale[i] * th;
      const double err = pred - sample.target[i];
      loss += err * err;
      draws[s][i] = 2.0 * err * scale[i] * (1.0 - th * th);
    }
    h = hiddens[s];
  }

  std::vector<double> dh_carry(hid, 0.0);
  std::vector<double> dh(hid), dinput(in_dim), dh_prev(hid);
  for (int s = len - 1; s >= 0; --s) {
    dh.assign(hid, 0.0);
    net.gru_out.backward(net.params, grad, hiddens[s].data(), draws[s].data(),
                         dh.data());
    for (int i = 0; i < hid; ++i) dh[i] += dh_carry[i];
    dh_prev.assign(hid, 0.0);
    std::fill(dinput.begin(), dinput.end(), 0.0);
    net.gru.backward(net.params, grad, scratch.gcaches[s], dh.data(), dinput.data(),
                     dh_prev.data());
    net.encode_backward(grad, scratch.ccaches[s], scratch.pcaches[s],
                        dinput.data() + percept::kStudentStateDim);
    dh_carry = dh_prev;
  }
  return loss;
}

}  // namespace

nn::ParamVector distill_batch_gradient(const StudentNet& net,
                                       const DistillBatch& batch,
                                       const ItemList& items,
                                       runtime::WorkerPool& pool,
                                       double* loss_out) {
  if (items.empty()) throw ConfigError("distill gradient: empty batch");
  const int workers = pool.size();
  std::vector<nn::ParamVector> shard_grads;
  shard_grads.reserve(workers);
  for (int w = 0; w < workers; ++w) shard_grads.push_back(net.params.zeros_like());
  std::vector<double> shard_loss(workers, 0.0);
  std::vector<int64_t> shard_count(workers, 0);

  pool.parallel_shards(static_cast<int>(items.size()), [&](int w, int lo, int hi) {
    nn::ParamVector& grad = shard_grads[w];
    grad.zero();
    FwdScratch scratch;
    double loss = 0.0;
    int64_t count = 0;
    for (int it = lo; it < hi; ++it) {
      const auto [env, t] = items[it];
      if (net.spec.head == HeadKind::kGru) {
        int steps_done = 0;
        loss += gru_chunk_grad(net, batch, env, t, grad, scratch, &steps_done);
        count += steps_done;
      } else {
        loss += ff_sample_grad(net, batch, env, t, grad, scratch);
        count += 1;
      }
    }
    shard_loss[w] = loss;
    shard_count[w] = count;
  });

  int64_t total = 0;
  double loss_sum = 0.0;
  nn::ParamVector grad = net.params.zeros_like();
  for (int w = 0; w < workers; ++w) {
    total += shard_count[w];
    loss_sum += shard_loss[w];
    for (size_t i = 0; i < grad.data.size(); ++i)
      grad.data[i] += shard_grads[w].data[i];
  }
  const double norm = 1.0 / (static_cast<double>(total) * kActDim);
  for (double& g : grad.data) {
    g *= norm;
    if (!std::isfinite(g)) throw NumericError("distill gradient: non-finite gradient");
  }
  const double loss = loss_sum * norm;
  if (!std::isfinite(loss)) throw NumericError("distill gradient: non-finite loss");
  if (loss_out != nullptr) *loss_out = loss;
  return grad;
}

double distill_update(StudentNet& net, nn::AdamState& adam, const DistillBatch& batch,
                      const ItemList& items, double lr, runtime::WorkerPool& pool) {
  double loss = 0.0;
  const nn::ParamVector grad = distill_batch_gradient(net, batch, items, pool, &loss);
  adam_step(net.params, grad, adam, lr);
  return loss;
}

ppo::EvalReport evaluate_student(const StudentNet* student,
                                 const ppo::TeacherNets* teacher_stub,
                                 const EnvConfig& env_cfg,
                                 const percept::RandomizationConfig& percept_cfg,
                                 int episodes, bool randomization_on, uint64_t seed,
                                 runtime::WorkerPool& pool, int perturb_steps) {
  if (episodes <= 0) throw ConfigError("evaluate_student: episodes must be >= 1");
  if (student == nullptr && teacher_stub == nullptr)
    throw ConfigError("evaluate_student: no policy given");

  percept::RandomizationConfig eval_cfg = percept_cfg;
  eval_cfg.enabled = randomization_on;

  std::vector<uint8_t> success(episodes, 0);
  std::vector<int> cycle_steps(episodes, 0);
  // episode streams match evaluate_teacher so the privileged-stub protocol is
  // exactly comparable
  pool.parallel_for(episodes, [&](int ep) {
    TaskEnv env(env_cfg, seed, 1'000'000ULL + ep);
    auto [theme, cam] = percept::sample_theme(eval_cfg, env.episode_rng());
    percept::LatencyBuffer latency(cam.delay);
    StudentRuntime runtime;
    if (student != nullptr) runtime.reset(*student);

    sim::StepResult result = sim::StepResult::kRunning;
    const auto scale = action_scale();
    for (int i = 0; i < perturb_steps && result == sim::StepResult::kRunning; ++i) {
      std::array<double, 6> burst{};
      for (int d = 0; d < kActDim; ++d)
        burst[d] = env.world().rng.uniform(-scale[d], scale[d]);
      result = env.apply_delta(sim::ActionDelta::from_flat(burst)).result;
    }

    while (result == sim::StepResult::kRunning) {
      std::array<double, 6> act{};
      if (student != nullptr) {
        const percept::Frame raw = percept::rasterize(env.world(), cam, theme);
        const percept::Frame processed =
            randomization_on
                ? percept::randomize_frame(raw, theme, eval_cfg, env.world().rng)
                : raw;
        const percept::Frame& delivered = latency.push(processed);
        const percept::StudentStateObs state =
            percept::build_student_state(env.world());
        act = student_act(*student, state, delivered, runtime);
      } else {
        act = teacher_stub->mean_delta(percept::build_privileged(env.world()));
      }
      result = env.apply_delta(sim::ActionDelta::from_flat(act)).result;
    }
    success[ep] = result == sim::StepResult::kSuccess ? 1 : 0;
    cycle_steps[ep] = env.world().t;
  });

  ppo::EvalReport rep;
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

}  // namespace viral::distill
