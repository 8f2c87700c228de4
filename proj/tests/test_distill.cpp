#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "viral/distill/distill.hpp"
#include "viral/errors.hpp"
#include "viral/nn/gradcheck.hpp"
#include "viral/runtime/harness.hpp"

using namespace viral;
using namespace viral::distill;

namespace {

ppo::TeacherNets tiny_teacher(uint64_t seed) {
  ppo::TeacherNets nets;
  nets.build({32, 16});
  nets.init(seed, 0.5);
  return nets;
}

StudentNet tiny_student(HeadKind head, EncoderKind enc, uint64_t seed) {
  StudentSpec spec;
  spec.head = head;
  spec.encoder = enc;
  spec.hidden = {32, 16};
  spec.gru_hidden = 24;
  StudentNet net;
  net.build(spec);
  net.init(seed);
  return net;
}

percept::RandomizationConfig no_rand() {
  percept::RandomizationConfig cfg;
  cfg.enabled = false;
  return cfg;
}

}  // namespace

TEST_CASE("role assignment covers the pure BC and pure DAgger endpoints") {
  const auto all_teacher = assign_roles(16, 1.0);
  for (uint8_t r : all_teacher) CHECK(r == 1);
  const auto all_student = assign_roles(16, 0.0);
  for (uint8_t r : all_student) CHECK(r == 0);
  const auto half = assign_roles(256, 0.5);
  int teacher_count = 0;
  for (uint8_t r : half) teacher_count += r;
  CHECK(teacher_count == 128);
}

TEST_CASE("teacher-driven environments execute exactly the recorded targets") {
  const ppo::TeacherNets teacher = tiny_teacher(1);
  const StudentNet student = tiny_student(HeadKind::kMlp, EncoderKind::kPatchMean, 2);
  runtime::WorkerPool pool(1);
  EnvConfig env_cfg;
  DistillCollector collector(env_cfg, no_rand(), student, 1, 24, 1.0, 555);
  const DistillBatch batch = collector.collect(teacher, student, pool);

  // twin environment replays the recorded targets; with frame randomization
  // off, it must retrace the recorded student states exactly
  TaskEnv twin(env_cfg, 555, 3'000'000ULL);
  for (int t = 0; t < batch.steps; ++t) {
    const percept::StudentStateObs expect =
        percept::build_student_state(twin.world());
    for (int i = 0; i < percept::kStudentStateDim; ++i)
      CHECK(batch.seq[0][t].state[i] == expect[i]);
    twin.apply_delta(sim::ActionDelta::from_flat(batch.seq[0][t].target));
  }
}

TEST_CASE("labels recompute from the stored privileged observation") {
  const ppo::TeacherNets teacher = tiny_teacher(3);
  const StudentNet student = tiny_student(HeadKind::kMlp, EncoderKind::kPatchMean, 4);
  runtime::WorkerPool pool(2);
  DistillCollector collector(EnvConfig{}, no_rand(), student, 3, 16, 0.5, 777);
  const DistillBatch batch = collector.collect(teacher, student, pool);
  CHECK(batch.size() == 3 * 16);
  for (int e = 0; e < batch.n_envs; ++e)
    for (int t = 0; t < batch.steps; ++t) {
      const auto& s = batch.seq[e][t];
      const auto again = teacher.mean_delta(s.priv);
      for (int i = 0; i < 6; ++i) CHECK(std::abs(again[i] - s.target[i]) <= 1e-12);
    }
}

TEST_CASE("the acting mix matches round(alpha * n_envs) exactly") {
  const ppo::TeacherNets teacher = tiny_teacher(5);
  const StudentNet student = tiny_student(HeadKind::kMlp, EncoderKind::kPatchMean, 6);
  runtime::WorkerPool pool(1);
  for (double alpha : {0.0, 0.25, 0.5, 1.0}) {
    DistillCollector collector(EnvConfig{}, no_rand(), student, 8, 4, alpha, 999);
    const DistillBatch batch = collector.collect(teacher, student, pool);
    int teacher_transitions = 0;
    for (const auto& seq : batch.seq)
      for (const auto& s : seq) teacher_transitions += s.teacher_driven;
    const int expected = static_cast<int>(std::lround(alpha * 8));
    CHECK(teacher_transitions == expected * 4);
  }
}

TEST_CASE("self-distillation on the student's own outputs has zero loss") {
  const ppo::TeacherNets teacher = tiny_teacher(7);
  StudentNet student = tiny_student(HeadKind::kMlp, EncoderKind::kPatchMean, 8);
  runtime::WorkerPool pool(1);
  DistillCollector collector(EnvConfig{}, no_rand(), student, 2, 8, 0.5, 1234);
  DistillBatch batch = collector.collect(teacher, student, pool);
  // relabel every sample with the student's own deterministic action
  for (auto& seq : batch.seq)
    for (auto& s : seq) {
      StudentRuntime rt;
      rt.reset(student);
      s.target = student_act(student, s.state, s.frame, rt);
      s.episode_start = 1;  // single-frame history, matching the relabel
    }
  double loss = 0.0;
  (void)distill_batch_gradient(student, batch, list_items(batch, student.spec.head),
                               pool, &loss);
  CHECK(loss <= 1e-20);
}

TEST_CASE("a zero student against targets of mean square m has loss m") {
  const ppo::TeacherNets teacher = tiny_teacher(9);
  StudentNet student = tiny_student(HeadKind::kMlp, EncoderKind::kPatchMean, 10);
  runtime::WorkerPool pool(1);
  DistillCollector collector(EnvConfig{}, no_rand(), student, 2, 8, 1.0, 4321);
  DistillBatch batch = collector.collect(teacher, student, pool);
  student.params.zero();  // tanh(0) = 0 everywhere
  double msq = 0.0;
  int count = 0;
  for (const auto& seq : batch.seq)
    for (const auto& s : seq) {
      for (double v : s.target) msq += v * v;
      count += 6;
    }
  msq /= count;
  double loss = 0.0;
  (void)distill_batch_gradient(student, batch, list_items(batch, student.spec.head),
                               pool, &loss);
  CHECK(loss == doctest::Approx(msq).epsilon(1e-12));
}

TEST_CASE("distillation loss decreases over 100 updates on a frozen batch") {
  const ppo::TeacherNets teacher = tiny_teacher(11);
  StudentNet student = tiny_student(HeadKind::kMlp, EncoderKind::kPatchMean, 12);
  runtime::WorkerPool pool(2);
  DistillCollector collector(EnvConfig{}, no_rand(), student, 4, 8, 0.5, 2468);
  const DistillBatch batch = collector.collect(teacher, student, pool);
  const ItemList items = list_items(batch, student.spec.head);
  nn::AdamState adam(student.params.size());
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 100; ++i) {
    last = distill_update(student, adam, batch, items, 2e-3, pool);
    if (i == 0) first = last;
  }
  CHECK(last < first);
  CHECK(last < 0.5 * first);
}

TEST_CASE("feed-forward distillation gradients match finite differences") {
  for (EncoderKind enc : {EncoderKind::kPatchMean, EncoderKind::kConv}) {
    const ppo::TeacherNets teacher = tiny_teacher(13);
    StudentNet student = tiny_student(HeadKind::kHist2, enc, 14);
    runtime::WorkerPool pool(1);
    DistillCollector collector(EnvConfig{}, no_rand(), student, 1, 4, 0.0, 1357);
    const DistillBatch batch = collector.collect(teacher, student, pool);
    const ItemList items = list_items(batch, student.spec.head);
    const nn::ParamVector g =
        distill_batch_gradient(student, batch, items, pool, nullptr);

    const auto scale = sim::ActionDelta::bounds();
    auto loss_fn = [&](const nn::ParamVector& q) {
      StudentNet probe = student;
      probe.params = q;
      double loss = 0.0;
      int count = 0;
      for (int t = 0; t < batch.steps; ++t) {
        // replicate the windowed stack: previous in-episode inputs then current
        const int k = probe.history_len();
        const int in_dim = probe.input_dim();
        std::vector<double> stack(static_cast<size_t>(k) * in_dim, 0.0);
        for (int back = 0; back < k; ++back) {
          const int tau = t - back;
          if (tau < 0) break;
          const auto& s = batch.seq[0][tau];
          double* block = stack.data() + static_cast<size_t>(k - 1 - back) * in_dim;
          std::copy(s.state.begin(), s.state.end(), block);
          const std::vector<double> chw = frame_to_chw(s.frame);
          probe.encode(chw.data(), block + percept::kStudentStateDim, nullptr,
                       nullptr);
          if (s.episode_start) break;
        }
        double raw[6];
        probe.head.forward(q, stack.data(), raw);
        for (int i = 0; i < 6; ++i) {
          const double pred = scale[i] * std::tanh(raw[i]);
          const double err = pred - batch.seq[0][t].target[i];
          loss += err * err;
        }
        ++count;
      }
      return loss / (count * 6);
    };
    Rng pick(15, 0);
    CHECK(nn::finite_diff_check(loss_fn, student.params, g, pick, 48) <= 1e-4);
  }
}

TEST_CASE("recurrent distillation gradients match finite differences") {
  const ppo::TeacherNets teacher = tiny_teacher(16);
  StudentNet student = tiny_student(HeadKind::kGru, EncoderKind::kPatchMean, 17);
  runtime::WorkerPool pool(1);
  DistillCollector collector(EnvConfig{}, no_rand(), student, 1, 6, 0.0, 7531);
  const DistillBatch batch = collector.collect(teacher, student, pool);
  const ItemList items = list_items(batch, student.spec.head);
  const nn::ParamVector g =
      distill_batch_gradient(student, batch, items, pool, nullptr);

  const auto scale = sim::ActionDelta::bounds();
  auto loss_fn = [&](const nn::ParamVector& q) {
    StudentNet probe = student;
    probe.params = q;
    double loss = 0.0;
    int count = 0;
    for (const auto& item : items) {
      const int t0 = item.second;
      std::vector<double> h = batch.seq[0][t0].hidden_before;
      if (static_cast<int>(h.size()) != probe.spec.gru_hidden)
        h.assign(probe.spec.gru_hidden, 0.0);
      int len = 1;
      while (t0 + len < batch.steps && len < kGruChunk &&
             !batch.seq[0][t0 + len].episode_start)
        ++len;
      for (int s = 0; s < len; ++s) {
        const auto& sample = batch.seq[0][t0 + s];
        std::vector<double> input(probe.input_dim(), 0.0);
        std::copy(sample.state.begin(), sample.state.end(), input.begin());
        const std::vector<double> chw = frame_to_chw(sample.frame);
        probe.encode(chw.data(), input.data() + percept::kStudentStateDim, nullptr,
                     nullptr);
        std::vector<double> hn(probe.spec.gru_hidden);
        probe.gru.forward(q, input.data(), h.data(), hn.data(), nullptr);
        double raw[6];
        probe.gru_out.forward(q, hn.data(), raw);
        for (int i = 0; i < 6; ++i) {
          const double pred = scale[i] * std::tanh(raw[i]);
          const double err = pred - sample.target[i];
          loss += err * err;
        }
        h = hn;
        ++count;
      }
    }
    return loss / (count * 6);
  };
  Rng pick(18, 0);
  CHECK(nn::finite_diff_check(loss_fn, student.params, g, pick, 48) <= 1e-4);
}

TEST_CASE("window prefixes carry history across collection boundaries") {
  const ppo::TeacherNets teacher = tiny_teacher(25);
  StudentNet student = tiny_student(HeadKind::kHist4, EncoderKind::kPatchMean, 26);
  runtime::WorkerPool pool(1);
  DistillCollector collector(EnvConfig{}, no_rand(), student, 1, 5, 0.0, 8642);
  (void)collector.collect(teacher, student, pool);
  const DistillBatch second = collector.collect(teacher, student, pool);
  if (!second.seq[0][0].episode_start) {
    CHECK(second.prefix[0].size() == 3);  // K-1 most recent pre-window inputs
  }
  double loss = 0.0;
  (void)distill_batch_gradient(student, second,
                               list_items(second, student.spec.head), pool, &loss);
  CHECK(std::isfinite(loss));
}

TEST_CASE("student runtime resets to zero hidden state and empty history") {
  StudentNet net = tiny_student(HeadKind::kGru, EncoderKind::kPatchMean, 19);
  StudentRuntime rt;
  rt.reset(net);
  for (double h : rt.hidden) CHECK(h == 0.0);
  CHECK(rt.history.empty());
}

TEST_CASE("student actions depend only on the state and delivered frame") {
  StudentNet net = tiny_student(HeadKind::kMlp, EncoderKind::kPatchMean, 20);
  percept::StudentStateObs state{};
  state[0] = 0.3;
  percept::Frame frame;
  for (int i = 0; i < 100; ++i) frame.px[i] = 0.01 * i;
  StudentRuntime a, b;
  a.reset(net);
  b.reset(net);
  const auto out_a = student_act(net, state, frame, a);
  const auto out_b = student_act(net, state, frame, b);
  for (int i = 0; i < 6; ++i) CHECK(out_a[i] == out_b[i]);
}

TEST_CASE("student evaluation rejects a zero episode count") {
  const StudentNet net = tiny_student(HeadKind::kMlp, EncoderKind::kPatchMean, 21);
  runtime::WorkerPool pool(1);
  CHECK_THROWS_AS((void)evaluate_student(&net, nullptr, EnvConfig{}, no_rand(), 0,
                                         false, 1, pool),
                  ConfigError);
}

TEST_CASE("student evaluation is deterministic in checkpoint and seed") {
  const StudentNet net = tiny_student(HeadKind::kMlp, EncoderKind::kPatchMean, 22);
  runtime::WorkerPool pool(2);
  percept::RandomizationConfig rc;  // enabled
  const ppo::EvalReport a =
      evaluate_student(&net, nullptr, EnvConfig{}, rc, 6, true, 31, pool);
  const ppo::EvalReport b =
      evaluate_student(&net, nullptr, EnvConfig{}, rc, 6, true, 31, pool);
  CHECK(a.success_rate == b.success_rate);
  CHECK(a.mean_cycle_steps == b.mean_cycle_steps);
}

TEST_CASE("the privileged stub protocol matches the teacher evaluation") {
  const ppo::TeacherNets teacher = tiny_teacher(23);
  runtime::WorkerPool pool(2);
  const ppo::EvalReport direct =
      ppo::evaluate_teacher(teacher, EnvConfig{}, 8, 41, false, pool);
  const ppo::EvalReport stubbed = evaluate_student(
      nullptr, &teacher, EnvConfig{}, no_rand(), 8, false, 41, pool);
  CHECK(std::abs(direct.success_rate - stubbed.success_rate) <= 0.02);
}

TEST_CASE("student checkpoints reload bit-exactly") {
  StudentNet net = tiny_student(HeadKind::kHist4, EncoderKind::kConv, 24);
  const std::string path =
      (std::filesystem::temp_directory_path() / "viral_student_test.ckpt").string();
  net.save(path);
  const StudentNet loaded = StudentNet::load(path);
  CHECK(loaded.spec.head == HeadKind::kHist4);
  CHECK(loaded.spec.encoder == EncoderKind::kConv);
  REQUIRE(loaded.params.size() == net.params.size());
  for (size_t i = 0; i < net.params.size(); ++i)
    CHECK(loaded.params.data[i] == net.params.data[i]);
}
