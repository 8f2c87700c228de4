#include "viral/ppo/teacher.hpp"

namespace viral::ppo {

void compute_gae(const RolloutBatch& batch, double gamma, double lam,
                 std::vector<double>& advantages, std::vector<double>& returns) {
  const int n = batch.size();
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  for (int e = 0; e < batch.n_envs; ++e) {
    double acc = 0.0;
    for (int t = batch.steps - 1; t >= 0; --t) {
      const int idx = e * batch.steps + t;
      const double mask = batch.done[idx] ? 0.0 : 1.0;
      const double v_next = (t == batch.steps - 1) ? batch.bootstrap_value[e]
                                                   : batch.value[idx + 1];
      const double delta =
          batch.reward[idx] + gamma * v_next * mask - batch.value[idx];
      acc = delta + gamma * lam * mask * acc;
      advantages[idx] = acc;
      returns[idx] = acc + batch.value[idx];
    }
  }
}

}  // namespace viral::ppo
