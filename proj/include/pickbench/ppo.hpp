// State-based PPO expert trainer: Gaussian MLP actor-critic, GAE, clipped
// surrogate with entropy bonus, AdamW. Deterministic given the seed.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pickbench/env.hpp"
#include "pickbench/net.hpp"
#include "pickbench/policy.hpp"
#include "pickbench/rollout.hpp"

namespace pickbench {

struct PPOConfig {
  long long total_timesteps = 2'000'000;  // paper setting: 30,000,000
  int num_envs = 64;                      // paper setting: 1024
  int rollout_steps = 50;
  int minibatches = 2;
  int update_epochs = 4;
  double gamma = 0.8;
  double gae_lambda = 0.9;
  double clip_coef = 0.2;
  double entropy_coef = 0.1;
  double value_coef = 0.5;
  double learning_rate = 1e-4;
  double weight_decay = 1e-5;
  int max_episode_steps = 50;
  int hidden_size = 256;
  double log_std_init = -1.2;
  int eval_every_updates = 100;
  int eval_episodes = 100;
  double early_stop_success = -1.0;  // <0 disables early stopping
  uint64_t seed = 1;

  void validate() const;
};

constexpr int kActionDim = 7;
constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;

// Policy net (obs -> 7-dim action mean) with a state-independent log-std
// vector, and a separate value net. Two hidden layers of 256 tanh units.
struct ActorCritic {
  Mlp policy;
  VectorXd log_std;
  Mlp value;

  static ActorCritic make(int obs_dim, int hidden, uint64_t seed,
                          double log_std_init);
  VectorXd sigma() const {
    return log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax).array().exp();
  }
  double entropy() const;  // closed form: sum(log sigma) + D/2 log(2 pi e)

  int num_params() const;
  VectorXd flatten() const;
  void unflatten(const VectorXd& v);
  ActorCritic zeros_like() const;
};

// delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t
// A_t = delta_t + gamma*lambda*(1-done_t)*A_{t+1}, returns = A + V.
// V_{T} is `bootstrap`. Throws on length mismatch.
std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    double bootstrap, const std::vector<uint8_t>& dones, double gamma,
    double lambda);

struct RolloutBuffer {
  MatrixXd obs;        // N x obs_dim
  MatrixXd actions;    // N x 7
  VectorXd log_probs;
  VectorXd values;
  VectorXd advantages;
  VectorXd returns;
  int size() const { return static_cast<int>(obs.rows()); }
};

struct PPOStats {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Mean 0, std 1 (up to the 1e-8 epsilon); applied once per update.
VectorXd normalize_advantages(const VectorXd& advantages);

// Full PPO minibatch loss (clipped surrogate + entropy bonus + value MSE)
// with analytic gradients; the same function is checked against central
// finite differences. Advantages are expected pre-normalized.
double ppo_loss(const ActorCritic& net, const MatrixXd& obs, const MatrixXd& actions,
                const VectorXd& old_log_probs, const VectorXd& advantages,
                const VectorXd& returns, const PPOConfig& cfg, ActorCritic* grads,
                PPOStats* stats);

// In-place update over the buffer: normalizes advantages once, then
// update_epochs x minibatches AdamW steps. Throws on non-finite loss.
PPOStats ppo_update(const RolloutBuffer& buffer, ActorCritic& net, AdamW& opt,
                    const PPOConfig& cfg, Rng& rng);

// Shaping: -0.1 * planar distance to the instructed object per step,
// +2.0 when the episode's first attachment is the instructed object,
// -1.0 per wrong-object attachment, +5.0 for holding the instructed object
// at the final step.
double reward_fn(const EnvState& prev, const Action7& action, const EnvState& next);

struct PPOCurvePoint {
  int update = 0;
  long long env_steps = 0;
  double mean_episode_reward = 0.0;
  double eval_success = -1.0;  // -1 when no eval ran at this point
};

struct PPOTrainResult {
  ActorCritic net;
  std::vector<PPOCurvePoint> curve;
  long long env_steps = 0;
  double final_eval_success = 0.0;
};

PPOTrainResult ppo_train(EnvConfigPtr cfg, const ScenarioConfig& scenario,
                         const PPOConfig& pcfg, bool verbose = false);

// Deterministic wrapper around the action mean, used for evaluation and
// demonstration recording.
class PPOPolicy : public Policy {
 public:
  explicit PPOPolicy(ActorCritic net) : net_(std::move(net)) {}
  Action7 act(const EnvState& state) override;

 private:
  ActorCritic net_;
};

void save_actor_critic(const std::string& dir, const ActorCritic& net,
                       const nlohmann::json& extra_config);
std::pair<ActorCritic, nlohmann::json> load_actor_critic(const std::string& dir);

std::string write_ppo_curve_csv(const std::string& path,
                                const std::vector<PPOCurvePoint>& curve);

}  // namespace pickbench
