#ifndef AUTOPHOTO_POLICY_HPP_
#define AUTOPHOTO_POLICY_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "autophoto/aesthetics.hpp"
#include "autophoto/netcore.hpp"
#include "autophoto/pomdp.hpp"

namespace autophoto::policy {

enum class FeatureMode { Multilayer, LastLayer };

int feature_dim(FeatureMode mode);
std::vector<double> extract_features(const aes::ScorerParams& scorer,
                                     const scene::ViewObservation& view,
                                     FeatureMode mode);

std::vector<pomdp::Action> full_action_set();

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 64;  // steps per minibatch; also the BPTT sequence length
  double lr = 3e-4;
  double entropy_coeff = 0.01;
  double value_coeff = 0.5;
  int horizon = 128;
  int n_envs = 8;
  int scene_switch_every = 250;  // episodes per env between scene swaps
  long long total_steps = 200000;

  std::string to_json() const;
  static PPOConfig from_json(const std::string& text);
};

struct PolicyOptions {
  FeatureMode feature_mode = FeatureMode::Multilayer;
  bool use_lstm = true;
  std::vector<pomdp::Action> action_set = full_action_set();
  int hidden = 128;
};

struct PolicyParams {
  net::NetSpec backbone, actor, critic;
  std::vector<double> backbone_p, actor_p, critic_p;
  PolicyOptions options;

  static PolicyParams init(const PolicyOptions& options, std::uint64_t seed);

  int n_actions() const { return static_cast<int>(options.action_set.size()); }
  net::RecurrentState zero_state() const {
    return net::RecurrentState::zero(backbone.hidden_size());
  }

  void save(const std::string& path, const std::string& meta_json = "{}") const;
  static PolicyParams load(const std::string& path);
};

struct ActResult {
  int action_index = 0;
  double log_prob = 0.0;
  double value = 0.0;
  net::RecurrentState state;
  std::vector<double> probs;
};

ActResult act(const PolicyParams& params, std::span<const double> features,
              const net::RecurrentState& state, bool greedy, Rng* rng);

struct RolloutBuffer {
  int n_envs = 0;
  int horizon = 0;
  int feat_dim = 0;
  int hidden = 0;  // 0 when the backbone is feed-forward

  // flat index e * horizon + t
  std::vector<double> features;
  std::vector<double> h0, c0;  // recurrent state before each step
  std::vector<int> actions;
  std::vector<double> logp;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> episode_starts;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> bootstrap;  // per-env value after the last step

  int size() const { return n_envs * horizon; }
  void resize(int envs, int hor, int fdim, int hid);
};

void gae_advantages(RolloutBuffer& buffer, double gamma, double gae_lambda);

struct EpisodeStat {
  double total_reward = 0.0;
  int length = 0;
  bool success = false;
};

struct EnvSlot {
  pomdp::Environment env;
  net::RecurrentState state;
  std::vector<double> feats;
  long long episodes_done = 0;
  long long episodes_since_switch = 0;
};

// Steps all envs in lockstep for `horizon` steps; zeta advances once per
// env-step; envs that finish an episode are reset (state zeroed).
RolloutBuffer collect_rollouts(std::vector<EnvSlot>& envs, const PolicyParams& params,
                               const aes::ScorerParams& scorer, int horizon,
                               long long& zeta, Rng& rng,
                               std::vector<EpisodeStat>* stats_out);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

struct SeqRef {
  int env = 0;
  int t0 = 0;
  int len = 0;
};

struct PolicyGrads {
  std::vector<double> backbone, actor, critic;
  explicit PolicyGrads(const PolicyParams& p)
      : backbone(p.backbone_p.size(), 0.0),
        actor(p.actor_p.size(), 0.0),
        critic(p.critic_p.size(), 0.0) {}
  void zero();
};

// Clipped-surrogate PPO loss over the given contiguous sequences, with
// BPTT through the recurrent cell; gradients are accumulated. advantages
// are normalized with the supplied statistics. Returns the mean loss.
double ppo_loss_grad(const PolicyParams& params, const RolloutBuffer& buffer,
                     const PPOConfig& config, std::span<const SeqRef> seqs,
                     double adv_mean, double adv_std, PolicyGrads& grads,
                     UpdateStats* stats);

struct PolicyAdam {
  net::AdamState backbone, actor, critic;
  explicit PolicyAdam(const PolicyParams& p)
      : backbone(net::AdamState::zero(p.backbone_p.size())),
        actor(net::AdamState::zero(p.actor_p.size())),
        critic(net::AdamState::zero(p.critic_p.size())) {}
};

UpdateStats ppo_update(PolicyParams& params, const RolloutBuffer& buffer,
                       const PPOConfig& config, PolicyAdam& adam, Rng& rng);

struct MetricsRow {
  int update = 0;
  long long env_steps = 0;
  double mean_reward = 0.0;
  double capture_acc = 0.0;
  double mean_len = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);

struct TrainAgentConfig {
  PPOConfig ppo;
  pomdp::EpisodeConfig episode;
  PolicyOptions options;
};

struct TrainAgentResult {
  PolicyParams params;
  std::vector<MetricsRow> metrics;
  long long zeta = 0;
};

TrainAgentResult train_agent(const std::vector<const scene::SceneSpec*>& pool,
                             const aes::ScorerParams& scorer,
                             const TrainAgentConfig& config, std::uint64_t seed);

// One greedy evaluation episode on an already-reset environment. zeta is
// frozen; evaluation uses only the success predicate.
pomdp::EpisodeTranscript run_greedy_episode(pomdp::Environment& env,
                                            const PolicyParams& params,
                                            const aes::ScorerParams& scorer,
                                            long long zeta_frozen = 0);

}  // namespace autophoto::policy

#endif  // AUTOPHOTO_POLICY_HPP_
